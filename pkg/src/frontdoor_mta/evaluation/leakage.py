"""Outcome-leakage diagnostics of the mediator branch."""

from typing import Sequence

import numpy as np

from frontdoor_mta.evaluation.metrics import auc
from frontdoor_mta.nn.network import adversary, mediator_vectors, proxy_probability
from frontdoor_mta.nn.state import ModelState
from frontdoor_mta.scm.models import Episode


def adversary_auc(state: ModelState, episodes: Sequence[Episode]) -> float:
    """AUC of the discriminator's Y prediction from the mediator vectors."""
    probs = adversary(state, mediator_vectors(state, episodes))
    return auc(probs, [ep.y for ep in episodes])


def proxy_auc(state: ModelState, episodes: Sequence[Episode], threshold: float = 0.5) -> float:
    """AUC of the proxy head for the thresholded per-touch proxy score."""
    labels = np.array([s >= threshold for ep in episodes for s in ep.proxy_scores], dtype=float)
    return auc(proxy_probability(state, episodes), labels)
