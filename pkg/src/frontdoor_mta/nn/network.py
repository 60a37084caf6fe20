"""Forward pass of the attribution network.

Shared backbone -> per-touch embeddings h and covariate context c.

- ITE head: softmax attention over h, pooled with c, sigmoid logit g(X, T).
- Proxy head: per-touch mediator codes m_j, proxy predictions y'_j, episode M = mean_j m_j.
- Adversary: predicts Y from grad_reverse(M).
- Contrastive head: omega(touch, signature) = <z_touch, z_sig> / tau.
- Propensity block: softmax(X W + b) over clusters.

Input constants are named ``x``, ``proxy`` and ``y`` so that leakage bans can be checked
by walking the tape.
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import softmax

from frontdoor_mta.autodiff import Value, ops, topological_order
from frontdoor_mta.errors import ContractViolation, DegenerateBatchError, VocabularyError
from frontdoor_mta.nn.batch import EpisodeBatch, proxy_bin
from frontdoor_mta.nn.state import ModelState
from frontdoor_mta.scm.models import Episode, TouchEvent

FORBIDDEN_IN_ITE = ("proxy", "y")
MASKED_LOGIT = -1e9


@dataclass
class Encoding:
    touch: Value  # (n, embed_dim)
    context: Value  # (B, embed_dim)


@dataclass
class MediatorOutput:
    m_hat: Value  # (B, mediator_dim)
    touch_codes: Value  # (n, mediator_dim)
    y_prime: Value  # (n,)


@dataclass
class ForwardPass:
    """Every head output of one batch, sharing a single tape."""

    batch: EpisodeBatch
    encoding: Encoding
    p_upload: Value
    mediator: MediatorOutput
    adversary: Value
    propensity_logits: Value  # (n, n_clusters), one row per touch
    inputs: dict


def named_input(data, name: str) -> Value:
    return Value(data, op="const", name=name)


def encode_batch(state: ModelState, batch: EpisodeBatch, x: Optional[Value] = None) -> Encoding:
    """Backbone over every touch of the batch."""
    x = named_input(batch.x, "x") if x is None else x
    bb = state.block("backbone")
    cluster_rows = ops.take_rows(bb["cluster_table"], batch.clusters)
    x_rows = ops.take_rows(x, batch.segments) @ bb["x_proj"]
    h = ops.concat([cluster_rows, x_rows], axis=1)
    for i in range(len(state.config.backbone_widths)):
        h = ops.tanh(ops.add(h @ bb[f"w{i}"], bb[f"b{i}"]))
    if state.config.residual:
        h = ops.add(h, cluster_rows)
    context = ops.tanh(ops.add(x @ bb["ctx_w"], bb["ctx_b"]))
    return Encoding(touch=h, context=context)


def ite_head(state: ModelState, batch: EpisodeBatch, encoding: Encoding) -> Value:
    """g(X, T): sigmoid of attention-pooled touch embeddings plus context."""
    head = state.block("head_ite")
    scores = encoding.touch @ head["attn"]
    alpha = ops.segment_softmax(scores, batch.segments, batch.size)
    pooled = ops.segment_sum(ops.scale_rows(encoding.touch, alpha), batch.segments, batch.size)
    logit = ops.add(ops.concat([pooled, encoding.context], axis=1) @ head["out_w"], head["out_b"])
    return ops.sigmoid(ops.reshape(logit, (batch.size,)))


def mediator_head(state: ModelState, batch: EpisodeBatch, encoding: Encoding) -> MediatorOutput:
    head = state.block("head_proxy")
    h = ops.scale_grad(encoding.touch, state.config.proxy_passthrough)
    codes = ops.tanh(ops.add(h @ head["med_w"], head["med_b"]))
    y_prime = ops.sigmoid(
        ops.reshape(ops.add(codes @ head["out_w"], head["out_b"]), (batch.n_touches,))
    )
    inv_len = 1.0 / np.maximum(batch.lengths, 1)
    m_hat = ops.scale_rows(ops.segment_sum(codes, batch.segments, batch.size), inv_len)
    return MediatorOutput(m_hat=m_hat, touch_codes=codes, y_prime=y_prime)


def check_reversal(output: Value, source: Value) -> None:
    """Raise unless every tape path from ``output`` back to ``source`` crosses grad_reverse."""
    stack = [output]
    seen: set[int] = set()
    while stack:
        node = stack.pop()
        if node is source:
            raise ContractViolation("adversary reaches the mediator without a grad_reverse node")
        if id(node) in seen or node.op == "grad_reverse":
            continue
        seen.add(id(node))
        stack.extend(node.parents)


def adversary_head(state: ModelState, m_hat: Value, lambda_grl: float) -> Value:
    """Discriminator P(Y=1 | M) fed through a gradient-reversal layer."""
    head = state.block("head_adv")
    reversed_m = ops.grad_reverse(m_hat, lambda_grl)
    hidden = ops.tanh(ops.add(reversed_m @ head["hid_w"], head["hid_b"]))
    logit = ops.add(hidden @ head["out_w"], head["out_b"])
    out = ops.sigmoid(ops.reshape(logit, (m_hat.shape[0],)))
    check_reversal(out, m_hat)
    return out


def touch_embedding(state: ModelState, clusters: np.ndarray) -> Value:
    """Contrastive touch-side embedding; backbone gradient scaled by ``ctr_passthrough``."""
    head = state.block("head_ctr")
    shared = ops.scale_grad(
        ops.take_rows(state["backbone.cluster_table"], clusters), state.config.ctr_passthrough
    )
    return ops.add(ops.take_rows(head["touch_table"], clusters), shared @ head["link"])


def signature_embedding(state: ModelState, bins: np.ndarray) -> Value:
    return ops.take_rows(state["head_ctr.sig_table"], bins)


def propensity_logits(state: ModelState, x: Value) -> Value:
    block = state.block("propensity")
    return ops.add(x @ block["w"], block["b"])


def check_ite_inputs(p_upload: Value) -> None:
    """Raise if the ITE output depends on the proxy scores or the outcome."""
    for node in topological_order(p_upload):
        if node.op == "const" and node.name in FORBIDDEN_IN_ITE:
            raise ContractViolation(f"ITE head depends on forbidden input '{node.name}'")


def forward(state: ModelState, batch: EpisodeBatch, lambda_grl: float = 0.0) -> ForwardPass:
    """Run every head on one tape."""
    inputs = {
        "x": named_input(batch.x, "x"),
        "proxy": named_input(batch.proxy, "proxy"),
        "y": named_input(batch.y, "y"),
    }
    encoding = encode_batch(state, batch, inputs["x"])
    p_upload = ite_head(state, batch, encoding)
    check_ite_inputs(p_upload)
    mediator = mediator_head(state, batch, encoding)
    adversary = adversary_head(state, mediator.m_hat, lambda_grl)
    touch_x = ops.take_rows(inputs["x"], batch.segments)
    return ForwardPass(
        batch=batch,
        encoding=encoding,
        p_upload=p_upload,
        mediator=mediator,
        adversary=adversary,
        propensity_logits=propensity_logits(state, touch_x),
        inputs=inputs,
    )


def contrastive_pairs(batch: EpisodeBatch, bins: int) -> tuple[np.ndarray, np.ndarray]:
    """One positive (touch, signature) pair per non-empty episode.

    The positive touch is the one with the highest proxy score, earliest on ties.

    Returns:
        (cluster ids, signature bins) of the positives, in episode order
    """
    clusters, sig = [], []
    for row in range(batch.size):
        idx = np.flatnonzero(batch.segments == row)
        if idx.size == 0:
            continue
        best = idx[int(np.argmax(batch.proxy[idx]))]
        clusters.append(batch.clusters[best])
        sig.append(batch.proxy[best])
    return np.array(clusters, dtype=np.int64), proxy_bin(np.array(sig), bins)


def infonce_loss(state: ModelState, batch: EpisodeBatch) -> Value:
    """InfoNCE of each episode's positive pair against the other episodes' signatures.

    A column whose signature bin equals the row's own positive bin holds the same
    logit as the positive, so it is masked out of that row's negatives.

    Raises:
        DegenerateBatchError: Fewer than two non-empty episodes
    """
    clusters, bins = contrastive_pairs(batch, state.config.proxy_bins)
    if len(clusters) < 2:
        raise DegenerateBatchError(
            "InfoNCE needs at least 2 non-empty episodes for in-batch negatives, "
            f"got {len(clusters)}"
        )
    z_touch = touch_embedding(state, clusters)
    z_sig = signature_embedding(state, bins)
    logits = ops.scale(z_touch @ ops.transpose(z_sig), 1.0 / state.config.tau_ctr)
    repeated = bins[:, None] == bins[None, :]
    np.fill_diagonal(repeated, False)
    if repeated.any():
        logits = ops.add(logits, np.where(repeated, MASKED_LOGIT, 0.0))
    return ops.softmax_cross_entropy(logits, np.arange(len(clusters)))


# Single-episode and inference helpers below operate on plain arrays.


def _batch(state: ModelState, episodes: Sequence[Episode]) -> EpisodeBatch:
    return EpisodeBatch.from_episodes(episodes, state.n_clusters, state.d_x)


def encode(state: ModelState, ep: Episode) -> tuple[np.ndarray, np.ndarray]:
    """Per-touch embeddings (len, embed_dim) and the episode context (embed_dim,).

    Raises:
        ContractViolation: The episode has no touches
        VocabularyError: A cluster id is outside the vocabulary
    """
    if not ep.touches:
        raise ContractViolation(f"episode {ep.episode_id} has no touches to encode")
    encoding = encode_batch(state, _batch(state, [ep]))
    return encoding.touch.data.copy(), encoding.context.data[0].copy()


def predict_batch(state: ModelState, episodes: Sequence[Episode]) -> np.ndarray:
    """Predicted upload probability of each episode (empty episodes allowed)."""
    batch = _batch(state, episodes)
    return ite_head(state, batch, encode_batch(state, batch)).data.copy()


def predict_upload(state: ModelState, ep: Episode) -> float:
    """g(X, T) for one episode."""
    return float(predict_batch(state, [ep])[0])


def mediator_branch(state: ModelState, ep: Episode) -> tuple[np.ndarray, np.ndarray]:
    """Mediator vector M (mediator_dim,) and per-touch proxy predictions (len,)."""
    batch = _batch(state, [ep])
    out = mediator_head(state, batch, encode_batch(state, batch))
    return out.m_hat.data[0].copy(), out.y_prime.data.copy()


def adversary(state: ModelState, m_hat: np.ndarray, lambda_grl: float = 0.0) -> np.ndarray:
    """Discriminator probabilities for one M vector or a (B, mediator_dim) stack."""
    m = np.atleast_2d(np.asarray(m_hat, dtype=np.float64))
    return adversary_head(state, Value(m), lambda_grl).data.copy()


def _signature_bin(state: ModelState, proxy_sig: Union[int, float, np.integer]) -> int:
    bins = state.config.proxy_bins
    if isinstance(proxy_sig, (int, np.integer)) and not isinstance(proxy_sig, bool):
        if not 0 <= int(proxy_sig) < bins:
            raise VocabularyError(f"signature bin {proxy_sig} outside [0, {bins})")
        return int(proxy_sig)
    return int(proxy_bin(float(proxy_sig), bins))


def contrastive_score(
    state: ModelState, touch: TouchEvent, proxy_sig: Union[int, float, None] = None
) -> float:
    """omega(touch, signature) = <z_touch, z_sig> / tau.

    Args:
        state: Model parameters
        touch: Touch to score
        proxy_sig: Signature bin (int) or proxy score (float); defaults to the touch's own
            proxy score
    """
    if touch.cluster_id >= state.n_clusters:
        raise VocabularyError(
            f"cluster id {touch.cluster_id} outside vocabulary [0, {state.n_clusters})"
        )
    sig = _signature_bin(state, touch.proxy_score if proxy_sig is None else proxy_sig)
    z_touch = touch_embedding(state, np.array([touch.cluster_id])).data[0]
    z_sig = state["head_ctr.sig_table"].data[sig]
    return float(z_touch @ z_sig / state.config.tau_ctr)


def contrastive_scores(state: ModelState, ep: Episode) -> np.ndarray:
    """omega of every touch of ``ep`` against its own proxy signature."""
    if not ep.touches:
        return np.zeros(0)
    batch = _batch(state, [ep])
    z_touch = touch_embedding(state, batch.clusters).data
    z_sig = state["head_ctr.sig_table"].data[proxy_bin(batch.proxy, state.config.proxy_bins)]
    return (z_touch * z_sig).sum(axis=1) / state.config.tau_ctr


def propensity_matrix(state: ModelState, x: np.ndarray) -> np.ndarray:
    """P(T'=c | X) for every row of ``x`` (B, d_x); rows sum to 1."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    block = state.block("propensity")
    return softmax(x @ block["w"].data + block["b"].data, axis=1)


def propensity(state: ModelState, x: Sequence[float], cluster_id: int) -> float:
    """P(T'=cluster_id | X=x) from the multinomial propensity block."""
    if not 0 <= cluster_id < state.n_clusters:
        raise VocabularyError(f"cluster id {cluster_id} outside vocabulary [0, {state.n_clusters})")
    return float(propensity_matrix(state, x)[0, cluster_id])


def proxy_probability(state: ModelState, episodes: Sequence[Episode]) -> np.ndarray:
    """Flattened per-touch proxy predictions y' over ``episodes``."""
    batch = _batch(state, episodes)
    return mediator_head(state, batch, encode_batch(state, batch)).y_prime.data.copy()


def mediator_vectors(state: ModelState, episodes: Sequence[Episode]) -> np.ndarray:
    batch = _batch(state, episodes)
    return mediator_head(state, batch, encode_batch(state, batch)).m_hat.data.copy()


