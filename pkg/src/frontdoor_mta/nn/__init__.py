"""Attribution network: backbone, ITE/proxy/adversary/contrastive heads, propensity block."""

from frontdoor_mta.nn.batch import EpisodeBatch, proxy_bin
from frontdoor_mta.nn.checkpoint import load_checkpoint, read_checkpoint_manifest, save_checkpoint
from frontdoor_mta.nn.config import AnnealCurve, ModelConfig
from frontdoor_mta.nn.network import (
    ForwardPass,
    adversary,
    check_ite_inputs,
    check_reversal,
    contrastive_score,
    contrastive_scores,
    encode,
    forward,
    infonce_loss,
    mediator_branch,
    mediator_vectors,
    predict_batch,
    predict_upload,
    propensity,
    propensity_matrix,
    proxy_probability,
)
from frontdoor_mta.nn.state import BLOCKS, SPARSE_PARAMETERS, ModelState, init_state

__all__ = [
    "BLOCKS",
    "SPARSE_PARAMETERS",
    "AnnealCurve",
    "EpisodeBatch",
    "ForwardPass",
    "ModelConfig",
    "ModelState",
    "adversary",
    "check_ite_inputs",
    "check_reversal",
    "contrastive_score",
    "contrastive_scores",
    "encode",
    "forward",
    "infonce_loss",
    "init_state",
    "load_checkpoint",
    "mediator_branch",
    "mediator_vectors",
    "predict_batch",
    "predict_upload",
    "propensity",
    "propensity_matrix",
    "proxy_bin",
    "proxy_probability",
    "read_checkpoint_manifest",
    "save_checkpoint",
]
