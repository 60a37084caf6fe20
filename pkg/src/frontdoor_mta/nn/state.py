"""Parameter blocks of the attribution network."""

from collections import OrderedDict
from typing import Iterable, Iterator, Optional

import numpy as np

from frontdoor_mta.autodiff import Value
from frontdoor_mta.errors import ContractViolation, DataError
from frontdoor_mta.nn.config import ModelConfig
from frontdoor_mta.scm.generator import rng_for

BLOCKS = ("backbone", "head_ite", "head_proxy", "head_adv", "head_ctr", "propensity")

# Embedding tables updated with the sparse optimizer.
SPARSE_PARAMETERS = frozenset(
    {"backbone.cluster_table", "head_ctr.touch_table", "head_ctr.sig_table"}
)


class ModelState:
    """Backbone, four heads and the propensity block, each an ordered map of leaf Values.

    Parameters are addressed as ``"<block>.<name>"``. A state is mutated only by the
    optimizer of its owning training run; inference never writes to it.
    """

    def __init__(
        self,
        config: ModelConfig,
        n_clusters: int,
        d_x: int,
        blocks: "OrderedDict[str, OrderedDict[str, Value]]",
    ):
        missing = [name for name in BLOCKS if name not in blocks]
        if missing:
            raise ContractViolation(f"model state missing blocks: {missing}")
        self.config = config
        self.n_clusters = n_clusters
        self.d_x = d_x
        self.blocks = blocks

    def __getitem__(self, key: str) -> Value:
        block, _, name = key.partition(".")
        return self.blocks[block][name]

    def block(self, name: str) -> "OrderedDict[str, Value]":
        return self.blocks[name]

    def named_parameters(
        self, blocks: Optional[Iterable[str]] = None
    ) -> Iterator[tuple[str, Value]]:
        """Yield ``(qualified_name, value)`` in a fixed order, optionally for some blocks."""
        chosen = BLOCKS if blocks is None else tuple(b for b in BLOCKS if b in set(blocks))
        for block in chosen:
            for name, value in self.blocks[block].items():
                yield f"{block}.{name}", value

    def parameters(self, blocks: Optional[Iterable[str]] = None) -> list[Value]:
        return [value for _, value in self.named_parameters(blocks)]

    def zero_grad(self) -> None:
        for value in self.parameters():
            value.zero_grad()

    def to_arrays(self) -> "OrderedDict[str, np.ndarray]":
        """Copy of every parameter keyed by qualified name."""
        return OrderedDict((key, value.data.copy()) for key, value in self.named_parameters())

    def load_arrays(self, arrays: "OrderedDict[str, np.ndarray]") -> None:
        """Overwrite parameters in place from :meth:`to_arrays` output."""
        for key, value in self.named_parameters():
            if key not in arrays:
                raise DataError(f"snapshot lacks parameter {key}")
            if arrays[key].shape != value.shape:
                raise DataError(
                    f"parameter {key} has shape {arrays[key].shape} in snapshot, "
                    f"expected {value.shape}"
                )
            value.data = np.array(arrays[key], dtype=np.float64)
            value.zero_grad()

    def copy(self) -> "ModelState":
        """Independent deep copy."""
        clone = init_state(self.config, self.n_clusters, self.d_x)
        clone.load_arrays(self.to_arrays())
        return clone

    def fingerprint(self) -> bytes:
        """Byte string that is equal for bit-identical states."""
        return b"".join(
            key.encode("utf-8") + value.data.tobytes() for key, value in self.named_parameters()
        )


def _param(blocks, block: str, name: str, data: np.ndarray) -> None:
    blocks[block][name] = Value(data, name=f"{block}.{name}")


def init_state(config: ModelConfig, n_clusters: int, d_x: int) -> ModelState:
    """Seeded initial parameters.

    Embedding tables are drawn with std ``init_scale``, dense weights with std
    ``1/sqrt(fan_in)``, biases and the propensity block start at zero.

    Args:
        config: Widths and seed
        n_clusters: Vocabulary size of the cluster tables
        d_x: Covariate dimension
    """
    rng = rng_for(config.seed, "init")
    e = config.embed_dim
    md = config.mediator_dim
    aw = config.adversary_width

    def dense(fan_in: int, fan_out: int) -> np.ndarray:
        return rng.standard_normal((fan_in, fan_out)) / np.sqrt(fan_in)

    def table(rows: int) -> np.ndarray:
        return config.init_scale * rng.standard_normal((rows, e))

    blocks: OrderedDict[str, OrderedDict[str, Value]] = OrderedDict(
        (name, OrderedDict()) for name in BLOCKS
    )

    _param(blocks, "backbone", "cluster_table", table(n_clusters))
    _param(blocks, "backbone", "x_proj", dense(d_x, e))
    fan_in = 2 * e
    for i, width in enumerate(config.backbone_widths):
        _param(blocks, "backbone", f"w{i}", dense(fan_in, width))
        _param(blocks, "backbone", f"b{i}", np.zeros(width))
        fan_in = width
    _param(blocks, "backbone", "ctx_w", dense(d_x, e))
    _param(blocks, "backbone", "ctx_b", np.zeros(e))

    _param(blocks, "head_ite", "attn", dense(e, 1)[:, 0])
    _param(blocks, "head_ite", "out_w", dense(2 * e, 1))
    _param(blocks, "head_ite", "out_b", np.zeros(1))

    _param(blocks, "head_proxy", "med_w", dense(e, md))
    _param(blocks, "head_proxy", "med_b", np.zeros(md))
    _param(blocks, "head_proxy", "out_w", dense(md, 1))
    _param(blocks, "head_proxy", "out_b", np.zeros(1))

    _param(blocks, "head_adv", "hid_w", dense(md, aw))
    _param(blocks, "head_adv", "hid_b", np.zeros(aw))
    _param(blocks, "head_adv", "out_w", dense(aw, 1))
    _param(blocks, "head_adv", "out_b", np.zeros(1))

    _param(blocks, "head_ctr", "touch_table", table(n_clusters))
    _param(blocks, "head_ctr", "sig_table", table(config.proxy_bins))
    _param(blocks, "head_ctr", "link", dense(e, e))

    _param(blocks, "propensity", "w", np.zeros((d_x, n_clusters)))
    _param(blocks, "propensity", "b", np.zeros(n_clusters))

    return ModelState(config, n_clusters, d_x, blocks)
