"""Staged, IPW-weighted, annealed training of the attribution network."""

import logging
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from frontdoor_mta.autodiff import Value, backward, ops
from frontdoor_mta.errors import (
    ContractViolation,
    DegenerateBatchError,
    NumericError,
    TrainingAbortedError,
    UndefinedMetricError,
)
from frontdoor_mta.estimators.ipw import episode_weights
from frontdoor_mta.evaluation.metrics import auc
from frontdoor_mta.log import kv
from frontdoor_mta.nn.batch import EpisodeBatch
from frontdoor_mta.nn.checkpoint import save_checkpoint
from frontdoor_mta.nn.config import ModelConfig
from frontdoor_mta.nn.network import (
    encode_batch,
    forward,
    infonce_loss,
    ite_head,
    propensity_matrix,
)
from frontdoor_mta.nn.state import SPARSE_PARAMETERS, ModelState, init_state
from frontdoor_mta.scm.generator import SyntheticDataset, rng_for
from frontdoor_mta.scm.models import Episode
from frontdoor_mta.training.optim import Adagrad, Adam
from frontdoor_mta.training.plan import COMPONENTS, STAGE_BLOCKS, STAGES, TrainPlan

logger = logging.getLogger(__name__)

LOG_COLUMNS = [
    "step",
    "stage",
    "main",
    "dml",
    "adv",
    "disc",
    "reg",
    "ctr",
    "proxy",
    "propensity",
    "total",
    "lambda_dml",
    "lambda_adv",
    "lambda_reg",
    "lambda_ctr",
    "grl",
    "auc",
]


class TrainLog:
    """Per-step loss components (already multiplied by their coefficients).

    When ``path`` is set, each record is appended to a CSV file as it arrives; the file
    starts with ``# key=value`` manifest lines.
    """

    def __init__(self, manifest: dict, path: Optional[Path] = None):
        self.manifest = dict(manifest)
        self.records: list[dict] = []
        self.path = Path(path) if path is not None else None
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "w", encoding="utf-8") as f:
                for key, value in self.manifest.items():
                    f.write(f"# {key}={value}\n")
                f.write(",".join(LOG_COLUMNS) + "\n")

    def __len__(self) -> int:
        return len(self.records)

    def append(self, record: dict) -> None:
        row = {column: record.get(column, np.nan) for column in LOG_COLUMNS}
        self.records.append(row)
        if self.path is not None:
            pd.DataFrame([row], columns=LOG_COLUMNS).to_csv(
                self.path, mode="a", header=False, index=False
            )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.records, columns=LOG_COLUMNS)


def read_train_log(path: Path) -> TrainLog:
    """Load a CSV written by :class:`TrainLog`."""
    manifest = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.startswith("# "):
                break
            key, _, value = line[2:].rstrip("\n").partition("=")
            manifest[key] = value
    log = TrainLog(manifest)
    for record in pd.read_csv(path, comment="#").to_dict(orient="records"):
        log.append(record)
    return log


@dataclass
class TrainResult:
    state: ModelState
    log: TrainLog
    model_config: ModelConfig
    train: list[Episode]
    held_out: list[Episode]
    auc_history: list[float] = field(default_factory=list)


@dataclass
class StepLosses:
    values: dict
    total: Value


def batch_weights(state: ModelState, batch: EpisodeBatch, plan: TrainPlan) -> np.ndarray:
    """IPW episode weights from the current propensity block, or ones."""
    if plan.weighting == "uniform":
        return np.ones(batch.size)
    p = propensity_matrix(state, batch.x)[batch.segments, batch.clusters]
    return episode_weights(plan.ipw, p, batch.segments, batch.size)


def compute_losses(
    state: ModelState,
    config: ModelConfig,
    batch: EpisodeBatch,
    weights: np.ndarray,
    stage: str,
    lambdas: dict,
    lambda_grl: float,
) -> StepLosses:
    """Composite loss of one batch for ``stage``; components outside the stage are 0.

    The discriminator fits Y from M with unit weight whenever its head is active, so it
    keeps learning when ``lambdas["adv"]`` is 0. The adversarial coefficient scales only
    the reversed gradient that reaches the mediator branch, giving a reversal strength of
    ``lambdas["adv"] * lambda_grl``. ``adv`` reports that coefficient-weighted term and
    ``disc`` the discriminator loss; ``total`` counts ``disc``, not ``adv``.
    """
    fp = forward(state, batch, lambdas["adv"] * lambda_grl)
    p = fp.p_upload
    values = {
        name: 0.0
        for name in ("main", "dml", "adv", "disc", "reg", "ctr", "proxy", "propensity")
    }

    main = ops.binary_cross_entropy(p, batch.y, weights)
    total = main
    values["main"] = main.item()

    if lambdas["dml"] > 0:
        residual = ops.sub(fp.inputs["y"], p)
        dml = ops.scale(ops.mean(ops.mul(ops.mul(residual, residual), weights)), lambdas["dml"])
        total = ops.add(total, dml)
        values["dml"] = dml.item()

    if batch.n_touches:
        prop = ops.softmax_cross_entropy(fp.propensity_logits, batch.clusters)
        total = ops.add(total, prop)
        values["propensity"] = prop.item()

    active = STAGE_BLOCKS[stage]
    if "head_proxy" in active and config.lambda_proxy > 0 and batch.n_touches:
        proxy = ops.scale(
            ops.binary_cross_entropy(fp.mediator.y_prime, batch.proxy), config.lambda_proxy
        )
        total = ops.add(total, proxy)
        values["proxy"] = proxy.item()

    if "head_adv" in active:
        disc = ops.binary_cross_entropy(fp.adversary, batch.y)
        total = ops.add(total, disc)
        values["disc"] = disc.item()
        values["adv"] = lambdas["adv"] * values["disc"]

    if "head_ctr" in active and lambdas["ctr"] > 0:
        try:
            ctr = ops.scale(infonce_loss(state, batch), lambdas["ctr"])
            total = ops.add(total, ctr)
            values["ctr"] = ctr.item()
        except DegenerateBatchError as exc:
            logger.debug("Contrastive term skipped: %s", exc)

    if lambdas["reg"] > 0:
        squares = [ops.l2_norm(v, squared=True) for v in state.parameters(active)]
        reg = squares[0]
        for term in squares[1:]:
            reg = ops.add(reg, term)
        reg = ops.scale(reg, lambdas["reg"])
        total = ops.add(total, reg)
        values["reg"] = reg.item()

    values["total"] = total.item()
    return StepLosses(values=values, total=total)


def calibrate_coefficients(
    state: ModelState,
    config: ModelConfig,
    plan: TrainPlan,
    batches: Sequence[EpisodeBatch],
) -> ModelConfig:
    """Rescale positive coefficients so that lambda_k * L_k / L_main hits the target ratio.

    Zero coefficients stay zero. Magnitudes are averaged over ``batches`` at the
    current parameters.
    """
    unit = {"dml": 1.0, "adv": 1.0, "reg": 1.0, "ctr": 1.0}
    sums = {name: 0.0 for name in COMPONENTS}
    for batch in batches:
        weights = batch_weights(state, batch, plan)
        losses = compute_losses(state, config, batch, weights, "anneal", unit, 0.0).values
        for name in COMPONENTS:
            sums[name] += losses[name]
    magnitude = {name: sums[name] / len(batches) for name in COMPONENTS}

    update = {}
    for i, name in enumerate(COMPONENTS[1:], start=1):
        key = f"lambda_{name}"
        current = getattr(config, key)
        if current == 0 or magnitude[name] <= 0:
            continue
        ratio = plan.target_ratio[i] / plan.target_ratio[0]
        update[key] = ratio * magnitude["main"] / magnitude[name]
    logger.info("Calibrated coefficients %s", kv(**update))
    return config.model_copy(update=update)


class Trainer:
    """Single-owner training loop over one state."""

    def __init__(
        self,
        state: ModelState,
        plan: TrainPlan,
        train_batch: EpisodeBatch,
        held_batch: Optional[EpisodeBatch],
        log: TrainLog,
        snapshot_dir: Optional[Path] = None,
        config_hash: str = "",
    ):
        self.state = state
        self.config = state.config
        self.plan = plan
        self.train_batch = train_batch
        self.held_batch = held_batch
        self.log = log
        self.snapshot_dir = snapshot_dir
        self.config_hash = config_hash
        self.adam = Adam(self.config.lr_dense)
        self.adagrad = Adagrad(self.config.lr_sparse)
        self.step_count = 0
        self.auc_history: list[float] = []
        self._warmup_aucs: list[float] = []
        self._rng = rng_for(self.config.seed, "batches")
        self._order = np.zeros(0, dtype=np.int64)
        self._cursor = 0

    def _next_rows(self) -> np.ndarray:
        n = self.train_batch.size
        size = min(self.plan.batch_size, n)
        if self._cursor + size > len(self._order):
            self._order = self._rng.permutation(n)
            self._cursor = 0
        rows = self._order[self._cursor : self._cursor + size]
        self._cursor += size
        return rows

    def coefficients(self, stage: str, k: int) -> tuple[dict, float]:
        """Effective coefficients and reversal strength at step ``k`` of ``stage``."""
        cfg = self.config
        lambdas = {
            "dml": cfg.lambda_dml,
            "reg": cfg.lambda_reg,
            "adv": 0.0,
            "ctr": 0.0,
        }
        grl = 0.0
        if stage == "anneal":
            progress = self.plan.progress(stage, k)
            ramp = self.plan.anneal_curve(progress)
            lambdas["adv"] = cfg.lambda_adv * ramp
            lambdas["ctr"] = cfg.lambda_ctr * ramp
            grl = cfg.grl_target * cfg.grl_schedule(progress)
        return lambdas, grl

    def held_out_auc(self) -> float:
        if self.held_batch is None:
            return float("nan")
        p = ite_head(self.state, self.held_batch, encode_batch(self.state, self.held_batch)).data
        try:
            return auc(p, self.held_batch.y)
        except UndefinedMetricError:
            return float("nan")

    def _abort(self, stage: str, reason: str) -> None:
        target = self.snapshot_dir or Path(tempfile.mkdtemp(prefix="fdmta-abort-"))
        path = save_checkpoint(
            Path(target) / f"abort-step{self.step_count:06d}",
            self.state,
            self.config_hash,
            self.config.seed,
            stage,
            self.step_count,
        )
        logger.error("Training aborted at step %d (%s); snapshot %s", self.step_count, reason, path)
        raise TrainingAbortedError(
            f"non-finite loss at step {self.step_count} ({reason})", snapshot_path=str(path)
        )

    def step(self, stage: str, k: int) -> dict:
        batch = self.train_batch.take(self._next_rows())
        lambdas, grl = self.coefficients(stage, k)
        weights = batch_weights(self.state, batch, self.plan)
        try:
            losses = compute_losses(self.state, self.config, batch, weights, stage, lambdas, grl)
        except NumericError as exc:
            self._abort(stage, str(exc))
        if not np.isfinite(losses.values["total"]):
            self._abort(stage, f"total={losses.values['total']}")

        params = list(self.state.named_parameters(STAGE_BLOCKS[stage]))
        self.state.zero_grad()
        grads_by_value = backward(losses.total)
        grads = {name: grads_by_value.get(v, np.zeros_like(v.data)) for name, v in params}
        if not all(np.all(np.isfinite(g)) for g in grads.values()):
            self._abort(stage, "non-finite gradient")
        self.adam.step([(n, v) for n, v in params if n not in SPARSE_PARAMETERS], grads)
        self.adagrad.step([(n, v) for n, v in params if n in SPARSE_PARAMETERS], grads)

        self.step_count += 1
        record = {
            "step": self.step_count,
            "stage": stage,
            **losses.values,
            **{f"lambda_{name}": value for name, value in lambdas.items()},
            "grl": grl,
        }
        if self.step_count % self.plan.eval_every == 0:
            record["auc"] = self.held_out_auc()
            self.auc_history.append(record["auc"])
            if stage == "warmup":
                self._warmup_aucs.append(record["auc"])
        self.log.append(record)
        if self.step_count % self.plan.log_every == 0:
            logger.info(
                kv(
                    step=self.step_count,
                    stage=stage,
                    main=losses.values["main"],
                    dml=losses.values["dml"],
                    adv=losses.values["adv"],
                    reg=losses.values["reg"],
                    ctr=losses.values["ctr"],
                )
            )
        return record

    def warmup_converged(self) -> bool:
        """Relative held-out AUC change below tolerance over two consecutive windows."""
        history = self._warmup_aucs
        if len(history) < 3 or not np.all(np.isfinite(history[-3:])):
            return False
        a, b, c = history[-3:]
        tol = self.plan.auc_tolerance
        return abs(b - a) / max(abs(a), 1e-12) < tol and abs(c - b) / max(abs(b), 1e-12) < tol

    def run(self) -> None:
        for stage, n in zip(STAGES, self.plan.stage_steps):
            if n == 0:
                continue
            if stage == "anneal" and self.plan.auto_balance:
                batches = [
                    self.train_batch.take(self._next_rows())
                    for _ in range(self.plan.calibration_batches)
                ]
                self.config = calibrate_coefficients(self.state, self.config, self.plan, batches)
                self.state.config = self.config
            logger.info("Stage %s: up to %d steps", stage, n)
            for k in range(n):
                self.step(stage, k)
                if stage == "warmup" and self.warmup_converged():
                    logger.info("Warm-up AUC stable after %d steps", k + 1)
                    break


def staged_train(
    dataset: SyntheticDataset,
    model_cfg: ModelConfig,
    plan: TrainPlan,
    log_path: Optional[Path] = None,
    snapshot_dir: Optional[Path] = None,
    config_hash: str = "",
    state: Optional[ModelState] = None,
) -> TrainResult:
    """Train a fresh (or given) state through warm-up, proxy co-training and annealing.

    Args:
        dataset: Episodes to train on; a user-level held-out split is kept for AUC tracking
        model_cfg: Network configuration (its ``seed`` drives init and batch order)
        plan: Stage lengths, batching and weighting
        log_path: Optional CSV sink for the TrainLog
        snapshot_dir: Where a diagnostic snapshot goes if training diverges
        config_hash: Experiment hash recorded in logs and snapshots
        state: Continue from this state instead of a fresh initialization

    Returns:
        TrainResult with the trained state and its log
    """
    train_eps, held_eps = dataset.split(plan.holdout_fraction)
    if not train_eps:
        raise ContractViolation("training split is empty")
    scm = dataset.config
    if state is None:
        state = init_state(model_cfg, scm.n_clusters, scm.d_x)
    train_batch = EpisodeBatch.from_episodes(train_eps, scm.n_clusters, scm.d_x)
    held_batch = EpisodeBatch.from_episodes(held_eps, scm.n_clusters, scm.d_x) if held_eps else None

    manifest = {
        "config_hash": config_hash,
        "seed": model_cfg.seed,
        "lr_dense": model_cfg.lr_dense,
        "lr_sparse": model_cfg.lr_sparse,
        "stage_steps": list(plan.stage_steps),
        "batch_size": plan.batch_size,
        "weighting": plan.weighting,
    }
    log = TrainLog(manifest, log_path)
    trainer = Trainer(state, plan, train_batch, held_batch, log, snapshot_dir, config_hash)
    trainer.run()
    logger.info(
        "Training finished: %s",
        kv(steps=trainer.step_count, auc=trainer.held_out_auc(), seed=model_cfg.seed),
    )
    return TrainResult(
        state=state,
        log=log,
        model_config=trainer.config,
        train=train_eps,
        held_out=held_eps,
        auc_history=trainer.auc_history,
    )
