"""Front-door plug-in estimators on a discretized (M, T', X) grid.

    P(Y | do(t)) = sum_m P(m | t) sum_{t', x} E[Y | m, t', x] P(t', x)

Tables are indexed ``f_hat[m, t', x]``, ``p_tx[t', x]`` and ``p_m_given_t[t, m]``.
Cells of ``f_hat`` without data hold NaN.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from joblib import Parallel, delayed
from sklearn.decomposition import PCA

from frontdoor_mta.errors import ContractViolation, PositivityError
from frontdoor_mta.scm.generator import rng_for
from frontdoor_mta.scm.models import Episode

logger = logging.getLogger(__name__)

MEDIATOR_BINS = 21
ROW_TOLERANCE = 1e-9


@dataclass(frozen=True)
class FrontdoorSample:
    """Per-unit discretized observations feeding the front-door tables."""

    t: np.ndarray  # treatment index
    m: np.ndarray  # mediator bin
    x: np.ndarray  # covariate bin
    y: np.ndarray  # outcome
    n_t: int
    n_m: int
    n_x: int

    def __len__(self) -> int:
        return len(self.y)

    def take(self, rows: np.ndarray) -> "FrontdoorSample":
        return FrontdoorSample(
            t=self.t[rows],
            m=self.m[rows],
            x=self.x[rows],
            y=self.y[rows],
            n_t=self.n_t,
            n_m=self.n_m,
            n_x=self.n_x,
        )


@dataclass(frozen=True)
class FrontdoorTables:
    f_hat: np.ndarray  # (n_m, n_t, n_x), NaN where empty
    p_tx: np.ndarray  # (n_t, n_x)
    p_m_given_t: np.ndarray  # (n_t, n_m), zero rows for unseen treatments
    counts: np.ndarray  # (n_m, n_t, n_x)


def quantile_bins(values: np.ndarray, n_bins: int) -> np.ndarray:
    """Equal-mass bin index in [0, n_bins) for each value; ties share a bin."""
    values = np.asarray(values, dtype=np.float64)
    cuts = np.quantile(values, np.linspace(0.0, 1.0, n_bins + 1)[1:-1])
    return np.searchsorted(cuts, values, side="right").astype(np.int64)


def mediator_coordinate(m_hat: np.ndarray) -> np.ndarray:
    """Projection of mediator vectors on their first principal direction."""
    m_hat = np.asarray(m_hat, dtype=np.float64)
    if m_hat.ndim == 1:
        return m_hat
    if m_hat.shape[1] == 1:
        return m_hat[:, 0]
    return PCA(n_components=1).fit_transform(m_hat)[:, 0]


def make_sample(
    t: Sequence[int],
    mediator: np.ndarray,
    x_coordinate: np.ndarray,
    y: Sequence[int],
    n_t: int,
    n_m: int = MEDIATOR_BINS,
    n_x: int = 2,
) -> FrontdoorSample:
    """Discretize raw mediator values and covariates into a :class:`FrontdoorSample`.

    Args:
        t: Treatment index per unit
        mediator: Mediator values (N,) or vectors (N, k), reduced by :func:`mediator_coordinate`
        x_coordinate: Scalar covariate summary per unit, cut into ``n_x`` quantile bins
        y: Binary outcome per unit
        n_t: Number of treatments
        n_m: Mediator bins
        n_x: Covariate bins
    """
    return FrontdoorSample(
        t=np.asarray(t, dtype=np.int64),
        m=quantile_bins(mediator_coordinate(mediator), n_m),
        x=quantile_bins(x_coordinate, n_x) if n_x > 1 else np.zeros(len(y), dtype=np.int64),
        y=np.asarray(y, dtype=np.float64),
        n_t=n_t,
        n_m=n_m,
        n_x=n_x,
    )


def build_frontdoor_tables(sample: FrontdoorSample) -> FrontdoorTables:
    """Plug-in tables from cell counts."""
    counts = np.zeros((sample.n_m, sample.n_t, sample.n_x))
    sums = np.zeros_like(counts)
    np.add.at(counts, (sample.m, sample.t, sample.x), 1.0)
    np.add.at(sums, (sample.m, sample.t, sample.x), sample.y)
    with np.errstate(invalid="ignore", divide="ignore"):
        f_hat = np.where(counts > 0, sums / counts, np.nan)

    n = len(sample)
    p_tx = counts.sum(axis=0) / n
    tm = counts.sum(axis=2).T  # (n_t, n_m)
    row = tm.sum(axis=1, keepdims=True)
    p_m_given_t = np.divide(tm, row, out=np.zeros_like(tm), where=row > 0)
    return FrontdoorTables(f_hat=f_hat, p_tx=p_tx, p_m_given_t=p_m_given_t, counts=counts)


def _restrict(p_tx: np.ndarray, support: Optional[np.ndarray]) -> np.ndarray:
    if support is None:
        return p_tx
    support = np.asarray(support, dtype=bool)
    if support.shape != p_tx.shape:
        raise ContractViolation(f"support mask {support.shape} does not match p_tx {p_tx.shape}")
    kept = np.where(support, p_tx, 0.0)
    mass = kept.sum()
    if mass <= 0:
        raise PositivityError("overlap support retains no probability mass")
    return kept / mass


def _check_row(p_m_given_t: np.ndarray, t: int) -> np.ndarray:
    if not 0 <= t < p_m_given_t.shape[0]:
        raise ContractViolation(f"treatment {t} outside [0, {p_m_given_t.shape[0]})")
    sums = p_m_given_t.sum(axis=1)
    bad = np.flatnonzero((sums > 0) & (np.abs(sums - 1.0) > ROW_TOLERANCE))
    if bad.size:
        raise ContractViolation(
            f"P(m|t) rows {bad.tolist()} sum to {sums[bad].tolist()}, expected 1"
        )
    if sums[t] == 0:
        raise PositivityError(f"treatment {t} never observed; P(m|t) undefined", cell=(t,))
    return p_m_given_t[t]


def frontdoor_do(
    f_hat: np.ndarray,
    p_m_given_t: np.ndarray,
    p_tx: np.ndarray,
    t: int,
    support: Optional[np.ndarray] = None,
) -> float:
    """Plug-in front-door value sum_{m,t',x} f(m,t',x) P(t',x) P(m|t).

    Args:
        f_hat: E[Y | m, t', x] table, NaN for empty cells
        p_m_given_t: Conditional mediator table, rows summing to 1
        p_tx: Joint treatment-covariate table
        t: Target treatment
        support: Optional (n_t, n_x) mask; p_tx is renormalized over retained cells

    Raises:
        ContractViolation: Unnormalized P(m|t) rows or mismatched shapes
        PositivityError: A needed f_hat cell has no data (``.cell`` = (m, t', x))
    """
    f_hat = np.asarray(f_hat, dtype=np.float64)
    p_tx = np.asarray(p_tx, dtype=np.float64)
    p_m_given_t = np.asarray(p_m_given_t, dtype=np.float64)
    if f_hat.shape != (p_m_given_t.shape[1], *p_tx.shape):
        raise ContractViolation(
            f"f_hat {f_hat.shape} incompatible with P(m|t) {p_m_given_t.shape} and "
            f"P(t',x) {p_tx.shape}"
        )
    if abs(p_tx.sum() - 1.0) > ROW_TOLERANCE:
        raise ContractViolation(f"P(t',x) sums to {p_tx.sum()}, expected 1")

    p_m = _check_row(p_m_given_t, t)
    weights = _restrict(p_tx, support)

    needed = (p_m[:, None, None] > 0) & (weights[None, :, :] > 0)
    missing = needed & np.isnan(f_hat)
    if missing.any():
        cell = tuple(int(i) for i in np.argwhere(missing)[0])
        raise PositivityError(f"no data in front-door cell (m, t', x) = {cell}", cell=cell)

    inner = np.where(needed, f_hat, 0.0) * weights[None, :, :]
    return float((p_m * inner.sum(axis=(1, 2))).sum())


def frontdoor_ipw_do(
    tables: FrontdoorTables,
    sample: FrontdoorSample,
    t: int,
    weights: np.ndarray,
    support: Optional[np.ndarray] = None,
) -> float:
    """Front-door value with an IPW (Hajek) estimate of P(m | t).

    P(m|t) is the weighted share of units with T=t falling in mediator bin m, using
    the unit weights 1/P(T=t | X). The inner sum over (t', x) is the empirical mean of
    f_hat(m, T_i, X_i) over units whose (T_i, X_i) cell is retained by ``support``.
    """
    weights = np.asarray(weights, dtype=np.float64)
    treated = sample.t == t
    if not treated.any():
        raise PositivityError(f"treatment {t} never observed", cell=(t,))
    mass = np.zeros(sample.n_m)
    np.add.at(mass, sample.m[treated], weights[treated])
    p_m = mass / mass.sum()

    keep = np.ones(len(sample), dtype=bool)
    if support is not None:
        keep = np.asarray(support, dtype=bool)[sample.t, sample.x]
        if not keep.any():
            raise PositivityError("overlap support retains no units")

    total = 0.0
    for m in np.flatnonzero(p_m > 0):
        values = tables.f_hat[m, sample.t[keep], sample.x[keep]]
        if np.isnan(values).any():
            i = int(np.flatnonzero(np.isnan(values))[0])
            cell = (int(m), int(sample.t[keep][i]), int(sample.x[keep][i]))
            raise PositivityError(f"no data in front-door cell (m, t', x) = {cell}", cell=cell)
        total += p_m[m] * values.mean()
    return float(total)


def naive_conditional(episodes: Sequence[Episode], cluster: int) -> float:
    """E[Y | cluster appears in T] without any adjustment."""
    ys = [ep.y for ep in episodes if cluster in ep.cluster_ids]
    if not ys:
        raise PositivityError(f"no episode contains cluster {cluster}", cell=(cluster,))
    return float(np.mean(ys))


def overlap_support(sample: FrontdoorSample, match: np.ndarray, top_k: int) -> np.ndarray:
    """Mask of the ``top_k`` (t', x) cells with the highest mean match score.

    Cells without units are never retained. Ties keep the lower flat cell index.
    """
    match = np.asarray(match, dtype=np.float64)
    totals = np.zeros((sample.n_t, sample.n_x))
    counts = np.zeros_like(totals)
    np.add.at(totals, (sample.t, sample.x), match)
    np.add.at(counts, (sample.t, sample.x), 1.0)
    means = np.where(counts > 0, totals / np.maximum(counts, 1.0), -np.inf).ravel()
    order = np.argsort(-means, kind="stable")
    chosen = [i for i in order[:top_k] if np.isfinite(means[i])]
    mask = np.zeros(means.size, dtype=bool)
    mask[chosen] = True
    return mask.reshape(totals.shape)


def _bootstrap_once(sample: FrontdoorSample, t: int, support, seed: int, index: int):
    rows = rng_for(seed, "bootstrap", index).integers(0, len(sample), size=len(sample))
    resampled = sample.take(rows)
    tables = build_frontdoor_tables(resampled)
    try:
        return frontdoor_do(tables.f_hat, tables.p_m_given_t, tables.p_tx, t, support)
    except PositivityError:
        return None


def bootstrap_frontdoor_variance(
    sample: FrontdoorSample,
    t: int,
    n_resamples: int = 200,
    seed: int = 0,
    support: Optional[np.ndarray] = None,
    workers: int = 1,
) -> tuple[float, int]:
    """Bootstrap variance of the plug-in front-door estimate.

    Resamples that leave a needed cell empty are dropped.

    Returns:
        (variance, number of resamples dropped)
    """
    if workers > 1:
        estimates = Parallel(n_jobs=workers)(
            delayed(_bootstrap_once)(sample, t, support, seed, i) for i in range(n_resamples)
        )
    else:
        estimates = [_bootstrap_once(sample, t, support, seed, i) for i in range(n_resamples)]
    kept = np.array([e for e in estimates if e is not None])
    dropped = n_resamples - len(kept)
    if dropped:
        logger.warning("Dropped %d of %d bootstrap resamples on empty cells", dropped, n_resamples)
    if len(kept) < 2:
        raise PositivityError("fewer than two bootstrap resamples had full support")
    return float(kept.var(ddof=1)), dropped
