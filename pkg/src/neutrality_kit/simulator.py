"""Synthetic-alignment sampling and Monte Carlo studies.

Replicates are embarrassingly parallel: replicate r of a study draws from the
Philox stream keyed (seed, global replicate index) and results are reduced in
index order, so output is identical for any worker count.

Standardization note: the central-limit statistic is computed as
sqrt(nK) (T2 - H) / (2 sigma1K) with sigma1K = sqrt(K * Var h1). Because
Var h1 carries a 1/K^2 site normalization, the K factors cancel and this
equals sqrt(n) (T2 - H) / (2 sqrt(Var h1)); the per-site normalization is
what makes the sqrt(nK)-scaled display unit-variance.
"""

import math
from dataclasses import dataclass
from math import comb, sqrt

import numpy as np
from scipy import stats as sps
from scipy.optimize import brentq

from .alignment import Alignment, counts_from_codes
from .estimators import harmonic_coefficients, tajima_d1_variance
from .inference import _jackknife_from_diffs, normal_pvalue
from .models import IndependentSitesModel, MarkovSitesModel, SiteModel
from .streams import map_replicates, replicate_rng
from .ustats import (
    DegenerateKernelError,
    berry_esseen_bound,
    berry_esseen_rate,
    diversity_variance,
    expected_mismatch,
    sigma1_sq,
)

MAX_STUDY_CELLS = 10**9

STATISTICS = ("standardized_t2", "t_n", "tajima_d")


@dataclass(frozen=True)
class SimConfig:
    """One Monte Carlo run: model, sample size, replicate count, seed."""

    model: SiteModel
    n: int
    replicates: int
    seed: int
    statistic: str = "standardized_t2"
    theta0: float | None = None  # t_n only; defaults to the model mean
    threads: int = 1

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("need n >= 2")
        if self.replicates < 1:
            raise ValueError("need at least one replicate")
        if self.statistic not in STATISTICS:
            raise ValueError(f"statistic must be one of {STATISTICS}")
        _check_cells(self.n, self.model.K, self.replicates)


def _check_cells(n: int, k: int, replicates: int):
    cells = n * k * replicates
    if cells > MAX_STUDY_CELLS:
        raise ValueError(
            f"study size {cells} cells exceeds the cap of {MAX_STUDY_CELLS}; "
            "reduce n, K, or replicates"
        )


def _sample_codes(model: SiteModel, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n sequences from the model as an (n, K) uint8 code matrix."""
    k, c = model.K, model.C
    u = rng.random((n, k))
    if isinstance(model, MarkovSitesModel):
        codes = np.empty((n, k), dtype=np.uint8)
        cum0 = np.cumsum(model.pi0)
        state = np.minimum((u[:, 0, None] >= cum0[None, :]).sum(axis=1), c - 1)
        codes[:, 0] = state
        cum_rows = np.cumsum(model.transition, axis=1)
        for j in range(1, k):
            thresholds = cum_rows[state]
            state = np.minimum((u[:, j, None] >= thresholds).sum(axis=1), c - 1)
            codes[:, j] = state
        return codes
    cum = np.cumsum(model.marginal_matrix, axis=1)
    codes = (u[:, :, None] >= cum[None, :, :]).sum(axis=2)
    return np.minimum(codes, c - 1).astype(np.uint8)


def sample_alignment(model: SiteModel, n: int, seed: int, label_prefix: str = "seq") -> Alignment:
    """Sample an alignment of n sequences from the model, deterministically."""
    codes = _sample_codes(model, n, replicate_rng(seed, 0))
    labels = tuple(f"{label_prefix}{i + 1}" for i in range(n))
    return Alignment(labels=labels, codes=codes, site_index=np.arange(1, model.K + 1))


def _t2_from_codes(codes: np.ndarray) -> float:
    """Per-site-per-pair diversity straight from a code matrix."""
    n, k = codes.shape
    counts = counts_from_codes(codes)
    total = int((n * n - (counts * counts).sum(axis=1)).sum()) // 2
    return total / (comb(n, 2) * k)


def _diffs_from_codes(codes: np.ndarray) -> np.ndarray:
    return (codes[:, None, :] != codes[None, :, :]).sum(axis=2, dtype=np.int64)


def _tajima_from_codes(codes: np.ndarray) -> float:
    n, k = codes.shape
    counts = counts_from_codes(codes)
    pair_diffs = (n * n - (counts * counts).sum(axis=1)) // 2
    s = int((counts.max(axis=1) < n).sum())
    if s == 0:
        return math.nan
    h = harmonic_coefficients(n)
    t1 = s / h.a_n
    t2_pp = float(pair_diffs.sum()) / comb(n, 2)
    theta_sq = s * (s - 1) / (h.a_n**2 + h.b_n)
    var = tajima_d1_variance(t1, theta_sq, n)
    if var <= 0:
        return math.nan
    return (t2_pp - t1) / sqrt(var)


@dataclass(frozen=True)
class SimStudyResult:
    """Per-replicate statistic values plus distributional summaries."""

    statistic: str
    n: int
    k: int
    replicates: int
    used: int
    seed: int
    values: np.ndarray
    ks_distance: float
    mean: float
    variance: float
    skewness: float

    def summary_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "n": self.n,
            "K": self.k,
            "replicates": self.replicates,
            "used": self.used,
            "seed": self.seed,
            "ks_distance": self.ks_distance,
            "mean": self.mean,
            "variance": self.variance,
            "skewness": self.skewness,
        }


def _summarize(values: np.ndarray, statistic, n, k, replicates, seed) -> SimStudyResult:
    finite = values[np.isfinite(values)]
    if finite.size == 0:
        raise ValueError("no defined replicate values to summarize")
    ks = float(sps.kstest(finite, "norm").statistic)
    return SimStudyResult(
        statistic=statistic,
        n=n,
        k=k,
        replicates=replicates,
        used=int(finite.size),
        seed=seed,
        values=values,
        ks_distance=ks,
        mean=float(finite.mean()),
        variance=float(finite.var(ddof=1)),
        skewness=float(sps.skew(finite)),
    )


def clt_study(config: SimConfig, index_offset: int = 0) -> SimStudyResult:
    """Sample the configured statistic and summarize its distance to N(0, 1).

    For the standardized diversity the centering and scale come from the
    model's exact mean and projection variance; a zero projection variance is
    a degenerate kernel and is rejected up front.
    """
    model, n = config.model, config.n
    k = model.K
    if config.statistic == "standardized_t2":
        s1sq = sigma1_sq(model)
        if s1sq <= 0.0:
            raise DegenerateKernelError(
                "degenerate kernel: sigma1 = 0, standardized statistic undefined"
            )
        h = expected_mismatch(model)
        denom = 2.0 * sqrt(k * s1sq)

        def one(r: int) -> float:
            codes = _sample_codes(model, n, replicate_rng(config.seed, index_offset + r))
            return sqrt(n * k) * (_t2_from_codes(codes) - h) / denom

    elif config.statistic == "t_n":
        theta0 = config.theta0 if config.theta0 is not None else expected_mismatch(model)

        def one(r: int) -> float:
            codes = _sample_codes(model, n, replicate_rng(config.seed, index_offset + r))
            vhat = _jackknife_from_diffs(_diffs_from_codes(codes), k).value
            if vhat <= 0:
                return math.nan
            t2 = _t2_from_codes(codes)
            return sqrt(n * k) * (t2 - theta0) / sqrt(n * k * vhat)

    else:  # tajima_d

        def one(r: int) -> float:
            codes = _sample_codes(model, n, replicate_rng(config.seed, index_offset + r))
            return _tajima_from_codes(codes)

    values = np.asarray(map_replicates(one, config.replicates, config.threads))
    return _summarize(values, config.statistic, n, k, config.replicates, config.seed)


@dataclass(frozen=True)
class RateStudyResult:
    """Empirical KS distances along a grid, with the nominal rate column."""

    axis: str
    rows: tuple
    loglog_slope: float

    def summary_dict(self) -> dict:
        return {"axis": self.axis, "loglog_slope": self.loglog_slope, "rows": list(self.rows)}


def rate_study_n(
    model: SiteModel,
    n_grid,
    replicates: int,
    seed: int,
    constant: float = 1.0,
    threads: int = 1,
) -> RateStudyResult:
    """KS distance of the standardized diversity along an n grid, with the
    explicit error bound (at the given constant) alongside.
    """
    n_grid = [int(n) for n in n_grid]
    rows = []
    ks_values = []
    for gi, n in enumerate(n_grid):
        config = SimConfig(
            model=model, n=n, replicates=replicates, seed=seed, threads=threads
        )
        res = clt_study(config, index_offset=gi * replicates)
        bound = berry_esseen_bound(model, n, constant)
        rows.append({"n": n, "K": model.K, "ks": res.ks_distance, "bound": bound})
        ks_values.append(res.ks_distance)
    slope = float(np.polyfit(np.log(n_grid), np.log(ks_values), 1)[0])
    return RateStudyResult(axis="n", rows=tuple(rows), loglog_slope=slope)


def rate_study_k(
    models_by_k,
    n: int,
    replicates: int,
    seed: int,
    mixing: str | None = None,
    threads: int = 1,
) -> RateStudyResult:
    """KS distance along a K grid with the nominal K-direction rate column.

    `models_by_k` maps each grid K to its model; the mixing label defaults to
    'exponential' for Markov models and 'independent' otherwise.
    """
    items = sorted(models_by_k.items())
    rows = []
    ks_values = []
    k_values = []
    for gi, (k, model) in enumerate(items):
        if model.K != k:
            raise ValueError(f"model for grid point K={k} has K={model.K}")
        if mixing is None:
            label = "exponential" if isinstance(model, MarkovSitesModel) else "independent"
        else:
            label = mixing
        config = SimConfig(
            model=model, n=n, replicates=replicates, seed=seed, threads=threads
        )
        res = clt_study(config, index_offset=gi * replicates)
        rate = berry_esseen_rate(k, label)
        rows.append(
            {
                "n": n,
                "K": k,
                "ks": res.ks_distance,
                "rate": rate.value,
                "mixing": label,
                "rate_formula": rate.formula,
            }
        )
        ks_values.append(res.ks_distance)
        k_values.append(k)
    slope = float(np.polyfit(np.log(k_values), np.log(ks_values), 1)[0])
    return RateStudyResult(axis="K", rows=tuple(rows), loglog_slope=slope)


@dataclass(frozen=True)
class PitmanDrift:
    """Local-alternative mode: the mean gap shrinks as c / (nK)^exponent.

    The default exponent 1/2 is the rate at which the implemented statistic
    has nondegenerate limiting power (the rejection rate plateaus strictly
    between the size and one); exponent 1 shrinks faster and the rejection
    rate decays to the size.
    """

    c: float
    exponent: float = 0.5


@dataclass(frozen=True)
class PowerStudyResult:
    rows: tuple
    alpha: float
    sided: str
    replicates: int
    seed: int

    def summary_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "sided": self.sided,
            "replicates": self.replicates,
            "seed": self.seed,
            "rows": list(self.rows),
        }


def _interpolate_to_gap(null_model, direction_model, theta0: float, gap: float):
    """Independent-model mixture whose mean mismatch exceeds theta0 by `gap`."""
    if not (
        isinstance(null_model, IndependentSitesModel)
        and isinstance(direction_model, IndependentSitesModel)
    ):
        raise ValueError("drift interpolation needs independent-site models")
    m0 = null_model.marginal_matrix
    m1 = direction_model.marginal_matrix
    if m0.shape != m1.shape:
        raise ValueError("null and direction models must share (K, C)")

    def gap_at(t: float) -> float:
        m = (1.0 - t) * m0 + t * m1
        return 1.0 - float((m * m).sum(axis=1).mean()) - theta0 - gap

    if gap_at(1.0) < 0.0:
        raise ValueError("drift gap unreachable within the model segment")
    t_star = brentq(gap_at, 0.0, 1.0, xtol=1e-14)
    return IndependentSitesModel((1.0 - t_star) * m0 + t_star * m1)


def power_study(
    null_model: SiteModel,
    alt_model: SiteModel | None,
    n_grid,
    alpha: float,
    replicates: int,
    seed: int,
    sided: str = "right",
    variance: str = "jackknife",
    drift: PitmanDrift | None = None,
    threads: int = 1,
) -> PowerStudyResult:
    """Rejection rate of the neutrality test along an n grid.

    theta0 is the null model's exact mean mismatch; data are sampled from
    `alt_model` (fixed alternative), from the null itself (size check) when
    `alt_model` is None and no drift is given, or from a drifting alternative
    interpolated toward `alt_model` so the mean gap is c / (nK)^exponent.
    """
    if null_model.C < 2:
        raise ValueError("need at least two categories")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    k = null_model.K
    theta0 = expected_mismatch(null_model)
    rows = []
    for gi, n in enumerate((int(v) for v in n_grid)):
        _check_cells(n, k, replicates)
        target_gap = None
        if drift is not None:
            if alt_model is None:
                raise ValueError("drift mode needs a direction model in alt_model")
            target_gap = drift.c / (n * k) ** drift.exponent
            sampling = _interpolate_to_gap(null_model, alt_model, theta0, target_gap)
        elif alt_model is not None:
            sampling = alt_model
        else:
            sampling = null_model
        if sampling.K != k:
            raise ValueError("sampling model site count must match the null model")
        if variance == "model":
            var_value = diversity_variance(sampling, n)
        elif variance != "jackknife":
            raise ValueError("variance must be 'jackknife' or 'model'")

        def one(r: int) -> bool:
            codes = _sample_codes(sampling, n, replicate_rng(seed, gi * replicates + r))
            t2 = _t2_from_codes(codes)
            if variance == "jackknife":
                vhat = _jackknife_from_diffs(_diffs_from_codes(codes), k).value
            else:
                vhat = var_value
            if vhat <= 0:
                return False
            t_n = sqrt(n * k) * (t2 - theta0) / sqrt(n * k * vhat)
            return normal_pvalue(t_n, sided) < alpha

        rejections = map_replicates(one, replicates, threads)
        rows.append(
            {
                "n": n,
                "K": k,
                "rejection_rate": float(np.mean(rejections)),
                "theta0": theta0,
                "target_gap": target_gap,
            }
        )
    return PowerStudyResult(
        rows=tuple(rows), alpha=alpha, sided=sided, replicates=replicates, seed=seed
    )
