"""The neutrality test proper: null value, jackknife variance, test statistic,
p-values, frequency-shift diagnostic, bootstrap baseline, and the composed
analysis report.
"""

import json
import math
from dataclasses import dataclass
from enum import Enum
from math import comb, erfc, sqrt

import numpy as np

from . import __version__
from .alignment import (
    Alignment,
    AlignmentError,
    classify_sites,
    pair_diff_counts,
    pooled_frequencies,
    sitewise_frequencies,
)
from .estimators import (
    T2Mode,
    harmonic_coefficients,
    nucleotide_diversity,
    singleton_theta,
    tajima_d,
    tajima_d1_variance,
    watterson_theta,
)
from .models import SiteModel
from .streams import map_replicates, replicate_rng
from .ustats import diversity_variance


class Theta0Mode(str, Enum):
    POOLED = "pooled_non_segregating"
    SITEWISE = "sitewise_non_segregating"
    USER = "user_supplied"


@dataclass(frozen=True)
class NullSpec:
    """Null expected diversity theta0 with its provenance."""

    theta0: float
    mode: str
    source_site_count: int
    warning: str | None = None


def gini_simpson(freqs) -> float:
    """1 - sum of squared frequencies: probability two draws differ."""
    freqs = np.asarray(freqs, dtype=np.float64)
    return 1.0 - float((freqs * freqs).sum())


def null_expectation(aln: Alignment, mode=Theta0Mode.POOLED, value: float | None = None) -> NullSpec:
    """Null value theta0 for the test.

    pooled_non_segregating (default): Gini-Simpson index of the category
    frequencies pooled over all non-segregating columns. sitewise_non_
    segregating evaluates the per-site form literally, which is identically 0
    under plug-in frequencies (every non-segregating column is degenerate)
    and is kept only as a documented mode. user_supplied passes `value`
    through.
    """
    mode = Theta0Mode(mode)
    if mode is Theta0Mode.USER:
        if value is None:
            raise ValueError("user_supplied theta0 needs a value")
        value = float(value)
        if not 0.0 <= value <= 1.0:
            raise ValueError("theta0 must lie in [0, 1]")
        return NullSpec(theta0=value, mode=mode.value, source_site_count=0)
    cls = classify_sites(aln)
    nonseg = cls.non_segregating_mask
    count = int(nonseg.sum())
    if count == 0:
        raise AlignmentError(
            "no non-segregating sites: data-driven theta0 unavailable"
        )
    if mode is Theta0Mode.POOLED:
        theta0 = gini_simpson(pooled_frequencies(aln, nonseg))
        return NullSpec(theta0=theta0, mode=mode.value, source_site_count=count)
    freqs = sitewise_frequencies(aln, nonseg)
    theta0 = 1.0 - float((freqs * freqs).sum(axis=1).mean())
    return NullSpec(
        theta0=theta0,
        mode=mode.value,
        source_site_count=count,
        warning=(
            "sitewise plug-in frequencies are degenerate on non-segregating "
            "columns, so this mode yields 0 by construction"
        ),
    )


@dataclass(frozen=True)
class FrequencyShift:
    """Pooled-diversity difference between segregating and non-segregating sites."""

    value: float
    seg_gini: float
    nonseg_gini: float
    seg_frequencies: tuple
    nonseg_frequencies: tuple
    direction: str


def frequency_shift_from_vectors(seg_freqs, nonseg_freqs) -> float:
    """Gini-Simpson(segregating) - Gini-Simpson(non-segregating)."""
    return gini_simpson(seg_freqs) - gini_simpson(nonseg_freqs)


def frequency_shift(aln: Alignment) -> FrequencyShift:
    """Diagnostic comparing pooled frequencies of the two site groups.

    Negative values indicate a more concentrated distribution on segregating
    sites (the negative-selectivity direction); positive values a flatter one.
    """
    cls = classify_sites(aln)
    if cls.s == 0:
        raise AlignmentError("frequency shift undefined: no segregating sites")
    if int(cls.non_segregating_mask.sum()) == 0:
        raise AlignmentError("frequency shift undefined: no non-segregating sites")
    seg = pooled_frequencies(aln, cls.segregating_mask)
    nonseg = pooled_frequencies(aln, cls.non_segregating_mask)
    g_seg = gini_simpson(seg)
    g_non = gini_simpson(nonseg)
    value = g_seg - g_non
    if value < 0:
        direction = "negative-selectivity"
    elif value > 0:
        direction = "positive-selectivity"
    else:
        direction = "none"
    return FrequencyShift(
        value=value,
        seg_gini=g_seg,
        nonseg_gini=g_non,
        seg_frequencies=tuple(float(f) for f in seg),
        nonseg_frequencies=tuple(float(f) for f in nonseg),
        direction=direction,
    )


def pair_mismatch_counts(aln: Alignment) -> np.ndarray:
    """(n, n) integer matrix of pairwise site-difference counts (0 diagonal)."""
    return _diff_matrix(aln.codes)


def _diff_matrix(codes: np.ndarray) -> np.ndarray:
    return (codes[:, None, :] != codes[None, :, :]).sum(axis=2, dtype=np.int64)


@dataclass(frozen=True)
class JackknifeEstimate:
    """Jackknife variance of the per-site-per-pair diversity.

    `value` is the closed-form combinatorial estimate built from the
    coincidence-stratified kernel product sums S_c; `oracle_value` recomputes
    the same target through delete-one pseudo-values. The two agree up to
    rounding; both are reported. S_c sums are kept in integer difference-count
    units (divide by K^2 for kernel units).
    """

    value: float
    oracle_value: float
    s_counts: tuple
    n: int
    k: int
    m: int = 2

    @property
    def relative_deviation(self) -> float:
        scale = max(abs(self.value), abs(self.oracle_value), 1e-300)
        return abs(self.value - self.oracle_value) / scale

    @property
    def flagged_negative(self) -> bool:
        return self.value < 0.0


def jackknife_diversity_variance(aln: Alignment) -> JackknifeEstimate:
    """Jackknife variance estimate for the per-site-per-pair diversity.

    Needs n >= 5 so that disjoint pair resamples (c = 0) exist. Cost is
    O(n^2 K) for the pairwise counts plus O(n^2) for the strata sums; no
    4-tuple enumeration is performed.
    """
    if aln.n < 5:
        raise ValueError("jackknife variance needs n >= 5")
    return _jackknife_from_diffs(_diff_matrix(aln.codes), aln.num_sites)


def _jackknife_from_diffs(diffs: np.ndarray, k: int) -> JackknifeEstimate:
    n = diffs.shape[0]
    m = 2
    iu = np.triu_indices(n, k=1)
    pair_d = diffs[iu].astype(object)
    total = int(pair_d.sum())
    s2 = int((pair_d * pair_d).sum())
    rows = diffs.sum(axis=1).astype(object)
    s1 = int((rows * rows).sum()) - 2 * s2
    s0 = total * total - s1 - s2
    weighted = (2 * n - m * m) * s2 + (n - m * m) * s1 - m * m * s0
    denom = n * n * comb(n - 1, m) ** 2 * k * k
    value = (n - 1) * weighted / denom

    pairs = comb(n, 2)
    u = total / (pairs * k)
    row_f = diffs.sum(axis=1) / k
    u_minus = (total / k - row_f) / comb(n - 1, 2)
    pseudo = n * u - (n - 1) * u_minus
    centered = pseudo - pseudo.mean()
    oracle = float((centered * centered).sum()) / ((n - 1) * n)

    return JackknifeEstimate(
        value=float(value),
        oracle_value=oracle,
        s_counts=(s0, s1, s2),
        n=n,
        k=k,
    )


def normal_pvalue(t: float, sided: str = "two") -> float:
    """Standard normal tail probability of the observed statistic.

    left = P(Z <= t), right = P(Z >= t), two = 2 min(left, right) capped at 1.
    Evaluated through erfc, accurate to full double precision over the whole
    representable range; tails underflow to exactly 0 for |t| beyond about 38.
    """
    if not math.isfinite(t):
        raise ValueError("test statistic must be finite")
    if sided == "left":
        return 0.5 * erfc(-t / sqrt(2.0))
    if sided == "right":
        return 0.5 * erfc(t / sqrt(2.0))
    if sided == "two":
        left = 0.5 * erfc(-t / sqrt(2.0))
        right = 0.5 * erfc(t / sqrt(2.0))
        return min(1.0, 2.0 * min(left, right))
    raise ValueError("sided must be 'left', 'right', or 'two'")


@dataclass(frozen=True)
class TnResult:
    """Standardized neutrality statistic and its ingredients.

    t_n = sqrt(nK) (T2 - theta0) / sqrt(var_t2_scaled), where var_t2_scaled =
    nK * Var(T2) is the variance of sqrt(nK) T2. The scaling makes the
    statistic asymptotically standard normal; with the plain variance of T2
    under the root the sqrt(nK) prefactor would be double-counted.
    """

    t_n: float
    t2: float
    theta0: float
    n: int
    k_used: int
    var_t2: float
    var_t2_scaled: float
    variance_source: str
    jackknife: JackknifeEstimate | None = None


def neutrality_test(aln: Alignment, null: NullSpec, variance="jackknife") -> TnResult:
    """Compute the standardized neutrality statistic.

    Args:
        aln: alignment view to test (already restricted if a segregating-only
            analysis is wanted); K is its kept-site count.
        null: NullSpec with theta0.
        variance: "jackknife" (default), a SiteModel (model-implied exact
            variance), or a precomputed Var(T2) float.

    Raises:
        ValueError: when the variance is not strictly positive (monomorphic
            or otherwise degenerate data).
    """
    t2 = nucleotide_diversity(aln, T2Mode.PER_SITE_PER_PAIR)
    n, k = aln.n, aln.num_sites
    jack = None
    if isinstance(variance, str) and variance == "jackknife":
        jack = jackknife_diversity_variance(aln)
        var_t2 = jack.value
        source = "jackknife"
    elif isinstance(variance, SiteModel):
        if variance.K != k:
            raise ValueError("variance model site count does not match alignment")
        var_t2 = diversity_variance(variance, n)
        source = "model"
    else:
        var_t2 = float(variance)
        source = "supplied"
    if not var_t2 > 0.0:
        raise ValueError(
            "test undefined: variance of the diversity is not positive"
        )
    var_scaled = n * k * var_t2
    t_n = sqrt(n * k) * (t2 - null.theta0) / sqrt(var_scaled)
    return TnResult(
        t_n=t_n,
        t2=t2,
        theta0=null.theta0,
        n=n,
        k_used=k,
        var_t2=var_t2,
        var_t2_scaled=var_scaled,
        variance_source=source,
        jackknife=jack,
    )


@dataclass(frozen=True)
class BootstrapResult:
    """Site-column bootstrap p-value for Tajima's D."""

    p_value: float
    b: int
    used: int
    degenerate: bool
    center: float | None
    seed: int
    scheme: str = "site-column"


def bootstrap_tajima_pvalue(aln: Alignment, b: int, seed: int, threads: int = 1) -> BootstrapResult:
    """Two-sided bootstrap p-value for Tajima's D.

    Scheme: resample the K site columns with replacement (n fixed) and
    recompute D per replicate. The replicate values are recentered at the
    bootstrap mean so that they mimic the null (D = 0) distribution, and the
    p-value is the fraction of recentered replicates at least as extreme as
    the observed D. Replicates whose resample has no segregating site are
    dropped from the denominator. Deterministic for a fixed seed; replicate r
    draws from the stream keyed (seed, r).
    """
    if b < 100:
        raise ValueError("bootstrap needs B >= 100")
    observed = tajima_d(aln)
    if not observed.defined:
        raise ValueError("bootstrap undefined: Tajima's D undefined on input")
    cls = classify_sites(aln)
    n, k = aln.n, aln.num_sites
    h = harmonic_coefficients(n)
    diffs = pair_diff_counts(aln).astype(np.float64)
    seg = cls.segregating_mask.astype(np.int64)
    pairs = comb(n, 2)

    def one(r: int) -> float:
        rng = replicate_rng(seed, r)
        idx = rng.integers(0, k, size=k)
        s_b = int(seg[idx].sum())
        if s_b == 0:
            return math.nan
        t1_b = s_b / h.a_n
        t2_b = float(diffs[idx].sum()) / pairs
        theta_sq_b = s_b * (s_b - 1) / (h.a_n**2 + h.b_n)
        var_b = tajima_d1_variance(t1_b, theta_sq_b, n)
        if var_b <= 0:
            return math.nan
        return (t2_b - t1_b) / sqrt(var_b)

    values = np.asarray(map_replicates(one, b, threads), dtype=np.float64)
    defined = values[np.isfinite(values)]
    used = int(defined.size)
    if used == 0:
        return BootstrapResult(
            p_value=1.0, b=b, used=0, degenerate=True, center=None, seed=seed
        )
    if float(defined.max() - defined.min()) == 0.0:
        return BootstrapResult(
            p_value=1.0, b=b, used=used, degenerate=True,
            center=float(defined.mean()), seed=seed,
        )
    center = float(defined.mean())
    p = float((np.abs(defined - center) >= abs(observed.d)).mean())
    return BootstrapResult(
        p_value=p, b=b, used=used, degenerate=False, center=center, seed=seed
    )


@dataclass(frozen=True)
class AnalysisConfig:
    """Everything analyze() needs; echoed verbatim into report provenance."""

    t2_mode: str = T2Mode.PER_SITE_PER_PAIR.value
    theta0_mode: str = "pooled"
    theta0_value: float | None = None
    variance: str = "jackknife"  # "jackknife" or "model"
    model_spec: dict | None = None
    k_mode: str = "all"  # "all" or "segregating"
    sided: str = "two"
    alpha: float = 0.05
    bootstrap_b: int = 0
    seed: int = 0
    threads: int = 1
    theta_sq: str = "unbiased"

    def __post_init__(self):
        T2Mode(self.t2_mode)
        if self.theta0_mode not in ("pooled", "sitewise", "user"):
            raise ValueError("theta0_mode must be pooled, sitewise, or user")
        if self.theta0_mode == "user" and self.theta0_value is None:
            raise ValueError("theta0_mode=user needs theta0_value")
        if self.variance not in ("jackknife", "model"):
            raise ValueError("variance must be jackknife or model")
        if self.variance == "model" and self.model_spec is None:
            raise ValueError("variance=model needs model_spec")
        if self.k_mode not in ("all", "segregating"):
            raise ValueError("k_mode must be all or segregating")
        if self.sided not in ("left", "right", "two"):
            raise ValueError("sided must be left, right, or two")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.bootstrap_b and self.bootstrap_b < 100:
            raise ValueError("bootstrap_b must be 0 (off) or >= 100")

    def as_dict(self) -> dict:
        return {
            "t2_mode": self.t2_mode,
            "theta0_mode": self.theta0_mode,
            "theta0_value": self.theta0_value,
            "variance": self.variance,
            "model_spec": self.model_spec,
            "k_mode": self.k_mode,
            "sided": self.sided,
            "alpha": self.alpha,
            "bootstrap_b": self.bootstrap_b,
            "seed": self.seed,
            "threads": self.threads,
            "theta_sq": self.theta_sq,
        }


_THETA0_MODES = {
    "pooled": Theta0Mode.POOLED,
    "sitewise": Theta0Mode.SITEWISE,
    "user": Theta0Mode.USER,
}


def analyze(aln: Alignment, config: AnalysisConfig | None = None) -> dict:
    """Run the full analysis and return the report as an ordered dict.

    Every number in the report is traceable to a mode or flag recorded in the
    provenance block; identical input, config, and seed produce an identical
    report, including across thread counts.
    """
    config = config or AnalysisConfig()
    cls = classify_sites(aln)
    n = aln.n
    h = harmonic_coefficients(n)

    report: dict = {
        "schema_version": 1,
        "tool": {"name": "neutrality-kit", "version": __version__},
        "provenance": {
            "config": config.as_dict(),
            "n": n,
            "k_input": aln.num_sites + aln.masked_count,
            "k_kept": aln.num_sites,
            "masked_columns": aln.masked_count,
            "masked_positions": list(aln.masked_sites),
            "seed": config.seed,
        },
        "sites": {
            "S": cls.s,
            "S_star": cls.s_star,
            "singleton_positions": list(cls.singleton_positions),
            "class_counts": cls.class_counts(),
        },
    }

    taj = tajima_d(aln, theta_sq=config.theta_sq)
    t2_pss = None
    if cls.s > 0:
        t2_pss = nucleotide_diversity(aln, T2Mode.PER_SEGREGATING_SITE)
    report["estimators"] = {
        "S": cls.s,
        "S_star": cls.s_star,
        "a_n": h.a_n,
        "b_n": h.b_n,
        "T1": watterson_theta(cls.s, n),
        "T2_per_pair": taj.t2_per_pair,
        "T2_per_site_pair": nucleotide_diversity(aln, T2Mode.PER_SITE_PER_PAIR),
        "T2_per_segregating": t2_pss,
        "T3": singleton_theta(cls.s_star, n),
        "D1": taj.d1,
        "var_D1": taj.var_d1,
        "D": taj.d,
    }

    bootstrap_block = None
    if taj.defined and config.bootstrap_b >= 100:
        bs = bootstrap_tajima_pvalue(
            aln, config.bootstrap_b, config.seed, threads=config.threads
        )
        bootstrap_block = {
            "p_value": bs.p_value,
            "B": bs.b,
            "used": bs.used,
            "degenerate": bs.degenerate,
            "center": bs.center,
            "scheme": bs.scheme,
            "centering": "mean",
            "seed": bs.seed,
        }
    report["tajima"] = {
        "defined": taj.defined,
        "reason": taj.reason,
        "D": taj.d,
        "D1": taj.d1,
        "var_D1": taj.var_d1,
        "theta_sq_mode": taj.theta_sq_mode,
        "bootstrap": bootstrap_block,
    }

    null_spec: NullSpec | None = None
    null_reason = None
    try:
        if config.theta0_mode == "user":
            null_spec = null_expectation(aln, Theta0Mode.USER, value=config.theta0_value)
        else:
            null_spec = null_expectation(aln, _THETA0_MODES[config.theta0_mode])
    except (AlignmentError, ValueError) as exc:
        null_reason = str(exc)
    report["null_hypothesis"] = {
        "defined": null_spec is not None,
        "theta0": None if null_spec is None else null_spec.theta0,
        "mode": _THETA0_MODES[config.theta0_mode].value,
        "source_site_count": None if null_spec is None else null_spec.source_site_count,
        "warning": None if null_spec is None else null_spec.warning,
        "reason": null_reason,
    }

    test_block: dict = {
        "defined": False,
        "reason": None,
        "k_mode": config.k_mode,
        "k_used": None,
        "t2": None,
        "theta0": None,
        "variance_source": config.variance,
        "var_t2": None,
        "var_t2_scaled": None,
        "t_n": None,
        "sided": config.sided,
        "p_value": None,
        "alpha": config.alpha,
        "reject": None,
        "jackknife": None,
    }
    if cls.s == 0:
        test_block["reason"] = "monomorphic data: no segregating sites"
    elif null_spec is None:
        test_block["reason"] = f"theta0 unavailable: {null_reason}"
    else:
        try:
            view = aln
            if config.k_mode == "segregating":
                view = aln.subset_sites(cls.segregating_mask)
            if config.variance == "model":
                from .models import model_from_spec

                variance = model_from_spec(config.model_spec)
            else:
                variance = "jackknife"
            result = neutrality_test(view, null_spec, variance=variance)
            p = normal_pvalue(result.t_n, config.sided)
            test_block.update(
                defined=True,
                k_used=result.k_used,
                t2=result.t2,
                theta0=result.theta0,
                var_t2=result.var_t2,
                var_t2_scaled=result.var_t2_scaled,
                t_n=result.t_n,
                p_value=p,
                reject=bool(p < config.alpha),
            )
            if result.jackknife is not None:
                jk = result.jackknife
                test_block["jackknife"] = {
                    "value": jk.value,
                    "oracle_value": jk.oracle_value,
                    "relative_deviation": jk.relative_deviation,
                    "flagged_negative": jk.flagged_negative,
                    "m": jk.m,
                }
        except ValueError as exc:
            test_block["reason"] = str(exc)
    report["test"] = test_block

    try:
        shift = frequency_shift(aln)
        shift_block = {
            "defined": True,
            "reason": None,
            "value": shift.value,
            "seg_gini": shift.seg_gini,
            "nonseg_gini": shift.nonseg_gini,
            "seg_frequencies": list(shift.seg_frequencies),
            "nonseg_frequencies": list(shift.nonseg_frequencies),
            "direction": shift.direction,
        }
    except AlignmentError as exc:
        shift_block = {
            "defined": False,
            "reason": str(exc),
            "value": None,
            "seg_gini": None,
            "nonseg_gini": None,
            "seg_frequencies": None,
            "nonseg_frequencies": None,
            "direction": None,
        }
    report["diagnostics"] = {"frequency_shift": shift_block}
    return report


def report_json(report: dict) -> str:
    """Canonical JSON rendering (stable key order, trailing newline)."""
    return json.dumps(report, indent=2, allow_nan=False) + "\n"


_TSV_COLUMNS = [
    ("n", lambda r: r["provenance"]["n"]),
    ("k_kept", lambda r: r["provenance"]["k_kept"]),
    ("masked", lambda r: r["provenance"]["masked_columns"]),
    ("S", lambda r: r["estimators"]["S"]),
    ("S_star", lambda r: r["estimators"]["S_star"]),
    ("T1", lambda r: r["estimators"]["T1"]),
    ("T2_per_pair", lambda r: r["estimators"]["T2_per_pair"]),
    ("T2_per_site_pair", lambda r: r["estimators"]["T2_per_site_pair"]),
    ("T2_per_segregating", lambda r: r["estimators"]["T2_per_segregating"]),
    ("T3", lambda r: r["estimators"]["T3"]),
    ("D1", lambda r: r["estimators"]["D1"]),
    ("D", lambda r: r["estimators"]["D"]),
    ("theta0", lambda r: r["test"]["theta0"]),
    ("var_T2", lambda r: r["test"]["var_t2"]),
    ("t_n", lambda r: r["test"]["t_n"]),
    ("p_value", lambda r: r["test"]["p_value"]),
    ("frequency_shift", lambda r: r["diagnostics"]["frequency_shift"]["value"]),
]


def report_tsv(report: dict) -> str:
    """One-line TSV projection of the report for batch pipelines."""
    header = "\t".join(name for name, _ in _TSV_COLUMNS)
    cells = []
    for _, getter in _TSV_COLUMNS:
        value = getter(report)
        cells.append("NA" if value is None else repr(value) if isinstance(value, float) else str(value))
    return header + "\n" + "\t".join(cells) + "\n"
