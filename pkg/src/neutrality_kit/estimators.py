"""Classical diversity estimators and the Tajima's D baseline test.

The pairwise-difference statistic is kept in three explicit normalizations,
all in routine use and differing only by exact integer factors:

  * per_site_per_pair   -- total differences / (K * nC2), in [0, 1]
  * per_pair            -- total differences / nC2, the mean pairwise count
  * per_segregating_site -- total differences / S

The neutrality test consumes the per-site-per-pair form; Tajima's D uses the
per-pair form.
"""

from dataclasses import dataclass
from enum import Enum
from math import comb, sqrt

import numpy as np

from .alignment import Alignment, classify_sites, pair_diff_counts


class T2Mode(str, Enum):
    PER_SITE_PER_PAIR = "per_site_per_pair"
    PER_PAIR = "per_pair"
    PER_SEGREGATING_SITE = "per_segregating_site"


def hamming_fraction(aln: Alignment, i: int, j: int) -> float:
    """Fraction of sites at which sequences i and j differ."""
    if i == j:
        raise ValueError("hamming_fraction is defined on distinct sequence pairs")
    xi, xj = aln.codes[i], aln.codes[j]
    return float((xi != xj).sum()) / aln.num_sites


def total_pair_differences(aln: Alignment) -> int:
    """Sum over sites of pairwise difference counts (an exact integer)."""
    return int(pair_diff_counts(aln).sum())


def nucleotide_diversity(aln: Alignment, mode: T2Mode = T2Mode.PER_SITE_PER_PAIR) -> float:
    """Pairwise nucleotide diversity under the requested normalization."""
    mode = T2Mode(mode)
    total = total_pair_differences(aln)
    pairs = comb(aln.n, 2)
    if mode is T2Mode.PER_PAIR:
        return total / pairs
    if mode is T2Mode.PER_SITE_PER_PAIR:
        return total / (pairs * aln.num_sites)
    s = classify_sites(aln).s
    if s == 0:
        raise ValueError("per_segregating_site diversity undefined: no segregating sites")
    return total / s


@dataclass(frozen=True)
class HarmonicCoefficients:
    a_n: float  # sum_{j<n} 1/j
    b_n: float  # sum_{j<n} 1/j^2


def harmonic_coefficients(n: int) -> HarmonicCoefficients:
    if n < 2:
        raise ValueError("harmonic coefficients need n >= 2")
    js = np.arange(1, n, dtype=np.float64)
    return HarmonicCoefficients(a_n=float((1.0 / js).sum()), b_n=float((1.0 / js**2).sum()))


def watterson_theta(s: int, n: int) -> float:
    """Segregating-site estimator S / a_n."""
    return s / harmonic_coefficients(n).a_n


def singleton_theta(s_star: int, n: int) -> float:
    """Singleton-count estimator, reported descriptively as (n-1)/n * S*.

    Convention note: this scaling is the one under which the singleton count
    estimates the same quantity as the other two estimators for large
    samples; the value never enters a test and is reported as-is.
    """
    if n < 2:
        raise ValueError("singleton estimator needs n >= 2")
    return (n - 1) / n * s_star


def tajima_d1_variance(theta_hat: float, theta_sq_hat: float, n: int) -> float:
    """Approximate variance of (per-pair diversity - Watterson) at plug-ins.

    Literal evaluation of the variance expansion
        Var(D1) ~= (n+1)/(3(n-1)) * theta
                   + [2(n^2+n+3)/(9n(n-1)) - (n+2)/(a_n n) + b_n/a_n^2] * theta^2
    with caller-supplied plug-ins for theta and theta^2.
    """
    if n < 2:
        raise ValueError("variance expansion needs n >= 2")
    if theta_hat < 0 or theta_sq_hat < 0:
        raise ValueError("plug-in values must be nonnegative")
    h = harmonic_coefficients(n)
    coef1 = (n + 1) / (3.0 * (n - 1))
    coef2 = (
        2.0 * (n * n + n + 3) / (9.0 * n * (n - 1))
        - (n + 2) / (h.a_n * n)
        + h.b_n / h.a_n**2
    )
    return coef1 * theta_hat + coef2 * theta_sq_hat


@dataclass(frozen=True)
class TajimaResult:
    """Tajima's D and its ingredients; undefined when no site segregates."""

    defined: bool
    s: int
    s_star: int
    t1: float
    t2_per_pair: float
    d1: float | None = None
    var_d1: float | None = None
    d: float | None = None
    theta_sq_mode: str = "unbiased"
    reason: str | None = None


def tajima_d(aln: Alignment, theta_sq: str = "unbiased") -> TajimaResult:
    """Tajima's D for an alignment.

    D1 is per-pair diversity minus the Watterson estimator; the variance uses
    plug-ins theta = S/a_n and, by default, the unbiased second-moment
    plug-in theta^2 = S(S-1)/(a_n^2 + b_n). `theta_sq="literal"` squares the
    theta plug-in instead.
    """
    if theta_sq not in ("unbiased", "literal"):
        raise ValueError("theta_sq must be 'unbiased' or 'literal'")
    cls = classify_sites(aln)
    n = aln.n
    h = harmonic_coefficients(n)
    t1 = cls.s / h.a_n
    t2_pp = nucleotide_diversity(aln, T2Mode.PER_PAIR)
    if cls.s == 0:
        return TajimaResult(
            defined=False, s=0, s_star=0, t1=t1, t2_per_pair=t2_pp,
            theta_sq_mode=theta_sq, reason="no polymorphism (S = 0)",
        )
    if theta_sq == "unbiased":
        theta_sq_hat = cls.s * (cls.s - 1) / (h.a_n**2 + h.b_n)
    else:
        theta_sq_hat = t1 * t1
    var_d1 = tajima_d1_variance(t1, theta_sq_hat, n)
    d1 = t2_pp - t1
    if var_d1 <= 0:
        return TajimaResult(
            defined=False, s=cls.s, s_star=cls.s_star, t1=t1, t2_per_pair=t2_pp,
            d1=d1, var_d1=var_d1, theta_sq_mode=theta_sq,
            reason="variance plug-in is nonpositive",
        )
    return TajimaResult(
        defined=True, s=cls.s, s_star=cls.s_star, t1=t1, t2_per_pair=t2_pp,
        d1=d1, var_d1=var_d1, d=d1 / sqrt(var_d1), theta_sq_mode=theta_sq,
    )
