"""Degree-2 U-statistic machinery for the sequence-mismatch kernel.

The kernel is the per-site mismatch fraction between two coded sequences;
averaged over all sequence pairs it gives the per-site-per-pair diversity,
whose model expectation, projection variance, higher moments, and normal-
approximation error bounds live here.

Sign convention, stated once and used everywhere: the first-order projection
is

    h1(x) = E[phi(x, X2)] - E[phi]

(conditional mean minus grand mean), so the decomposition
phi(x1, x2) = H + h1(x1) + h1(x2) + h2(x1, x2) holds identically and h2 is
conditionally centered. Some presentations write h1 with the opposite sign;
every even moment computed here is unaffected by that choice.
"""

from dataclasses import dataclass
from itertools import combinations
from math import comb, fsum, log, sqrt

import numpy as np

from .models import IndependentSitesModel, SiteModel

# The order-4 moment under general dependence sums over all distinct site
# 4-tuples; cost grows as K^4, so the general path is capped.
GENERAL_FOURTH_MOMENT_MAX_SITES = 64


class DegenerateKernelError(ValueError):
    """The projection variance is zero, so normal asymptotics do not apply."""


def mismatch_fraction(x1, x2) -> float:
    """Kernel value: fraction of positions at which two code vectors differ."""
    x1 = np.asarray(x1)
    x2 = np.asarray(x2)
    if x1.shape != x2.shape or x1.ndim != 1:
        raise ValueError("kernel needs two equal-length code vectors")
    return float((x1 != x2).sum()) / x1.shape[0]


def _observed_marginals(x, model: SiteModel) -> np.ndarray:
    x = np.asarray(x)
    if x.shape != (model.K,):
        raise ValueError("sequence length does not match model site count")
    return model.marginal_matrix[np.arange(model.K), x.astype(np.int64)]


def conditional_mean_mismatch(x, model: SiteModel) -> float:
    """E[phi(x, X2)] for a fixed first argument under the model."""
    return 1.0 - float(_observed_marginals(x, model).mean())


def expected_mismatch(model: SiteModel) -> float:
    """Model mean of the kernel: 1 - average sum of squared marginals."""
    m = model.marginal_matrix
    return 1.0 - float((m * m).sum(axis=1).mean())


def h1_projection(x, model: SiteModel) -> float:
    """First-order projection h1(x); zero-mean under the model."""
    return conditional_mean_mismatch(x, model) - expected_mismatch(model)


def h2_remainder(x1, x2, model: SiteModel) -> float:
    """Degenerate second-order remainder, evaluated from its explicit form.

    Algebraically equal to phi - H - h1(x1) - h1(x2); computing it from the
    expanded expression keeps the decomposition identity a real check rather
    than one true by construction.
    """
    m = model.marginal_matrix
    qbar = float((m * m).sum(axis=1).mean())
    p1 = float(_observed_marginals(x1, model).mean())
    p2 = float(_observed_marginals(x2, model).mean())
    return mismatch_fraction(x1, x2) - 1.0 + p1 + p2 - qbar


def _squared_marginal_sums(model: SiteModel) -> np.ndarray:
    m = model.marginal_matrix
    return (m * m).sum(axis=1)


def _centered_marginals(model: SiteModel) -> np.ndarray:
    """(K, C) matrix of per-site deviations marginal - sum(marginal^2)."""
    m = model.marginal_matrix
    return m - _squared_marginal_sums(model)[:, None]


def _site_projection_variances(model: SiteModel) -> np.ndarray:
    """Per-site variance of the centered marginal of the observed category.

    Uses the pairwise form sum_{c<d} m_c m_d (m_c - m_d)^2, which is exactly
    zero (in floating point, not just mathematically) for uniform and for
    degenerate site distributions.
    """
    m = model.marginal_matrix
    diff = m[:, :, None] - m[:, None, :]
    terms = m[:, :, None] * m[:, None, :] * diff * diff
    c = model.C
    iu = np.triu_indices(c, k=1)
    return terms[:, iu[0], iu[1]].sum(axis=1)


def sigma1_sq(model: SiteModel) -> float:
    """Projection variance Var(h1) under the model.

    For independent sites only per-site terms contribute; under dependence a
    covariance correction driven by the pairwise joints is added.
    """
    k = model.K
    diag = _site_projection_variances(model)
    if isinstance(model, IndependentSitesModel):
        return fsum(diag.tolist()) / (k * k)
    m = model.marginal_matrix
    terms = list(diag.tolist())
    for a in range(k):
        for b in range(a + 1, k):
            joint = model.joint2(a, b)
            indep = np.outer(m[a], m[b])
            terms.append(2.0 * float(((joint - indep) * indep).sum()))
    return fsum(terms) / (k * k)


def h1_fourth_moment(model: SiteModel) -> float:
    """E[h1^4] under the model.

    Independent sites use the closed two-term reduction; general dependence
    expands the fourth power of the site sum over all distinct index tuples
    with the multinomial coefficients (1, 4, 3, 6, 1), a pattern validated
    against exhaustive enumeration in the test suite.
    """
    k = model.K
    m = model.marginal_matrix
    ctr = _centered_marginals(model)
    m4 = (m * ctr**4).sum(axis=1)
    if isinstance(model, IndependentSitesModel):
        v2 = (m * ctr**2).sum(axis=1)
        total = fsum(m4.tolist()) + 3.0 * (fsum(v2.tolist()) ** 2 - fsum((v2 * v2).tolist()))
        return total / float(k) ** 4
    if k > GENERAL_FOURTH_MOMENT_MAX_SITES:
        raise ValueError(
            f"general fourth moment capped at K <= {GENERAL_FOURTH_MOMENT_MAX_SITES} sites"
        )
    terms = list(m4.tolist())
    for a in range(k):
        for b in range(a + 1, k):
            joint = model.joint2(a, b)
            ca, cb = ctr[a], ctr[b]
            terms.append(4.0 * float(ca**3 @ joint @ cb))
            terms.append(4.0 * float(ca @ joint @ cb**3))
            terms.append(6.0 * float(ca**2 @ joint @ cb**2))
    for a in range(k):
        others = [s for s in range(k) if s != a]
        for b, c in combinations(others, 2):
            joint = model.joint3(a, b, c)
            val = np.einsum("def,d,e,f->", joint, ctr[a] ** 2, ctr[b], ctr[c])
            terms.append(12.0 * float(val))
    for quad in combinations(range(k), 4):
        joint = model.joint4(*quad)
        val = np.einsum(
            "defg,d,e,f,g->", joint, ctr[quad[0]], ctr[quad[1]], ctr[quad[2]], ctr[quad[3]]
        )
        terms.append(24.0 * float(val))
    return fsum(terms) / float(k) ** 4


def _site_remainder_terms(model: SiteModel) -> np.ndarray:
    m = model.marginal_matrix
    q = _squared_marginal_sums(model)
    cubes = (m**3).sum(axis=1)
    return q * (1.0 - q) + 2.0 * q * q - 2.0 * cubes


def h2_second_moment(model: SiteModel) -> float:
    """E[h2^2] under the model.

    The cross-site contribution reduces to the squared deviation of each
    pairwise joint from independence; the printed linear correction terms
    cancel identically, so only sum((joint - outer)^2) remains.
    """
    k = model.K
    diag = _site_remainder_terms(model)
    if isinstance(model, IndependentSitesModel):
        return fsum(diag.tolist()) / (k * k)
    m = model.marginal_matrix
    terms = list(diag.tolist())
    for a in range(k):
        for b in range(a + 1, k):
            delta = model.joint2(a, b) - np.outer(m[a], m[b])
            terms.append(2.0 * float((delta * delta).sum()))
    return fsum(terms) / (k * k)


def diversity_variance(model: SiteModel, n: int) -> float:
    """Exact variance of the per-site-per-pair diversity of an n-sample.

    Var(U) = [2(n-2) sigma1^2 + Var(phi)] / C(n, 2), with
    Var(phi) = 2 sigma1^2 + E[h2^2].
    """
    if n < 2:
        raise ValueError("variance needs n >= 2")
    s1 = sigma1_sq(model)
    var_phi = 2.0 * s1 + h2_second_moment(model)
    return (2.0 * (n - 2) * s1 + var_phi) / comb(n, 2)


@dataclass(frozen=True)
class MomentSet:
    """Kernel mean and the projection moments used by the error bounds."""

    h_k: float
    sigma1_sq: float
    eh1_4: float
    eh2_2: float

    def as_dict(self) -> dict:
        return {
            "H_K": self.h_k,
            "sigma1_sq": self.sigma1_sq,
            "Eh1_4": self.eh1_4,
            "Eh2_2": self.eh2_2,
        }


def moment_set(model: SiteModel) -> MomentSet:
    return MomentSet(
        h_k=expected_mismatch(model),
        sigma1_sq=sigma1_sq(model),
        eh1_4=h1_fourth_moment(model),
        eh2_2=h2_second_moment(model),
    )


def berry_esseen_bound(model: SiteModel, n: int, constant: float = 1.0) -> float:
    """Normal-approximation error bound for the standardized diversity.

    constant * (sigma1^-3 E|h1|^3 + sigma1^-5/3 E|h2|^5/3) / sqrt(n), with
    the absolute moments bounded through the even ones:
    E|h1|^3 <= (E h1^4)^(3/4) and E|h2|^(5/3) <= (E h2^2)^(5/6).
    """
    s1sq = sigma1_sq(model)
    if s1sq <= 0.0:
        raise DegenerateKernelError("degenerate kernel: sigma1 = 0, bound undefined")
    e14 = h1_fourth_moment(model)
    e22 = h2_second_moment(model)
    prefactor = constant * (s1sq**-1.5 * e14**0.75 + s1sq ** (-5.0 / 6.0) * e22 ** (5.0 / 6.0))
    return prefactor / sqrt(n)


@dataclass(frozen=True)
class RateDescriptor:
    """Nominal convergence rate in the site count for one mixing regime."""

    mixing: str
    value: float | None
    formula: str
    log_base: str = "natural"


def berry_esseen_rate(k: int, mixing: str) -> RateDescriptor:
    """Nominal K-direction rate: K^-1/2 log K (exponential mixing), K^-1/2
    (independent sites), or an untyped 'slower than K^-1/2' marker
    (polynomial mixing). Logarithms are natural.
    """
    if k < 2:
        raise ValueError("rate descriptor needs K >= 2")
    if mixing == "independent":
        return RateDescriptor(mixing, k**-0.5, "K^(-1/2)")
    if mixing == "exponential":
        return RateDescriptor(mixing, k**-0.5 * log(k), "K^(-1/2) log K")
    if mixing == "polynomial":
        return RateDescriptor(mixing, None, "slower than K^(-1/2)")
    raise ValueError("mixing must be 'independent', 'exponential', or 'polynomial'")
