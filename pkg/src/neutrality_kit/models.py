"""Probability models over alignment site columns.

A site model exposes per-site marginals and joint category distributions up
to order four; all moment formulas are driven through this interface. Two
families ship: fully independent sites, and a first-order Markov chain along
the sequence, the canonical example of mixing dependence between sites.
"""

import json
from pathlib import Path

import numpy as np

_PROB_TOL = 1e-12


class ModelSpecError(ValueError):
    """Invalid site-model specification."""


def _check_distribution(vec, what):
    vec = np.asarray(vec, dtype=np.float64)
    if vec.ndim != 1:
        raise ModelSpecError(f"{what} must be a probability vector")
    if (vec < -_PROB_TOL).any() or (vec > 1 + _PROB_TOL).any():
        raise ModelSpecError(f"{what} entries must lie in [0, 1]")
    if abs(float(vec.sum()) - 1.0) > _PROB_TOL:
        raise ModelSpecError(f"{what} must sum to 1 (got {float(vec.sum())!r})")
    return vec


class SiteModel:
    """Interface: marginals plus order-2..4 joints over distinct sites.

    Site indices are 0-based. joint2(k, l)[c, d] is P(X_k = c, X_l = d), and
    similarly for higher orders; any ordering of distinct sites is accepted.
    """

    C: int
    K: int

    @property
    def marginal_matrix(self) -> np.ndarray:
        """(K, C) matrix of per-site category probabilities."""
        raise NotImplementedError

    def marginal(self, k: int) -> np.ndarray:
        return self.marginal_matrix[k]

    def _joint_sorted(self, sites: tuple) -> np.ndarray:
        raise NotImplementedError

    def _joint(self, sites) -> np.ndarray:
        sites = tuple(int(s) for s in sites)
        if len(set(sites)) != len(sites):
            raise ValueError("joint distributions require distinct sites")
        for s in sites:
            if not 0 <= s < self.K:
                raise ValueError(f"site index {s} out of range")
        order = np.argsort(sites)
        tensor = self._joint_sorted(tuple(sites[i] for i in order))
        inverse = np.argsort(order)
        return np.transpose(tensor, axes=tuple(inverse))

    def joint2(self, k: int, l: int) -> np.ndarray:
        return self._joint((k, l))

    def joint3(self, k: int, l: int, m: int) -> np.ndarray:
        return self._joint((k, l, m))

    def joint4(self, k: int, l: int, m: int, p: int) -> np.ndarray:
        return self._joint((k, l, m, p))


class IndependentSitesModel(SiteModel):
    """Sites drawn independently from per-site marginals."""

    def __init__(self, marginals):
        marginals = np.asarray(marginals, dtype=np.float64)
        if marginals.ndim == 1:
            marginals = marginals[None, :]
        if marginals.ndim != 2:
            raise ModelSpecError("marginals must be a (K, C) matrix")
        for k in range(marginals.shape[0]):
            _check_distribution(marginals[k], f"marginal of site {k}")
        self._marginals = marginals
        self.K, self.C = marginals.shape

    @classmethod
    def uniform(cls, c: int, k: int) -> "IndependentSitesModel":
        return cls(np.full((k, c), 1.0 / c))

    @classmethod
    def broadcast(cls, row, k: int) -> "IndependentSitesModel":
        """Repeat one per-site distribution across k sites."""
        row = _check_distribution(row, "marginal row")
        return cls(np.tile(row, (k, 1)))

    @property
    def marginal_matrix(self) -> np.ndarray:
        return self._marginals

    def _joint_sorted(self, sites):
        vecs = [self._marginals[s] for s in sites]
        if len(vecs) == 2:
            return np.einsum("c,d->cd", *vecs)
        if len(vecs) == 3:
            return np.einsum("c,d,e->cde", *vecs)
        return np.einsum("c,d,e,f->cdef", *vecs)


class MarkovSitesModel(SiteModel):
    """First-order Markov chain along the sites.

    The site-k marginal is pi0 P^k; joints chain transition powers between
    the involved sites. When P is primitive the chain mixes and dependence
    between distant sites decays geometrically in their separation.
    """

    def __init__(self, pi0, transition, k: int):
        pi0 = _check_distribution(pi0, "initial distribution")
        transition = np.asarray(transition, dtype=np.float64)
        if transition.ndim != 2 or transition.shape[0] != transition.shape[1]:
            raise ModelSpecError("transition matrix must be square")
        if transition.shape[0] != pi0.shape[0]:
            raise ModelSpecError("transition size does not match initial distribution")
        for c in range(transition.shape[0]):
            _check_distribution(transition[c], f"transition row {c}")
        if k < 1:
            raise ModelSpecError("site count must be >= 1")
        self.pi0 = pi0
        self.transition = transition
        self.K = int(k)
        self.C = int(pi0.shape[0])
        self._powers = [np.eye(self.C)]
        marg = [pi0]
        for _ in range(self.K - 1):
            marg.append(marg[-1] @ transition)
        self._marginals = np.vstack(marg)

    @classmethod
    def stationary(cls, transition, k: int) -> "MarkovSitesModel":
        """Chain started from the stationary distribution of `transition`."""
        return cls(stationary_distribution(transition), transition, k)

    @property
    def marginal_matrix(self) -> np.ndarray:
        return self._marginals

    def _power(self, j: int) -> np.ndarray:
        while len(self._powers) <= j:
            self._powers.append(self._powers[-1] @ self.transition)
        return self._powers[j]

    def _joint_sorted(self, sites):
        first = sites[0]
        steps = [self._power(b - a) for a, b in zip(sites, sites[1:])]
        if len(sites) == 2:
            return np.einsum("c,cd->cd", self._marginals[first], steps[0])
        if len(sites) == 3:
            return np.einsum("c,cd,de->cde", self._marginals[first], *steps)
        return np.einsum("c,cd,de,ef->cdef", self._marginals[first], *steps)


def stationary_distribution(transition) -> np.ndarray:
    """Stationary distribution of a row-stochastic matrix."""
    transition = np.asarray(transition, dtype=np.float64)
    vals, vecs = np.linalg.eig(transition.T)
    idx = int(np.argmin(np.abs(vals - 1.0)))
    if abs(vals[idx] - 1.0) > 1e-8:
        raise ModelSpecError("transition matrix has no unit eigenvalue")
    pi = np.real(vecs[:, idx])
    pi = np.abs(pi)
    return pi / pi.sum()


def model_from_spec(spec) -> SiteModel:
    """Build a SiteModel from its JSON specification.

    Independent models:  {"type": "independent", "C": 4, "K": 30,
                          "marginals": [[...], ...]}  (one row broadcasts)
    Markov models:       {"type": "markov", "C": 4, "K": 30,
                          "pi0": [...], "P": [[...], ...]}
    A pi0 of "stationary" starts the chain at the stationary distribution.
    """
    if isinstance(spec, (str, Path)):
        with open(spec, "r", encoding="utf-8") as fh:
            spec = json.load(fh)
    if not isinstance(spec, dict):
        raise ModelSpecError("model spec must be a JSON object")
    kind = spec.get("type")
    if kind == "independent":
        if "marginals" not in spec:
            raise ModelSpecError("independent model spec needs 'marginals'")
        marginals = np.asarray(spec["marginals"], dtype=np.float64)
        if marginals.ndim == 1 or marginals.shape[0] == 1:
            if "K" not in spec:
                raise ModelSpecError("single-row marginals need an explicit 'K'")
            model = IndependentSitesModel.broadcast(marginals.reshape(-1), int(spec["K"]))
        else:
            model = IndependentSitesModel(marginals)
    elif kind == "markov":
        for key in ("P", "K"):
            if key not in spec:
                raise ModelSpecError(f"markov model spec needs '{key}'")
        pi0 = spec.get("pi0", "stationary")
        if isinstance(pi0, str):
            if pi0 != "stationary":
                raise ModelSpecError("pi0 must be a vector or 'stationary'")
            model = MarkovSitesModel.stationary(spec["P"], int(spec["K"]))
        else:
            model = MarkovSitesModel(pi0, spec["P"], int(spec["K"]))
    else:
        raise ModelSpecError("model spec 'type' must be 'independent' or 'markov'")
    if "C" in spec and int(spec["C"]) != model.C:
        raise ModelSpecError(f"spec says C={spec['C']} but model has C={model.C}")
    if "K" in spec and int(spec["K"]) != model.K:
        raise ModelSpecError(f"spec says K={spec['K']} but model has K={model.K}")
    return model


def model_to_spec(model: SiteModel) -> dict:
    """Serializable specification of a model (inverse of model_from_spec)."""
    if isinstance(model, IndependentSitesModel):
        return {
            "type": "independent",
            "C": model.C,
            "K": model.K,
            "marginals": model.marginal_matrix.tolist(),
        }
    if isinstance(model, MarkovSitesModel):
        return {
            "type": "markov",
            "C": model.C,
            "K": model.K,
            "pi0": model.pi0.tolist(),
            "P": model.transition.tolist(),
        }
    raise ModelSpecError(f"cannot serialize model of type {type(model).__name__}")
