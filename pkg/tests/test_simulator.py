import numpy as np
import pytest

from neutrality_kit.models import IndependentSitesModel, MarkovSitesModel
from neutrality_kit.simulator import (
    MAX_STUDY_CELLS,
    PitmanDrift,
    SimConfig,
    _sample_codes,
    clt_study,
    power_study,
    rate_study_k,
    rate_study_n,
    sample_alignment,
)
from neutrality_kit.streams import replicate_rng
from neutrality_kit.ustats import DegenerateKernelError, berry_esseen_rate

SKEWED = IndependentSitesModel.broadcast([0.5, 0.3, 0.15, 0.05], 40)
CHAIN = MarkovSitesModel.stationary([[0.9, 0.1], [0.3, 0.7]], 30)


# ----------------------------------------------------------------- sampling

def test_sampler_deterministic():
    a = sample_alignment(SKEWED, 12, seed=5)
    b = sample_alignment(SKEWED, 12, seed=5)
    assert np.array_equal(a.codes, b.codes)
    c = sample_alignment(SKEWED, 12, seed=6)
    assert not np.array_equal(a.codes, c.codes)


def test_degenerate_model_yields_identical_sequences():
    model = IndependentSitesModel([[0.0, 1.0, 0.0, 0.0]] * 7)
    aln = sample_alignment(model, 6, seed=1)
    assert (aln.codes == 1).all()


def test_markov_identity_transition_constant_rows():
    model = MarkovSitesModel([0.5, 0.5], np.eye(2), 20)
    aln = sample_alignment(model, 10, seed=2)
    assert (aln.codes == aln.codes[:, :1]).all()


def test_independent_sampler_matches_marginals():
    model = IndependentSitesModel([[0.5, 0.3, 0.15, 0.05], [0.1, 0.2, 0.3, 0.4]])
    draws = 100_000
    codes = _sample_codes(model, draws, replicate_rng(3, 0))
    for k in range(2):
        for c in range(4):
            p = model.marginal_matrix[k, c]
            freq = float((codes[:, k] == c).mean())
            se = np.sqrt(p * (1 - p) / draws)
            assert abs(freq - p) < 4 * se + 1e-12


def test_markov_sampler_matches_joint2():
    model = MarkovSitesModel.stationary([[0.85, 0.15], [0.25, 0.75]], 6)
    draws = 100_000
    codes = _sample_codes(model, draws, replicate_rng(4, 0))
    joint = model.joint2(1, 2)
    for c in range(2):
        for d in range(2):
            p = joint[c, d]
            freq = float(((codes[:, 1] == c) & (codes[:, 2] == d)).mean())
            se = np.sqrt(p * (1 - p) / draws)
            assert abs(freq - p) < 4 * se
    # a longer lag too
    joint04 = model.joint4(0, 1, 3, 5).sum(axis=(1, 2))
    freq = float(((codes[:, 0] == 0) & (codes[:, 5] == 0)).mean())
    p = joint04[0, 0]
    assert abs(freq - p) < 4 * np.sqrt(p * (1 - p) / draws)


# ------------------------------------------------------------------ studies

def test_clt_study_smoke_and_determinism():
    cfg = SimConfig(model=SKEWED, n=40, replicates=300, seed=1)
    res = clt_study(cfg)
    assert res.used == 300
    assert 0.0 <= res.ks_distance <= 1.0
    assert np.isfinite(res.values).all()
    res2 = clt_study(SimConfig(model=SKEWED, n=40, replicates=300, seed=1, threads=4))
    assert np.array_equal(res.values, res2.values)
    assert res.summary_dict() == res2.summary_dict()


def test_clt_study_rejects_degenerate_kernel():
    uniform = IndependentSitesModel.uniform(4, 10)
    with pytest.raises(DegenerateKernelError, match="degenerate kernel"):
        clt_study(SimConfig(model=uniform, n=20, replicates=10, seed=1))


def test_clt_study_standardization_near_normal():
    cfg = SimConfig(model=SKEWED, n=100, replicates=800, seed=2)
    res = clt_study(cfg)
    assert abs(res.mean) < 4 / np.sqrt(800) + 0.02
    assert abs(res.variance - 1.0) < 0.12
    assert res.ks_distance < 0.08


def test_clt_study_t_n_statistic():
    cfg = SimConfig(model=SKEWED, n=40, replicates=200, seed=3, statistic="t_n")
    res = clt_study(cfg)
    assert res.used == 200
    assert abs(res.mean) < 0.3


def test_clt_study_tajima_statistic_runs():
    cfg = SimConfig(model=SKEWED, n=20, replicates=150, seed=4, statistic="tajima_d")
    res = clt_study(cfg)
    assert res.used <= 150
    assert res.used > 100


def test_resource_cap():
    big = IndependentSitesModel.broadcast([0.9, 0.1], 1000)
    with pytest.raises(ValueError, match="cap"):
        SimConfig(model=big, n=2000, replicates=10_000, seed=1)
    assert MAX_STUDY_CELLS == 10**9


def test_rate_study_n_rows_and_bound_halving():
    model = IndependentSitesModel.broadcast([0.95, 0.05], 2)
    res = rate_study_n(model, [25, 100, 400], replicates=300, seed=5)
    ns = [r["n"] for r in res.rows]
    assert ns == [25, 100, 400]
    bounds = [r["bound"] for r in res.rows]
    assert bounds[1] == bounds[0] / 2  # n: 25 -> 100 quadruples
    assert bounds[2] == bounds[1] / 2
    assert res.rows[2]["ks"] < res.rows[0]["ks"]
    assert res.axis == "n"


def test_rate_study_k_rate_column():
    models = {k: MarkovSitesModel.stationary([[0.9, 0.1], [0.3, 0.7]], k) for k in (20, 80)}
    res = rate_study_k(models, n=30, replicates=150, seed=6)
    for row in res.rows:
        assert row["mixing"] == "exponential"
        assert row["rate"] == berry_esseen_rate(row["K"], "exponential").value
    ind_models = {k: IndependentSitesModel.broadcast([0.8, 0.2], k) for k in (20, 80)}
    res2 = rate_study_k(ind_models, n=30, replicates=150, seed=7)
    for row in res2.rows:
        assert row["rate"] == row["K"] ** -0.5


def test_power_study_size_and_power():
    null_m = IndependentSitesModel.broadcast([0.55, 0.25, 0.12, 0.08], 40)
    alt_m = IndependentSitesModel.broadcast([0.4, 0.3, 0.2, 0.1], 40)
    size = power_study(null_m, None, [40], alpha=0.05, replicates=400, seed=8)
    assert 0.01 <= size.rows[0]["rejection_rate"] <= 0.12
    power = power_study(null_m, alt_m, [20, 40], alpha=0.05, replicates=200, seed=9)
    rates = [r["rejection_rate"] for r in power.rows]
    assert rates[-1] > 0.9
    assert rates == sorted(rates)


def test_power_study_pitman_plateau():
    null_m = IndependentSitesModel.broadcast([0.55, 0.25, 0.12, 0.08], 40)
    alt_m = IndependentSitesModel.broadcast([0.4, 0.3, 0.2, 0.1], 40)
    drift = PitmanDrift(c=0.5)
    res = power_study(
        null_m, alt_m, [20, 80, 320], alpha=0.05, replicates=400, seed=10, drift=drift
    )
    rates = [r["rejection_rate"] for r in res.rows]
    gaps = [r["target_gap"] for r in res.rows]
    assert gaps == sorted(gaps, reverse=True)
    for rate in rates:
        assert 0.05 + 0.03 < rate < 0.95
    assert max(rates) - min(rates) < 0.15


def test_power_study_drift_exponent_one_decays_toward_alpha():
    null_m = IndependentSitesModel.broadcast([0.55, 0.25, 0.12, 0.08], 40)
    alt_m = IndependentSitesModel.broadcast([0.4, 0.3, 0.2, 0.1], 40)
    drift = PitmanDrift(c=20.0, exponent=1.0)
    res = power_study(
        null_m, alt_m, [20, 320], alpha=0.05, replicates=400, seed=11, drift=drift
    )
    assert res.rows[0]["rejection_rate"] > res.rows[1]["rejection_rate"]


def test_power_study_determinism_across_threads():
    null_m = IndependentSitesModel.broadcast([0.6, 0.2, 0.12, 0.08], 30)
    a = power_study(null_m, None, [20], alpha=0.05, replicates=100, seed=12, threads=1)
    b = power_study(null_m, None, [20], alpha=0.05, replicates=100, seed=12, threads=4)
    assert a.rows == b.rows
