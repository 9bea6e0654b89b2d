import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cdrm import aggregate as A
from cdrm import mc
from cdrm.copula import ArchimedeanCopula as AC, Clayton, Frank, Gumbel, Product, conditional_quantile, copula_cdf, distort
from cdrm.distortion import PowerCopula, PowerTail, WangNormal
from cdrm.errors import DomainError, SamplerError, UnsupportedDimensionError
from cdrm.margins import Exponential

from conftest import Square, pareto_model

GRID5 = np.array([0.1, 0.3, 0.5, 0.7, 0.9])


def test_determinism():
    m = pareto_model(delta=4.0)
    a = mc.sample_losses(m, 5000, seed=7)
    b = mc.sample_losses(m, 5000, seed=7)
    assert a == b
    assert a.model_hash == b.model_hash == mc.model_hash(m)
    assert a != mc.sample_losses(m, 5000, seed=8)
    assert a != mc.sample_losses(m, 5000, seed=7, stream=1)


def test_batch_invariants():
    b = mc.sample_losses(pareto_model(), 20_000, seed=1)
    assert b.uniforms.shape == (20_000, 2) and b.losses.shape == (20_000, 2)
    assert np.all((b.uniforms > 0) & (b.uniforms < 1))
    assert np.all(b.losses >= 1.0)
    assert np.array_equal(b.sums, b.losses[:, 0] + b.losses[:, 1])


def test_sample_size_validation():
    with pytest.raises(DomainError):
        mc.sample_copula(AC(Clayton(1.0)), 0, seed=1)
    with pytest.raises(DomainError):
        mc.sample_copula(AC(Clayton(1.0)), 2.5, seed=1)


@pytest.mark.parametrize("copula", [AC(Clayton(1.5)), AC(Frank(2.0)), AC(Gumbel(1.5))], ids=str)
def test_sampler_matches_copula_cdf(copula):
    b = mc.sample_copula(copula, 100_000, seed=2024)
    uu, vv = np.meshgrid(GRID5, GRID5, indexing="ij")
    pts = np.stack([uu.ravel(), vv.ravel()], axis=-1)
    emp = np.array([np.mean((b.uniforms[:, 0] <= u) & (b.uniforms[:, 1] <= v)) for u, v in pts])
    exact = np.asarray(copula_cdf(copula, pts))
    se = np.sqrt(exact * (1 - exact) / b.n)
    assert np.all(np.abs(emp - exact) <= 3 * se)


@pytest.mark.parametrize("theta,delta", [(1.5, 4.0), (2.0, 3.0), (0.5, 1.5)])
def test_distorted_sampling_is_bitwise_clayton(theta, delta):
    dc = distort(AC(Clayton(theta)), PowerCopula(1.0 / delta))
    a = mc.sample_copula(dc, 3000, seed=5)
    b = mc.sample_copula(AC(Clayton(theta / delta)), 3000, seed=5)
    assert np.array_equal(a.uniforms, b.uniforms)


@pytest.mark.parametrize("dimension", [3, 4])
@pytest.mark.parametrize("gen", [Clayton(1.5), Gumbel(1.5), Frank(2.0)], ids=str)
def test_frailty_sampler_higher_dimension(gen, dimension):
    c = AC(gen, dimension)
    b = mc.sample_copula(c, 100_000, seed=9)
    for u in ([0.3] * dimension, [0.6] * dimension, [0.8, 0.5] + [0.9] * (dimension - 2)):
        emp = np.mean(np.all(b.uniforms <= np.array(u), axis=1))
        exact = float(copula_cdf(c, np.array(u)))
        assert abs(emp - exact) <= 3.5 * math.sqrt(exact * (1 - exact) / b.n)


def test_frailty_unavailable_for_negative_frank():
    with pytest.raises(UnsupportedDimensionError):
        mc.sample_copula(AC(Frank(-2.0), 3), 100, seed=1)


def test_sampler_error_on_failed_inverse(monkeypatch):
    def broken(c, w, given_u, tol=1e-12):
        out = np.asarray(conditional_quantile(c, w, given_u, tol=tol), dtype=float).copy()
        out[3] = np.nan
        return out

    monkeypatch.setattr(mc, "conditional_quantile", broken)
    with pytest.raises(SamplerError, match="conditional inverse failed"):
        mc.sample_copula(AC(Frank(2.0)), 10, seed=1)


# ---------------------------------------------------------------- Kendall tau


def test_kendall_comonotone_and_ties():
    u = np.linspace(0.001, 0.999, 500)
    est = mc.empirical_kendall_tau(np.column_stack([u, u]))
    assert est.tau == 1.0 and est.ties == 0
    tied = np.column_stack([np.repeat(u[:250], 2), np.repeat(u[:250], 2)])
    assert mc.empirical_kendall_tau(tied).ties == 500
    with pytest.raises(DomainError):
        mc.empirical_kendall_tau(np.column_stack([u[:50], u[:50]]))


@pytest.mark.parametrize("copula,expected", [(AC(Product()), 0.0), (AC(Clayton(1.5)), 3 / 7),
                                             (AC(Gumbel(2.0)), 0.5)], ids=str)
def test_kendall_estimate_within_three_se(copula, expected):
    est = mc.empirical_kendall_tau(mc.sample_copula(copula, 20_000, seed=3))
    assert abs(est.tau - expected) <= 3 * est.stderr
    assert est.ties == 0


def test_kendall_distorted_batch():
    m = pareto_model(delta=4.0)
    est = mc.empirical_kendall_tau(mc.sample_losses(m, 20_000, seed=4, distorted=True))
    assert abs(est.tau - 0.375 / 2.375) <= 3 * est.stderr


def test_kendall_stderr_calibrated():
    # spread of independent estimates should match the reported standard error
    ests = [mc.empirical_kendall_tau(mc.sample_copula(AC(Clayton(1.5)), 2000, seed=s)) for s in range(40)]
    spread = np.std([e.tau for e in ests], ddof=1)
    reported = np.mean([e.stderr for e in ests])
    assert 0.7 < spread / reported < 1.3


def test_count_dominated_bruteforce():
    rng = np.random.default_rng(0)
    ry = rng.permutation(200) + 1
    brute = np.array([np.sum(ry[:i] < ry[i]) for i in range(200)])
    assert np.array_equal(mc._count_dominated(ry), brute)


# ---------------------------------------------------------------- empirical DRM


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=50))
def test_identity_distortion_gives_mean(xs):
    z = np.array(xs)
    assert mc.empirical_drm(z, PowerTail(1.0)) == pytest.approx(math.fsum(xs) / len(xs), rel=1e-12, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(c=st.floats(-100, 100), n=st.integers(1, 200), r=st.floats(0.1, 1.0))
def test_constant_sample(c, n, r):
    assert mc.empirical_drm(np.full(n, c), PowerTail(r)) == pytest.approx(c, rel=1e-12, abs=1e-12)


def test_l_weights_sum_to_one_and_favour_large_values():
    w = mc._l_weights(PowerTail(0.5), 1000)
    assert math.fsum(w) == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(w) >= 0)


@settings(max_examples=20, deadline=None)
@given(a=st.floats(0.1, 10.0), b=st.floats(-10.0, 10.0), seed=st.integers(0, 2**32))
def test_affine_equivariance_of_estimator(a, b, seed):
    z = np.random.default_rng(seed).pareto(3.0, 500) + 1.0
    psi = WangNormal(0.3)
    lhs = mc.empirical_drm(a * z + b, psi)
    rhs = a * mc.empirical_drm(z, psi) + b
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(rhs))


def test_coherence_probe_passes_for_concave_power():
    rep = mc.coherence_probe(PowerTail(0.8), pareto_model(), 50_000, seed=1, truncation=1e4)
    assert rep.passed
    assert rep["H1"].note.startswith("losses truncated")


def test_coherence_probe_flags_convex_control():
    rep = mc.coherence_probe(Square(), pareto_model(), 50_000, seed=1, truncation=1e4)
    assert not rep["H2"].passed
    assert not rep.passed


def test_estimator_consistency_rate():
    # with psi(s) = s**0.9 the estimator has finite variance on this model
    psi = PowerTail(0.9)
    m = pareto_model()
    sd_small = np.std(mc.replicate_drm(m, psi, 10_000, seed=100, replicates=20), ddof=1)
    sd_large = np.std(mc.replicate_drm(m, psi, 1_000_000, seed=100, replicates=20), ddof=1)
    assert 7 <= sd_small / sd_large <= 13


def test_monte_carlo_drm_matches_quadrature():
    psi = PowerTail(0.9)
    m = pareto_model(psi=psi)
    reps = mc.replicate_drm(m, psi, 200_000, seed=77, replicates=20)
    se = np.std(reps, ddof=1) / math.sqrt(reps.size)
    assert abs(reps.mean() - A.drm(m)) <= 3 * se


def test_exponential_model_drm():
    m = A.PortfolioModel((Exponential(1.0), Exponential(2.0)), AC(Frank(3.0)), PowerTail(0.7))
    reps = mc.replicate_drm(m, None, 20_000, seed=3, replicates=20)
    se = np.std(reps, ddof=1) / math.sqrt(reps.size)
    assert abs(reps.mean() - A.drm(m)) <= 3 * se


# ---------------------------------------------------------------- CSV export


def test_csv_round_trip(tmp_path):
    b = mc.sample_losses(pareto_model(), 500, seed=12)
    p = tmp_path / "batch.csv"
    mc.write_batch_csv(b, p, {"distorted": False})
    meta, cols, arr = mc.read_batch_csv(p)
    assert cols == ["u1", "u2", "x1", "x2", "z"]
    assert meta["seed"] == 12 and meta["n"] == 500 and meta["model_hash"] == b.model_hash
    assert meta["rng"] == mc.RNG_ALGORITHM
    assert np.array_equal(arr[:, :2], b.uniforms)
    assert np.array_equal(arr[:, 2:4], b.losses)
    assert np.array_equal(arr[:, 4], b.sums)


def test_csv_uniforms_only(tmp_path):
    b = mc.sample_copula(AC(Clayton(1.0), 3), 50, seed=1)
    p = tmp_path / "u.csv"
    mc.write_batch_csv(b, p)
    _, cols, arr = mc.read_batch_csv(p)
    assert cols == ["u1", "u2", "u3"] and np.array_equal(arr, b.uniforms)
