import math

import numpy as np
import pytest
from scipy import integrate

from cdrm.errors import DomainError, InfiniteQuantileError
from cdrm.margins import Exponential, Pareto, from_spec, mean, quantile, cdf

MARGINS = [Pareto(1 / 3), Pareto(1 / 5), Pareto(0.9), Exponential(1.0), Exponential(0.25)]


def test_pareto_examples():
    assert mean(Pareto(1 / 3)) == pytest.approx(1.5, abs=1e-15)
    assert mean(Pareto(1 / 5)) == pytest.approx(1.25, abs=1e-15)
    assert mean(Pareto(1 / 3)) + mean(Pareto(1 / 5)) - 2 == pytest.approx(0.75, abs=1e-15)
    assert quantile(Pareto(1 / 3), 0.0) == 1.0
    assert cdf(Pareto(1 / 5), 32.0) == pytest.approx(1 - 1 / 33554432, abs=1e-16)
    assert Pareto(1 / 5).sf(32.0) == pytest.approx(2.0**-25, rel=1e-14)


def test_pareto_errors():
    with pytest.raises(InfiniteQuantileError):
        Pareto(0.5).quantile(1.0)
    with pytest.raises(DomainError):
        Pareto(1.5)
    with pytest.raises(DomainError):
        Exponential(-1.0)
    with pytest.raises(DomainError):
        Pareto(0.5).quantile(-0.1)


@pytest.mark.parametrize("m", MARGINS, ids=repr)
def test_cdf_basics(m):
    assert m.cdf(m.support_inf) == 0.0
    grid = np.linspace(m.support_inf - 1, m.quantile(0.999), 500)
    assert np.all(np.diff(m.cdf(grid)) >= 0)
    assert m.cdf(m.quantile(1 - 1e-9)) == pytest.approx(1.0, abs=1e-8)
    x = np.linspace(m.support_inf + 1e-3, m.quantile(0.99), 50)
    assert np.allclose(m.cdf(x) + m.sf(x), 1.0, atol=1e-15)


@pytest.mark.parametrize("m", MARGINS, ids=repr)
def test_round_trips(m):
    u = np.arange(1, 100) / 100
    assert np.max(np.abs(m.cdf(m.quantile(u)) - u)) <= 1e-9
    x = np.linspace(m.support_inf + 0.01, m.quantile(0.99), 100)
    assert np.max(np.abs(m.quantile(m.cdf(x)) - x) / x) <= 1e-9
    s = np.logspace(-30, -1, 20)
    assert np.allclose(m.sf(m.quantile_sf(s)), s, rtol=1e-12)


@pytest.mark.parametrize("m", MARGINS, ids=repr)
def test_mean_by_quadrature(m):
    tail, _ = integrate.quad(lambda x: float(m.sf(x)), m.support_inf, np.inf, epsabs=1e-12, limit=200)
    assert m.mean() == pytest.approx(m.support_inf + tail, abs=1e-6)


@pytest.mark.parametrize("m", MARGINS, ids=repr)
def test_pdf_integrates_cdf(m):
    x = m.quantile(0.7)
    val, _ = integrate.quad(lambda t: float(m.pdf(t)), m.support_inf, x, epsabs=1e-13)
    assert val == pytest.approx(0.7, abs=1e-10)


def test_from_spec():
    assert from_spec({"family": "pareto", "alpha": 0.2}) == Pareto(0.2)
    assert from_spec(Exponential(2.0).to_spec()) == Exponential(2.0)
    with pytest.raises(DomainError):
        from_spec({"family": "pareto", "alpha": 0.2, "scale": 1})
    with pytest.raises(DomainError):
        from_spec({"family": "lognormal", "mu": 0})
    assert math.isinf(Exponential(1).tail_index) and Pareto(0.25).tail_index == 4.0
