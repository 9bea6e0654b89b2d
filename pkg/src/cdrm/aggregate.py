"""Distribution of a sum of two dependent losses and its distortion risk measures.

The sum's df is reduced to one-dimensional integrals over the second margin:

    G(t) = int_0^{F2(t - s1)} P(U1 <= F1(t - F2^-1(u2)) | U2 = u2) du2,

with ``s1`` the support infimum of the first margin.  Risk measures need the
survival function ``1 - G`` far into the tail, so that is computed separately
in loss space, where it never involves ``1 - (something close to 1)``.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal, Sequence

import numpy as np

from .copula import (
    ArchimedeanCopula,
    BOUNDARY_EPS,
    Product,
    conditional_cdf_any,
    conditional_sf,
    copula_density,
    distort,
    kendall_tau,
)
from .distortion import Distortion, LogCopula, PowerCopula, PowerTail, check_admissible
from .errors import CdrmError, DivergentMeasureError, DomainError, UnsupportedDimensionError
from .margins import Margin
from .quadrature import gk_adaptive

_U_MAX = 1.0 - 2.0**-53
_U_MIN = 1e-300
_MAX_DOUBLINGS = 400
_Z_CAP = 1e12
_SF_REL_WARN = 1e-8


@dataclass(frozen=True)
class QuadratureConfig:
    abs_tol: float = 1e-8
    rel_tol: float = 1e-8
    max_subdivisions: int = 2000
    tail_truncation_prob: float = 1e-10

    def __post_init__(self):
        for name in ("abs_tol", "rel_tol"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive", field=name)
        if int(self.max_subdivisions) != self.max_subdivisions or self.max_subdivisions < 1:
            raise DomainError("max_subdivisions must be a positive integer", field="max_subdivisions")
        if not (0.0 < self.tail_truncation_prob <= 1e-4):
            raise DomainError("tail_truncation_prob must lie in (0, 1e-4]", field="tail_truncation_prob")


@dataclass(frozen=True)
class PortfolioModel:
    """Margins joined by an Archimedean copula, optionally distorted, plus a tail distortion.

    A copula distortion is validated (and the distorted copula built) on
    construction, so an inadmissible ``copula_distortion`` fails early.
    """

    margins: tuple[Margin, ...]
    copula: ArchimedeanCopula
    tail_distortion: Distortion
    copula_distortion: Distortion | None = None

    def __post_init__(self):
        object.__setattr__(self, "margins", tuple(self.margins))
        if not self.margins:
            raise DomainError("at least one margin is required", field="margins")
        if len(self.margins) != self.copula.dimension:
            raise DomainError(f"{len(self.margins)} margins for a copula of dimension {self.copula.dimension}",
                              field="margins")
        if not isinstance(self.tail_distortion, Distortion):
            raise DomainError("tail_distortion must be a distortion function", field="tail_distortion")
        if self.copula_distortion is not None:
            _ = self.distorted_copula

    @cached_property
    def distorted_copula(self) -> ArchimedeanCopula:
        if self.copula_distortion is None:
            return self.copula
        return distort(self.copula, self.copula_distortion)

    @property
    def support_inf(self) -> float:
        return float(sum(m.support_inf for m in self.margins))

    def with_copula_distortion(self, gamma: Distortion | None) -> "PortfolioModel":
        return PortfolioModel(self.margins, self.copula, self.tail_distortion, gamma)

    def with_tail_distortion(self, psi: Distortion) -> "PortfolioModel":
        return PortfolioModel(self.margins, self.copula, psi, self.copula_distortion)

    def __getstate__(self):
        # keep pickles small; the distorted copula is rebuilt on demand
        state = dict(self.__dict__)
        state.pop("distorted_copula", None)
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)


@dataclass(frozen=True)
class RiskReport:
    expectation: float
    drm: float
    cdrm: float | None
    tau: float
    tau_distorted: float | None
    support_inf: float
    drm_excess: float
    cdrm_excess: float | None
    quadrature_err_est: float
    truncation_err_est: float

    @property
    def expectation_excess(self) -> float:
        return self.expectation - self.support_inf


@dataclass(frozen=True)
class MeasureResult:
    """A distortion integral ``int_0^inf psi(S(z)) dz`` with its error budget."""

    value: float
    support_inf: float
    quadrature_err_est: float
    truncation_err_est: float
    upper_limit: float

    @property
    def excess(self) -> float:
        return self.value - self.support_inf


def _bivariate(model: PortfolioModel) -> tuple[Margin, Margin]:
    if len(model.margins) != 2:
        raise UnsupportedDimensionError(
            f"deterministic quadrature handles two margins, got {len(model.margins)}; "
            "use the Monte Carlo oracle (cdrm.mc) for higher dimensions", field="margins")
    return model.margins


def _clip_u(u):
    return np.clip(u, _U_MIN, _U_MAX)


# ----------------------------------------------------------------------------
# df of the sum


def _cdf_conditional(c: ArchimedeanCopula, m1: Margin, m2: Margin, t: float, q: QuadratureConfig) -> float:
    hi = float(m2.cdf(t - m1.support_inf))

    def f(u2):
        x1 = t - m2.quantile(np.minimum(u2, hi))
        return conditional_cdf_any(c, m1.cdf(x1), _clip_u(u2))

    r = gk_adaptive(f, 0.0, hi, abs_tol=0.1 * q.abs_tol, rel_tol=1e-14, max_subdivisions=q.max_subdivisions)
    return r.value


def _density_inner(c: ArchimedeanCopula, u2: float, top: float, q: QuadratureConfig) -> float:
    if top <= 0.0:
        return 0.0
    lo_clip, hi_clip = BOUNDARY_EPS, 1.0 - BOUNDARY_EPS
    v = min(max(u2, lo_clip), hi_clip)
    r = gk_adaptive(lambda u1: copula_density(c, np.clip(u1, lo_clip, hi_clip), v), 0.0, top,
                    abs_tol=0.01 * q.abs_tol, rel_tol=1e-13, max_subdivisions=q.max_subdivisions)
    return r.value


def _cdf_density(c: ArchimedeanCopula, m1: Margin, m2: Margin, t: float, q: QuadratureConfig) -> float:
    hi = float(m2.cdf(t - m1.support_inf))

    def f(u2):
        tops = m1.cdf(t - m2.quantile(np.minimum(u2, hi)))
        return np.array([_density_inner(c, float(a), float(b), q) for a, b in zip(u2, tops)])

    r = gk_adaptive(f, 0.0, hi, abs_tol=0.1 * q.abs_tol, rel_tol=1e-14, max_subdivisions=q.max_subdivisions)
    return r.value


def _sum_cdf(c, model, t, q, method):
    m1, m2 = _bivariate(model)
    if method not in ("conditional", "density"):
        raise DomainError(f"unknown sum_cdf method {method!r}", field="method")
    out = []
    for ti in np.atleast_1d(np.asarray(t, dtype=float)).ravel():
        if ti <= model.support_inf:
            out.append(0.0)
        elif method == "conditional":
            out.append(_cdf_conditional(c, m1, m2, float(ti), q))
        else:
            out.append(_cdf_density(c, m1, m2, float(ti), q))
    arr = np.clip(np.array(out), 0.0, 1.0).reshape(np.shape(t))
    return arr if arr.ndim else float(arr)


def sum_cdf(model: PortfolioModel, t, q: QuadratureConfig | None = None,
            method: Literal["conditional", "density"] = "conditional"):
    """df of ``X1 + X2`` under the undistorted copula.

    ``method="conditional"`` integrates the conditional df over ``u2``;
    ``method="density"`` integrates the copula density over the same region
    in two nested adaptive passes (slower, used as a cross-check).
    """
    return _sum_cdf(model.copula, model, t, q or QuadratureConfig(), method)


def sum_cdf_distorted(model: PortfolioModel, t, q: QuadratureConfig | None = None,
                      method: Literal["conditional", "density"] = "conditional"):
    """df of ``X1 + X2`` when the copula is replaced by its distortion."""
    return _sum_cdf(model.distorted_copula, model, t, q or QuadratureConfig(), method)


def _inner_points(a: float, b: float, scale: float) -> list[float]:
    """Breakpoints clustering geometrically towards both ends of ``[a, b]``."""
    length = b - a
    pts = []
    d = length / 2.0
    while d > scale / 64.0 and len(pts) < 120:
        pts += [a + d, b - d]
        d /= 2.0
    return pts


def _sum_sf_scalar(c: ArchimedeanCopula, m1: Margin, m2: Margin, t: float, rel_tol: float, max_sub: int) -> float:
    s1, s2 = m1.support_inf, m2.support_inf
    if t <= s1 + s2:
        return 1.0
    a, b = s2, t - s1

    def f(x2):
        v_sf = m1.sf(t - x2)
        u2 = _clip_u(m2.cdf(x2))
        return conditional_sf(c, v_sf, u2) * m2.pdf(x2)

    scale = max(m1.mean() - s1, m2.mean() - s2, 1e-3)
    # only closed-form survival paths carry relative accuracy below ~1e-16
    stable = c.clayton_theta is not None or isinstance(c.generator, Product)
    r = gk_adaptive(f, a, b, abs_tol=1e-300 if stable else 1e-15, rel_tol=rel_tol, max_subdivisions=max_sub,
                    points=_inner_points(a, b, scale), warn=False)
    if not r.converged and r.error > _SF_REL_WARN * abs(r.value):
        warnings.warn(f"sum survival function at t={t:.6g} only accurate to {r.error:.3g}", RuntimeWarning,
                      stacklevel=3)
    return float(m2.sf(b)) + r.value


def sum_sf(model: PortfolioModel, t, q: QuadratureConfig | None = None, distorted: bool = False):
    """``P(X1 + X2 > t)`` computed with relative accuracy deep in the tail."""
    q = q or QuadratureConfig()
    m1, m2 = _bivariate(model)
    c = model.distorted_copula if distorted else model.copula
    vals = [_sum_sf_scalar(c, m1, m2, float(ti), 1e-11, q.max_subdivisions)
            for ti in np.atleast_1d(np.asarray(t, dtype=float)).ravel()]
    arr = np.clip(np.array(vals), 0.0, 1.0).reshape(np.shape(t))
    return arr if arr.ndim else float(arr)


# ----------------------------------------------------------------------------
# distortion integrals


def _check_psi(psi: Distortion) -> None:
    rep = check_admissible(psi)
    if not (rep.endpoints_ok and rep.monotone_ok):
        raise DomainError(f"{psi!r} is not an admissible distortion", field="tail_distortion")
    if not rep.concave_ok:
        warnings.warn(f"{psi!r} is not concave; the resulting measure need not be coherent",
                      RuntimeWarning, stacklevel=3)


def distortion_integral(sf, support_inf: float, psi: Distortion, tail_index: float,
                        q: QuadratureConfig | None = None) -> MeasureResult:
    """``int_0^inf psi(sf(z)) dz`` for a loss with support ``[support_inf, inf)``.

    The integral from ``support_inf`` runs over geometrically growing panels
    until the tail beyond the last edge ``T``, estimated from the regular
    variation ``psi(sf(z)) ~ A z**-p`` with ``p = tail_index * psi.tail_exponent``,
    is below ``tail_truncation_prob`` of the running total.  That tail
    estimate is added to the result; its disagreement with an estimate
    built on the locally observed decay rate is reported as truncation error.
    """
    q = q or QuadratureConfig()
    _check_psi(psi)
    p = tail_index * psi.tail_exponent
    if p <= 1.0:
        raise DivergentMeasureError(
            f"psi(1 - G(z)) decays like z**-{p:.6g}; the integral diverges", exponent=p)

    def f(z):
        return np.asarray(psi(np.clip(sf(z), 0.0, 1.0)), dtype=float)

    s0 = float(support_inf)
    total, q_err = 0.0, 0.0
    width = 0.25
    lo = s0
    f_prev = None
    trunc_err = math.inf
    tail = 0.0
    panel_tol = q.abs_tol / 8.0
    for _ in range(_MAX_DOUBLINGS):
        hi = lo + width
        r = gk_adaptive(f, lo, hi, abs_tol=panel_tol, rel_tol=q.rel_tol, max_subdivisions=q.max_subdivisions)
        total += r.value
        q_err += r.error
        f_hi = float(f(np.array([hi]))[0])
        if f_hi == 0.0:
            tail, trunc_err = 0.0, 0.0
            break
        if f_prev is not None and lo > 0.0 and f_prev > 0.0:
            p_loc = math.log(f_prev / f_hi) / math.log(hi / lo)
            if p_loc > 1.0:
                tail_theory = f_hi * hi / (p - 1.0) if math.isfinite(p) else 0.0
                tail_local = f_hi * hi / (p_loc - 1.0)
                tail = tail_theory if math.isfinite(p) else tail_local
                trunc_err = abs(tail_local - tail_theory) if math.isfinite(p) else tail_local
                if max(tail, trunc_err) <= q.tail_truncation_prob * max(total, 1e-300):
                    break
        if hi >= _Z_CAP * max(1.0, s0):
            if not math.isfinite(trunc_err):
                tail = f_hi * hi / (p - 1.0) if math.isfinite(p) else 0.0
                trunc_err = tail
            warnings.warn(f"distortion_integral: truncation target not met by z = {hi:.3g}; "
                          f"tail estimate {tail:.3g} +- {trunc_err:.3g} added", RuntimeWarning, stacklevel=2)
            break
        f_prev = f_hi
        lo = hi
        width *= 2.0
    return MeasureResult(s0 + total + tail, s0, q_err, trunc_err, lo + width)


def _measure(model: PortfolioModel, c: ArchimedeanCopula, q: QuadratureConfig) -> MeasureResult:
    m1, m2 = _bivariate(model)
    k_min = min(m1.tail_index, m2.tail_index)
    max_sub = q.max_subdivisions

    def sf(z):
        return np.array([_sum_sf_scalar(c, m1, m2, float(zi), 1e-11, max_sub) for zi in np.ravel(z)])

    return distortion_integral(sf, model.support_inf, model.tail_distortion, k_min, q)


def drm_result(model: PortfolioModel, q: QuadratureConfig | None = None) -> MeasureResult:
    return _measure(model, model.copula, q or QuadratureConfig())


def cdrm_result(model: PortfolioModel, q: QuadratureConfig | None = None) -> MeasureResult:
    return _measure(model, model.distorted_copula, q or QuadratureConfig())


def drm(model: PortfolioModel, q: QuadratureConfig | None = None) -> float:
    """Distortion risk measure of the sum under the undistorted copula."""
    return drm_result(model, q).value


def cdrm(model: PortfolioModel, q: QuadratureConfig | None = None) -> float:
    """Distortion risk measure of the sum under the distorted copula."""
    return cdrm_result(model, q).value


def single_margin_drm(margin: Margin, psi: Distortion, q: QuadratureConfig | None = None) -> MeasureResult:
    """Distortion risk measure of one loss."""
    return distortion_integral(margin.sf, margin.support_inf, psi, margin.tail_index, q)


def expectation(model: PortfolioModel) -> float:
    """Mean of the sum; the copula plays no part."""
    return math.fsum(m.mean() for m in model.margins)


def expectation_excess(model: PortfolioModel) -> float:
    return expectation(model) - model.support_inf


def risk_report(model: PortfolioModel, q: QuadratureConfig | None = None) -> RiskReport:
    q = q or QuadratureConfig()
    d = drm_result(model, q)
    tau = kendall_tau(model.copula).tau
    if model.copula_distortion is None:
        cd, tau_d = None, None
    else:
        cd = cdrm_result(model, q)
        tau_d = kendall_tau(model.distorted_copula).tau
    return RiskReport(
        expectation=expectation(model),
        drm=d.value,
        cdrm=None if cd is None else cd.value,
        tau=tau,
        tau_distorted=tau_d,
        support_inf=d.support_inf,
        drm_excess=d.value - d.support_inf,
        cdrm_excess=None if cd is None else cd.value - cd.support_inf,
        quadrature_err_est=d.quadrature_err_est + (0.0 if cd is None else cd.quadrature_err_est),
        truncation_err_est=d.truncation_err_est + (0.0 if cd is None else cd.truncation_err_est),
    )


# ----------------------------------------------------------------------------
# sandwich and table


@dataclass(frozen=True)
class SandwichReport:
    expectation: float
    cdrm: float
    drm: float
    lower_slack: float
    upper_slack: float
    tolerance: float

    @property
    def ok(self) -> bool:
        return self.lower_slack >= -self.tolerance and self.upper_slack >= -self.tolerance


def sandwich_check(model: PortfolioModel, q: QuadratureConfig | None = None) -> SandwichReport:
    """Check ``E[Z] <= cdrm <= drm``; violations show up as negative slack."""
    q = q or QuadratureConfig()
    e = expectation(model)
    d = drm_result(model, q)
    cd = cdrm_result(model, q) if model.copula_distortion is not None else d
    tol = (d.quadrature_err_est + d.truncation_err_est + cd.quadrature_err_est + cd.truncation_err_est
           + 10 * q.abs_tol)
    return SandwichReport(e, cd.value, d.value, cd.value - e, d.value - cd.value, tol)


@dataclass(frozen=True)
class TableRow:
    delta: float
    tau_delta: float | None = None
    cdrm_excess: float | None = None
    cdrm_full: float | None = None
    quad_err: float | None = None
    trunc_err: float | None = None
    error: dict | None = field(default=None)


def delta_distortion(family: str, delta: float) -> Distortion:
    """Copula distortion indexed by ``delta``: ``t**(1/delta)`` or the log family with scale ``delta``."""
    if family == "power_copula":
        if not delta >= 1.0:
            raise DomainError(f"delta={delta!r} must be >= 1 for the power copula distortion", field="delta_grid")
        return PowerCopula(1.0 / delta)
    if family == "log_copula":
        return LogCopula(delta)
    raise DomainError(f"delta grids apply to power_copula or log_copula distortions, not {family!r}",
                      field="model.copula_distortion")


def _row(args) -> TableRow:
    model, delta, q, family = args
    try:
        m = model.with_copula_distortion(delta_distortion(family, delta))
        tau = kendall_tau(m.distorted_copula).tau
        r = cdrm_result(m, q)
        return TableRow(delta, tau, r.excess, r.value, r.quadrature_err_est, r.truncation_err_est)
    except CdrmError as exc:
        return TableRow(delta, error=exc.to_record())


def table_scan(model: PortfolioModel, delta_grid: Sequence[float], *, rho: float | None = None,
               q: QuadratureConfig | None = None, threads: int = 1,
               family: str = "power_copula") -> list[TableRow]:
    """One row per ``delta``, the copula distorted by :func:`delta_distortion`.

    ``rho`` replaces the tail distortion by ``s -> s**(1/rho)``.  Rows are
    computed independently (in worker processes when ``threads > 1``) and
    returned in grid order; a failing row carries its error record.
    """
    q = q or QuadratureConfig()
    if rho is not None:
        model = model.with_tail_distortion(PowerTail(1.0 / rho))
    jobs = [(model, float(d), q, family) for d in delta_grid]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(threads, len(jobs), os.cpu_count() or 1)) as ex:
            return list(ex.map(_row, jobs))
    return [_row(j) for j in jobs]
