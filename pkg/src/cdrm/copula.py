"""Archimedean copulas, their distortions, and association measures.

A copula is built from a generator ``phi`` (continuous, strictly decreasing,
convex, ``phi(1) = 0``) as ``C(u) = phi^[-1](sum phi(u_i))``.  Distorting by
an increasing bijection ``Gamma`` gives ``Gamma^-1(C(Gamma(u), ...))``, which
is again Archimedean with generator ``phi o Gamma`` whenever that composition
is convex.  :func:`distort` checks this on a grid before building the result.

Generic evaluation always goes through the generator and its analytic
derivatives.  Generators that are a rescaled Clayton generator (Clayton
itself and Clayton composed with a power distortion) additionally expose
``clayton_theta``; the ``*_fast`` helpers use the Clayton closed forms and are
what the aggregation integrals and the sampler call.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Literal, NamedTuple

import numpy as np

from .distortion import GRID_N, Distortion, PowerCopula, _out, check_admissible
from .errors import (
    AdmissibilityError,
    BoundaryError,
    DegenerateBoundsError,
    DomainError,
    NotInvertibleError,
    ShapeError,
    TheoremViolationError,
    UnsupportedDimensionError,
)
from .quadrature import gauss_legendre_2d

CONVEXITY_TOL = 1e-12
BOUNDARY_EPS = 1e-12
TAU_ORDER = 64
_BISECT_MAX_ITER = 200


def _prob(t, what="t"):
    arr = np.asarray(t, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError(f"{what} must lie in [0, 1]")
    return arr


# ----------------------------------------------------------------------------
# generators


class Generator(ABC):
    """Archimedean generator with analytic first and second derivatives."""

    @abstractmethod
    def _phi(self, t): ...

    @abstractmethod
    def _d1(self, t): ...

    @abstractmethod
    def _d2(self, t): ...

    @abstractmethod
    def _inv(self, y):
        """Inverse on ``[0, phi(0)]``."""

    def __call__(self, t):
        t_ = _prob(t)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = np.where(t_ == 1.0, 0.0, self._phi(t_))
        return _out(out, t)

    def deriv1(self, t):
        t_ = _prob(t)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return _out(self._d1(t_), t)

    def deriv2(self, t):
        t_ = _prob(t)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return _out(self._d2(t_), t)

    def pseudo_inverse(self, y):
        """``phi^-1(y)`` on ``[0, phi(0)]`` and 0 beyond."""
        y_ = np.asarray(y, dtype=float)
        if np.any(np.isnan(y_)) or np.any(y_ < 0.0):
            raise DomainError("generator pseudo-inverse needs y >= 0")
        with np.errstate(divide="ignore", invalid="ignore", over="ignore", under="ignore"):
            out = np.where(y_ >= self.phi0, 0.0, self._inv(np.minimum(y_, self.phi0)))
            out = np.where(y_ == 0.0, 1.0, np.clip(out, 0.0, 1.0))
        return _out(out, y)

    @property
    def phi0(self) -> float:
        with np.errstate(divide="ignore", over="ignore"):
            return float(self._phi(np.float64(0.0)))

    @property
    def strict(self) -> bool:
        return math.isinf(self.phi0)

    @property
    def clayton_theta(self) -> float | None:
        """Parameter of the Clayton copula this generator induces, if any."""
        return None

    @abstractmethod
    def to_spec(self) -> dict: ...


@dataclass(frozen=True)
class Clayton(Generator):
    theta: float

    def __post_init__(self):
        if not (0.0 < self.theta < math.inf):
            raise DomainError(f"clayton theta={self.theta!r} must be > 0", field="theta")

    def _phi(self, t):
        return np.expm1(-self.theta * np.log(t)) / self.theta

    def _d1(self, t):
        return -(t ** (-self.theta - 1.0))

    def _d2(self, t):
        return (self.theta + 1.0) * t ** (-self.theta - 2.0)

    def _inv(self, y):
        return np.exp(-np.log1p(self.theta * y) / self.theta)

    @property
    def clayton_theta(self):
        return self.theta

    def to_spec(self):
        return {"family": "clayton", "theta": self.theta}


@dataclass(frozen=True)
class Gumbel(Generator):
    alpha: float

    def __post_init__(self):
        if not (1.0 <= self.alpha < math.inf):
            raise DomainError(f"gumbel alpha={self.alpha!r} must be >= 1", field="alpha")

    def _phi(self, t):
        return (-np.log(t)) ** self.alpha

    def _d1(self, t):
        a = self.alpha
        return -a * (-np.log(t)) ** (a - 1.0) / t

    def _d2(self, t):
        a = self.alpha
        L = -np.log(t)
        out = a * L ** (a - 1.0) / t**2
        if a != 1.0:
            out = out + a * (a - 1.0) * L ** (a - 2.0) / t**2
        return out

    def _inv(self, y):
        return np.exp(-(y ** (1.0 / self.alpha)))

    def to_spec(self):
        return {"family": "gumbel", "alpha": self.alpha}


@dataclass(frozen=True)
class Frank(Generator):
    beta: float

    def __post_init__(self):
        if self.beta == 0.0 or not math.isfinite(self.beta):
            raise DomainError(f"frank beta={self.beta!r} must be finite and non-zero", field="beta")

    def _phi(self, t):
        b = self.beta
        return -np.log(np.expm1(-b * t) / math.expm1(-b))

    def _d1(self, t):
        return -self.beta / np.expm1(self.beta * t)

    def _d2(self, t):
        b = self.beta
        e = np.expm1(b * t)
        return b * b * (e + 1.0) / (e * e)

    def _inv(self, y):
        b = self.beta
        return -np.log1p(np.exp(-y) * math.expm1(-b)) / b

    def to_spec(self):
        return {"family": "frank", "beta": self.beta}


@dataclass(frozen=True)
class Product(Generator):
    def _phi(self, t):
        return -np.log(t)

    def _d1(self, t):
        return -1.0 / t

    def _d2(self, t):
        return 1.0 / (t * t)

    def _inv(self, y):
        return np.exp(-y)

    def to_spec(self):
        return {"family": "product"}


@dataclass(frozen=True)
class Composed(Generator):
    """``base o gamma``; derivatives by the chain rule."""

    base: Generator
    gamma: Distortion

    def _phi(self, t):
        return self.base._phi(self.gamma(t))

    def _d1(self, t):
        return self.base._d1(self.gamma(t)) * self.gamma.deriv(t)

    def _d2(self, t):
        g = self.gamma(t)
        d = self.gamma.deriv(t)
        return self.base._d2(g) * d * d + self.base._d1(g) * self.gamma.deriv2(t)

    def _inv(self, y):
        return np.asarray(self.gamma.inverse(np.clip(self.base._inv(y), 0.0, 1.0)))

    @property
    def clayton_theta(self):
        th = self.base.clayton_theta
        if th is not None and isinstance(self.gamma, PowerCopula):
            # phi_theta(t**r) = r * phi_{theta*r}(t): same copula
            return th * self.gamma.r
        return None

    def to_spec(self):
        return {"base": self.base.to_spec(), "gamma": self.gamma.to_spec()}


def generator_from_spec(spec: dict) -> Generator:
    family = spec.get("family")
    rest = {k: v for k, v in spec.items() if k != "family"}
    table = {"clayton": (Clayton, "theta"), "gumbel": (Gumbel, "alpha"), "frank": (Frank, "beta")}
    if family == "product":
        if rest:
            raise DomainError(f"product copula takes no parameters, got {sorted(rest)}", field="family")
        return Product()
    if family not in table:
        raise DomainError(f"unknown copula family {family!r}; expected clayton, gumbel, frank or product",
                          field="family")
    cls, key = table[family]
    if set(rest) != {key}:
        raise DomainError(f"{family} copula needs exactly {key!r}, got {sorted(rest)}", field=key)
    return cls(float(rest[key]))


def generator_eval(g: Generator, t):
    return g(t)


def generator_deriv1(g: Generator, t):
    return g.deriv1(t)


def generator_deriv2(g: Generator, t):
    return g.deriv2(t)


def generator_pseudo_inverse(g: Generator, y):
    return g.pseudo_inverse(y)


# ----------------------------------------------------------------------------
# copulas


@dataclass(frozen=True)
class ArchimedeanCopula:
    generator: Generator
    dimension: int = 2

    def __post_init__(self):
        if int(self.dimension) != self.dimension or self.dimension < 2:
            raise DomainError("copula dimension must be an integer >= 2", field="dimension")

    @property
    def clayton_theta(self) -> float | None:
        return self.generator.clayton_theta

    def cdf(self, u):
        return copula_cdf(self, u)

    def density(self, u, v):
        return copula_density(self, u, v)


def copula_cdf(c: ArchimedeanCopula, u):
    """``phi^[-1](sum_i phi(u_i))``; ``u`` has trailing axis of length ``dimension``."""
    u_ = _prob(u, "u")
    if u_.shape[-1:] != (c.dimension,):
        raise ShapeError(f"expected trailing dimension {c.dimension}, got shape {u_.shape}")
    g = c.generator
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        phis = np.where(u_ == 1.0, 0.0, g._phi(u_))
        total = phis.sum(axis=-1)
    out = np.asarray(g.pseudo_inverse(total))
    out = np.where(np.any(u_ == 0.0, axis=-1), 0.0, out)
    # all but one argument equal to 1: the copula returns that argument exactly
    ones = (u_ == 1.0).sum(axis=-1)
    out = np.where(ones >= c.dimension - 1, u_.min(axis=-1), out)
    out = np.asarray(out)
    return out if out.ndim else float(out)


def _bivariate(c: ArchimedeanCopula, op: str):
    if c.dimension != 2:
        raise UnsupportedDimensionError(f"{op} is implemented for bivariate copulas only")


def _c2(c: ArchimedeanCopula, u, v):
    return np.asarray(copula_cdf(c, np.stack(np.broadcast_arrays(u, v), axis=-1)))


def copula_density(c: ArchimedeanCopula, u, v):
    """``-phi''(C) phi'(u) phi'(v) / phi'(C)**3`` for interior ``u, v``."""
    _bivariate(c, "density")
    u_, v_ = np.asarray(u, dtype=float), np.asarray(v, dtype=float)
    for arr, name in ((u_, "u"), (v_, "v")):
        if np.any(~(arr >= BOUNDARY_EPS)) or np.any(~(arr <= 1.0 - BOUNDARY_EPS)):
            raise BoundaryError(f"density needs {name} at least {BOUNDARY_EPS} away from 0 and 1")
    g = c.generator
    if isinstance(g, Product):
        out = np.ones(np.broadcast_shapes(u_.shape, v_.shape))
        return out if out.ndim else 1.0
    C = _c2(c, u_, v_)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        d1c = g._d1(C)
        out = -g._d2(C) * g._d1(u_) * g._d1(v_) / d1c**3
    out = np.asarray(out)
    return out if out.ndim else float(out)


def conditional_cdf(c: ArchimedeanCopula, v, given_u):
    """``P(V <= v | U = given_u) = phi'(u) / phi'(C(u, v))``."""
    _bivariate(c, "conditional_cdf")
    u_ = np.asarray(given_u, dtype=float)
    v_ = _prob(v, "v")
    if np.any(~(u_ > 0.0)) or np.any(~(u_ < 1.0)):
        raise BoundaryError("conditional_cdf needs 0 < given_u < 1")
    g = c.generator
    C = _c2(c, u_, v_)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = g._d1(u_) / g._d1(C)
    out = np.where(v_ == 0.0, 0.0, np.where(v_ == 1.0, 1.0, np.clip(out, 0.0, 1.0)))
    out = np.where(np.isnan(out), 0.0, out)  # C underflowed to 0 with phi'(0) infinite
    out = np.asarray(out)
    return out if out.ndim else float(out)


# -------- Clayton closed forms (fast paths)


def clayton_conditional_cdf_fast(theta: float, v, given_u):
    u = np.asarray(given_u, dtype=float)
    v = np.asarray(v, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        a = np.expm1(-theta * np.log(v))  # v**-theta - 1
        out = np.exp((-1.0 / theta - 1.0) * np.log1p(a * u**theta))
    return np.where(v <= 0.0, 0.0, out)


def clayton_conditional_sf_fast(theta: float, v_sf, given_u):
    """``1 - P(V <= v | U = u)`` from the complement ``v_sf = 1 - v``, accurate as ``v -> 1``."""
    u = np.asarray(given_u, dtype=float)
    s = np.asarray(v_sf, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        a = np.expm1(-theta * np.log1p(-s))
        out = -np.expm1((-1.0 / theta - 1.0) * np.log1p(a * u**theta))
    return np.where(s >= 1.0, 1.0, out)


def clayton_conditional_quantile_fast(theta: float, w, given_u):
    """Solve ``P(V <= v | U = u) = w`` for ``v``."""
    u = np.asarray(given_u, dtype=float)
    w = np.asarray(w, dtype=float)
    return ((w ** (-theta / (1.0 + theta)) - 1.0) * u ** (-theta) + 1.0) ** (-1.0 / theta)


def clayton_density_fast(theta: float, u, v):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return (theta + 1.0) * (u * v) ** (-theta - 1.0) * (u**-theta + v**-theta - 1.0) ** (-1.0 / theta - 2.0)


def conditional_sf(c: ArchimedeanCopula, v_sf, given_u):
    """``P(V > v | U = given_u)`` with ``v = 1 - v_sf``."""
    th = c.clayton_theta
    if th is not None:
        return clayton_conditional_sf_fast(th, v_sf, given_u)
    v_sf = np.asarray(v_sf, dtype=float)
    if isinstance(c.generator, Product):
        return np.broadcast_to(v_sf, np.broadcast(v_sf, np.asarray(given_u)).shape).copy()
    return 1.0 - np.asarray(conditional_cdf(c, 1.0 - v_sf, given_u))


def conditional_cdf_any(c: ArchimedeanCopula, v, given_u):
    """Conditional df using the Clayton closed form when available."""
    th = c.clayton_theta
    if th is not None:
        return clayton_conditional_cdf_fast(th, v, given_u)
    return conditional_cdf(c, v, given_u)


def conditional_quantile(c: ArchimedeanCopula, w, given_u, tol: float = 1e-12):
    """Invert :func:`conditional_cdf` in ``v`` (closed form for Clayton type)."""
    from .errors import SamplerError

    th = c.clayton_theta
    if th is not None:
        return clayton_conditional_quantile_fast(th, w, given_u)
    w = np.atleast_1d(np.asarray(w, dtype=float))
    u = np.broadcast_to(np.asarray(given_u, dtype=float), w.shape)
    lo, hi = np.zeros_like(w), np.ones_like(w)
    for _ in range(_BISECT_MAX_ITER):
        if np.all(hi - lo <= tol):
            break
        mid = 0.5 * (lo + hi)
        below = np.asarray(conditional_cdf(c, mid, u)) < w
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    else:
        bad = int(np.argmax(hi - lo))
        raise SamplerError(f"root finding did not converge for (u1, w) = ({u[bad]}, {w[bad]})")
    return 0.5 * (lo + hi)


# ----------------------------------------------------------------------------
# distortion of copulas


def _convexity_gap(g: Generator, n: int = GRID_N) -> tuple[float, float, float]:
    """Largest scaled midpoint-convexity violation of ``g`` on ``i/n``, i=1..n."""
    half = np.arange(2, 2 * n + 1) / (2 * n)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        vals = np.where(half == 1.0, 0.0, g._phi(half))
    base = vals[::2]
    m = base.size
    ii, jj = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
    mean = 0.5 * (base[ii] + base[jj])
    with np.errstate(invalid="ignore"):
        gap = (vals[ii + jj] - mean) / (1.0 + np.abs(mean))
    gap = np.nan_to_num(gap, nan=np.inf)
    k = int(np.argmax(gap))
    return float((ii.flat[k] + 1) / n), float((jj.flat[k] + 1) / n), float(gap.flat[k])


def convexity_gate(g: Generator, n: int = GRID_N) -> tuple[float, float, float]:
    """Grid midpoint test plus a sign check of the analytic second derivative.

    Returns the worst grid triple ``(s, t, violation)``; raises
    :class:`TheoremViolationError` when convexity fails.
    """
    s, t, viol = _convexity_gap(g, n)
    if viol > CONVEXITY_TOL:
        raise TheoremViolationError(
            f"composed generator is not convex: midpoint violation {viol:.3g} at s={s:.6g}, t={t:.6g}",
            (s, t, viol),
        )
    grid = np.arange(1, n) / n
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        d2 = g._d2(grid)
        d1 = np.abs(g._d1(grid))
    ok = np.isfinite(d2)
    bad = ok & (d2 < -CONVEXITY_TOL * (1.0 + d1))
    if np.any(bad):
        k = int(np.argmax(bad))
        raise TheoremViolationError(
            f"composed generator has negative second derivative {d2[k]:.3g} at t={grid[k]:.6g}",
            (float(grid[k]), float(grid[k]), float(-d2[k])),
        )
    return s, t, viol


def distort(c: ArchimedeanCopula, gamma: Distortion, *, require_concave: bool = True) -> ArchimedeanCopula:
    """Copula ``Gamma^-1(C(Gamma(u_1), ..., Gamma(u_d)))`` with generator ``phi o Gamma``.

    ``gamma`` must be an increasing bijection of [0, 1].  Concavity of
    ``gamma`` (which guarantees a copula for any base) is required unless
    ``require_concave=False``; the composed generator must pass
    :func:`convexity_gate` either way.
    """
    rep = check_admissible(gamma)
    if not (rep.endpoints_ok and rep.monotone_ok):
        raise AdmissibilityError(f"{gamma!r} is not a non-decreasing map fixing 0 and 1")
    if require_concave and not rep.concave_ok:
        raise AdmissibilityError(f"{gamma!r} is not concave (violation {rep.max_concavity_violation:.3g})")
    try:
        gamma.inverse(0.5)
    except NotInvertibleError as exc:
        raise AdmissibilityError(f"{gamma!r} is not a bijection: {exc}") from None
    grid = np.linspace(0.0, 1.0, GRID_N)
    if not np.all(np.diff(np.asarray(gamma(grid))) > 0.0):
        raise AdmissibilityError(f"{gamma!r} is not strictly increasing")
    composed = Composed(c.generator, gamma)
    convexity_gate(composed)
    return ArchimedeanCopula(composed, c.dimension)


@dataclass(frozen=True)
class ProductDistortion(Distortion):
    """``t -> phi^-1(-ln t)``, whose inverse is ``t -> exp(-phi(t))``.

    Distorting the copula of ``phi`` by this map yields the product copula,
    since ``phi o Gamma = -ln``.
    """

    generator: Generator
    family = "product_distortion"

    def _eval(self, s):
        return self.generator._inv(-np.log(s))

    def _deriv(self, s):
        with np.errstate(divide="ignore", invalid="ignore"):
            d = -1.0 / (s * self.generator._d1(self._eval(s)))
        d = np.where(s == 1.0, -1.0 / self.generator._d1(np.float64(1.0)), d)
        return np.where(np.isnan(d), np.inf, d)

    def _deriv2(self, s):
        g = self.generator
        G = self._eval(s)
        d1 = g._d1(G)
        dG = -1.0 / (s * d1)
        return 1.0 / (s * s * d1) + g._d2(G) * dG / (s * d1 * d1)

    def _inverse(self, y):
        return np.exp(-self.generator._phi(y))

    @property
    def params(self):
        return {}

    def to_spec(self):
        raise DomainError("product distortions are derived from a generator and have no config form")


def product_distortion(g: Generator) -> ProductDistortion:
    if not g.strict:
        raise DomainError("product distortion needs a strict generator")
    return ProductDistortion(g)


# ----------------------------------------------------------------------------
# association measures


@dataclass(frozen=True)
class AssociationReport:
    tau: float | None
    rho_s: float | None
    method: Literal["closed_form", "numeric_integral"]
    abs_err_est: float


def _partials(c: ArchimedeanCopula, u, v):
    g = c.generator
    C = _c2(c, u, v)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        d1c = g._d1(C)
        du = np.nan_to_num(g._d1(u) / d1c)
        dv = np.nan_to_num(g._d1(v) / d1c)
    return du, dv


def _panel_rule(f, order: int, panels: int) -> float:
    # composite tensor Gauss-Legendre: panels x panels squares
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, 1.0, panels + 1)
    h = np.diff(edges)
    nodes = (edges[:-1, None] + 0.5 * h[:, None] * (x[None, :] + 1.0)).ravel()
    weights = (0.5 * h[:, None] * w[None, :]).ravel()
    uu, vv = np.meshgrid(nodes, nodes, indexing="ij")
    return float(np.sum(np.outer(weights, weights) * f(uu, vv)))


def _tau_integrand(c):
    def f(u, v):
        du, dv = _partials(c, u, v)
        return du * dv

    return f


def kendall_tau(c: ArchimedeanCopula, method: Literal["auto", "closed_form", "numeric"] = "auto") -> AssociationReport:
    """Kendall's tau.

    Clayton-type generators use ``theta / (theta + 2)``; everything else goes
    through ``1 - 4 * int int dC/du * dC/dv`` with a tensor Gauss-Legendre rule,
    the error estimate being the change against a coarser rule.
    """
    _bivariate(c, "kendall_tau")
    th = c.clayton_theta
    if method == "closed_form" or (method == "auto" and th is not None):
        if th is None:
            raise DomainError("no closed form for Kendall's tau of this generator")
        return AssociationReport(th / (th + 2.0), None, "closed_form", 0.0)
    f = _tau_integrand(c)
    fine = 1.0 - 4.0 * _panel_rule(f, TAU_ORDER, 1)
    coarse = 1.0 - 4.0 * _panel_rule(f, TAU_ORDER // 2, 1)
    return AssociationReport(fine, None, "numeric_integral", max(abs(fine - coarse), np.finfo(float).eps))


def spearman_rho(c: ArchimedeanCopula) -> AssociationReport:
    """Spearman's rho ``12 * int int (C(u,v) - uv) du dv`` (numeric only)."""
    _bivariate(c, "spearman_rho")

    def f(u, v):
        return _c2(c, u, v) - u * v

    fine = 12.0 * gauss_legendre_2d(f, TAU_ORDER)
    coarse = 12.0 * gauss_legendre_2d(f, TAU_ORDER // 2)
    return AssociationReport(None, fine, "numeric_integral", max(abs(fine - coarse), np.finfo(float).eps))


class DurrlemanBounds(NamedTuple):
    tau_lo: float
    tau_hi: float
    rho_lo: float
    rho_hi: float


def durrleman_bounds(tau: float, rho_s: float, a: float, b: float) -> DurrlemanBounds:
    """Bounds on tau and rho of a distorted copula given ``a <= Gamma' <= b``.

    Since ``rho_s + 3 > 0`` the rho bound scaled by ``a**-3`` is the larger one, so it is
    returned as ``rho_hi``.
    """
    if not (0.0 < a <= b < math.inf):
        raise DegenerateBoundsError(f"derivative bounds (a={a}, b={b}) must satisfy 0 < a <= b < inf")
    return DurrlemanBounds(
        1.0 + (tau - 1.0) / a**2,
        1.0 + (tau - 1.0) / b**2,
        (rho_s + 3.0) / b**3 - 3.0,
        (rho_s + 3.0) / a**3 - 3.0,
    )


def copula_from_spec(spec: dict, dimension: int = 2) -> ArchimedeanCopula:
    return ArchimedeanCopula(generator_from_spec(spec), dimension)
