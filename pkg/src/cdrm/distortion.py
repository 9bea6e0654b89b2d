"""Distortion functions on the unit interval.

Two groups share one interface:

* tail distortions ``psi`` applied to a survival function (power / PHT,
  Wang normal transform, CTE, look-back);
* copula distortions ``Gamma`` used to reshape a dependence structure
  (power, logarithmic, Moebius, Morillas).

All evaluators accept scalars or numpy arrays and return the same shape.
Arguments that overshoot [0, 1] by at most ``CLAMP_SLACK`` (quadrature
round-off) are clamped; anything further out is a :class:`DomainError`.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import ClassVar, NamedTuple

import numpy as np

from .errors import DomainError, NotInvertibleError
from .normal import std_normal_cdf, std_normal_pdf, std_normal_quantile

CLAMP_SLACK = 1e-14
GRID_N = 1001
CONCAVITY_TOL = 1e-12
_BISECT_MAX_ITER = 200


def _unit_arg(s, what="s"):
    arr = np.asarray(s, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < -CLAMP_SLACK) or np.any(arr > 1.0 + CLAMP_SLACK):
        raise DomainError(f"{what} must lie in [0, 1]")
    return np.clip(arr, 0.0, 1.0)


def _out(arr, like):
    return arr if np.ndim(like) else float(arr)


class Distortion(ABC):
    """Non-decreasing map of [0, 1] onto itself with f(0)=0 and f(1)=1."""

    family: ClassVar[str] = ""

    def __call__(self, s):
        x = _unit_arg(s)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            inner = np.clip(x, np.finfo(float).tiny, 1.0)
            y = self._eval(inner)
        y = np.where(x == 0.0, 0.0, np.where(x == 1.0, 1.0, y))
        return _out(y, s)

    @abstractmethod
    def _eval(self, s: np.ndarray) -> np.ndarray: ...

    def deriv(self, s):
        """First derivative; endpoint limits may be ``inf``."""
        x = _unit_arg(s)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            d = self._deriv(x)
        return _out(d, s)

    def deriv2(self, s):
        x = _unit_arg(s)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            d = self._deriv2(x)
        return _out(d, s)

    @abstractmethod
    def _deriv(self, s: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def _deriv2(self, s: np.ndarray) -> np.ndarray: ...

    def inverse(self, y):
        """Return ``s`` with ``f(s) = y``.

        Families without a closed form fall back to vectorised bisection,
        which terminates at floating-point resolution.
        """
        x = _unit_arg(y, "y")
        self._check_invertible()
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            s = self._inverse(x)
        s = np.where(x == 0.0, 0.0, np.where(x == 1.0, 1.0, s))
        return _out(np.clip(s, 0.0, 1.0), y)

    def _check_invertible(self) -> None:
        pass

    def _inverse(self, y: np.ndarray) -> np.ndarray:
        return _bisect_inverse(self, y)

    @property
    def tail_exponent(self) -> float:
        """Exponent ``e`` with ``f(s)`` behaving like ``s**e`` as ``s -> 0``."""
        return 1.0

    @property
    @abstractmethod
    def params(self) -> dict[str, float]: ...

    def to_spec(self) -> dict:
        return {"family": self.family, "params": dict(self.params)}


def _bisect_inverse(fn: Distortion, y: np.ndarray) -> np.ndarray:
    y = np.atleast_1d(y).astype(float)
    lo = np.zeros_like(y)
    hi = np.ones_like(y)
    for _ in range(_BISECT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        done = (mid <= lo) | (mid >= hi)
        if np.all(done):
            break
        below = np.asarray(fn(mid)) < y
        lo = np.where(below & ~done, mid, lo)
        hi = np.where(~below & ~done, mid, hi)
    # pick whichever bracket end is closer in value
    flo, fhi = np.asarray(fn(lo)), np.asarray(fn(hi))
    return np.where(np.abs(flo - y) <= np.abs(fhi - y), lo, hi)


def _require(cond: bool, name: str, rng: str, value: float) -> None:
    if not cond:
        raise DomainError(f"parameter {name}={value!r} outside admissible range {rng}", field=name)


# ----------------------------------------------------------------------------
# tail distortions


@dataclass(frozen=True)
class PowerTail(Distortion):
    """Proportional hazard transform ``s**rho``."""

    rho: float
    family: ClassVar[str] = "power_tail"

    def __post_init__(self):
        _require(0.0 < self.rho <= 1.0, "rho", "(0, 1]", self.rho)

    def _eval(self, s):
        return s**self.rho

    def _deriv(self, s):
        return self.rho * s ** (self.rho - 1.0)

    def _deriv2(self, s):
        return self.rho * (self.rho - 1.0) * s ** (self.rho - 2.0)

    def _inverse(self, y):
        return y ** (1.0 / self.rho)

    @property
    def tail_exponent(self):
        return self.rho

    @property
    def params(self):
        return {"rho": self.rho}


@dataclass(frozen=True)
class WangNormal(Distortion):
    """Wang transform ``Phi(Phi^{-1}(s) + kappa)``."""

    kappa: float
    family: ClassVar[str] = "wang_normal"

    def __post_init__(self):
        _require(0.0 <= self.kappa < math.inf, "kappa", "[0, inf)", self.kappa)

    def _eval(self, s):
        s = np.clip(s, 1e-300, 1.0 - 1e-16)
        return std_normal_cdf(std_normal_quantile(s) + self.kappa)

    def _deriv(self, s):
        k = self.kappa
        inner = np.clip(s, 1e-300, 1.0 - 1e-16)
        z = std_normal_quantile(inner)
        d = np.exp(-k * z - 0.5 * k * k)
        if k == 0.0:
            return np.ones_like(s)
        return np.where(s == 0.0, np.inf, np.where(s == 1.0, 0.0, d))

    def _deriv2(self, s):
        k = self.kappa
        inner = np.clip(s, 1e-300, 1.0 - 1e-16)
        z = std_normal_quantile(inner)
        return -k * np.exp(-k * z - 0.5 * k * k) / std_normal_pdf(z)

    def _inverse(self, y):
        y = np.clip(y, 1e-300, 1.0 - 1e-16)
        return std_normal_cdf(std_normal_quantile(y) - self.kappa)

    @property
    def params(self):
        return {"kappa": self.kappa}


@dataclass(frozen=True)
class CTE(Distortion):
    """Conditional tail expectation ``min(s / (1 - zeta), 1)``."""

    zeta: float
    family: ClassVar[str] = "cte"

    def __post_init__(self):
        _require(0.0 <= self.zeta < 1.0, "zeta", "[0, 1)", self.zeta)

    def _eval(self, s):
        return np.minimum(s / (1.0 - self.zeta), 1.0)

    def _deriv(self, s):
        # left derivative at the kink
        return np.where(s <= 1.0 - self.zeta, 1.0 / (1.0 - self.zeta), 0.0)

    def _deriv2(self, s):
        return np.zeros_like(s)

    def _check_invertible(self):
        if self.zeta > 0.0:
            raise NotInvertibleError(f"CTE with zeta={self.zeta} is flat at 1 on [1-zeta, 1]")

    def _inverse(self, y):
        return y

    @property
    def params(self):
        return {"zeta": self.zeta}


@dataclass(frozen=True)
class LookBack(Distortion):
    """Look-back distortion ``s**alpha * (1 - alpha*ln s)``."""

    alpha: float
    family: ClassVar[str] = "look_back"

    def __post_init__(self):
        _require(0.0 < self.alpha <= 1.0, "alpha", "(0, 1]", self.alpha)

    def _eval(self, s):
        a = self.alpha
        return s**a * (1.0 - a * np.log(s))

    def _deriv(self, s):
        a = self.alpha
        return np.where(s == 0.0, np.inf, -a * a * s ** (a - 1.0) * np.log(s))

    def _deriv2(self, s):
        a = self.alpha
        return -a * a * s ** (a - 2.0) * ((a - 1.0) * np.log(s) + 1.0)

    @property
    def tail_exponent(self):
        return self.alpha

    @property
    def params(self):
        return {"alpha": self.alpha}


# ----------------------------------------------------------------------------
# copula distortions


@dataclass(frozen=True)
class PowerCopula(Distortion):
    """``s**r``; with ``r = 1/delta`` this is the usual power distortion."""

    r: float
    family: ClassVar[str] = "power_copula"

    def __post_init__(self):
        _require(0.0 < self.r <= 1.0, "r", "(0, 1]", self.r)

    def _eval(self, s):
        return s**self.r

    def _deriv(self, s):
        return self.r * s ** (self.r - 1.0)

    def _deriv2(self, s):
        return self.r * (self.r - 1.0) * s ** (self.r - 2.0)

    def _inverse(self, y):
        return y ** (1.0 / self.r)

    @property
    def tail_exponent(self):
        return self.r

    @property
    def params(self):
        return {"r": self.r}


@dataclass(frozen=True)
class LogCopula(Distortion):
    """``ln(delta*s + 1) / ln(delta + 1)``."""

    delta: float
    family: ClassVar[str] = "log_copula"

    def __post_init__(self):
        _require(0.0 < self.delta < math.inf, "delta", "(0, inf)", self.delta)

    @property
    def _norm(self):
        return math.log1p(self.delta)

    def _eval(self, s):
        return np.log1p(self.delta * s) / self._norm

    def _deriv(self, s):
        return self.delta / ((self.delta * s + 1.0) * self._norm)

    def _deriv2(self, s):
        return -self.delta**2 / ((self.delta * s + 1.0) ** 2 * self._norm)

    def _inverse(self, y):
        return np.expm1(y * self._norm) / self.delta

    @property
    def params(self):
        return {"delta": self.delta}


@dataclass(frozen=True)
class Mobius(Distortion):
    """``(xi + vartheta) s / (xi s + vartheta)``."""

    xi: float
    vartheta: float
    family: ClassVar[str] = "mobius"

    def __post_init__(self):
        _require(0.0 < self.xi < math.inf, "xi", "(0, inf)", self.xi)
        _require(0.0 < self.vartheta < math.inf, "vartheta", "(0, inf)", self.vartheta)

    def _eval(self, s):
        return (self.xi + self.vartheta) * s / (self.xi * s + self.vartheta)

    def _deriv(self, s):
        return (self.xi + self.vartheta) * self.vartheta / (self.xi * s + self.vartheta) ** 2

    def _deriv2(self, s):
        xi, th = self.xi, self.vartheta
        return -2.0 * xi * (xi + th) * th / (xi * s + th) ** 3

    def _inverse(self, y):
        return y * self.vartheta / (self.xi + self.vartheta - y * self.xi)

    @property
    def params(self):
        return {"xi": self.xi, "vartheta": self.vartheta}


@dataclass(frozen=True)
class Morillas(Distortion):
    """``s**nu / (2 - s**nu)``."""

    nu: float
    family: ClassVar[str] = "morillas"

    def __post_init__(self):
        _require(0.0 < self.nu <= 1.0 / 3.0, "nu", "(0, 1/3]", self.nu)

    def _eval(self, s):
        x = s**self.nu
        return x / (2.0 - x)

    def _deriv(self, s):
        x = s**self.nu
        return 2.0 * self.nu * s ** (self.nu - 1.0) / (2.0 - x) ** 2

    def _deriv2(self, s):
        nu = self.nu
        x = s**nu
        dx = nu * s ** (nu - 1.0)
        ddx = nu * (nu - 1.0) * s ** (nu - 2.0)
        return 4.0 / (2.0 - x) ** 3 * dx * dx + 2.0 / (2.0 - x) ** 2 * ddx

    def _inverse(self, y):
        return (2.0 * y / (1.0 + y)) ** (1.0 / self.nu)

    @property
    def tail_exponent(self):
        return self.nu

    @property
    def params(self):
        return {"nu": self.nu}


FAMILIES: dict[str, type[Distortion]] = {
    cls.family: cls
    for cls in (PowerTail, WangNormal, CTE, LookBack, PowerCopula, LogCopula, Mobius, Morillas)
}

# alternative parameterisations accepted in configs: name -> (canonical, transform)
_ALIASES = {
    "power_tail": {"rho_inverse": ("rho", lambda v: 1.0 / v)},
    "power_copula": {"delta": ("r", lambda v: 1.0 / v)},
}


def from_spec(spec: dict) -> Distortion:
    """Build a distortion from ``{"family": str, "params": {name: number}}``."""
    family = spec.get("family")
    if family not in FAMILIES:
        raise DomainError(f"unknown distortion family {family!r}; expected one of {sorted(FAMILIES)}",
                          field="family")
    params = dict(spec.get("params", {}))
    for alias, (canon, tf) in _ALIASES.get(family, {}).items():
        if alias in params:
            if canon in params:
                raise DomainError(f"give either {canon!r} or {alias!r}, not both", field=alias)
            value = params.pop(alias)
            if not value > 0:
                raise DomainError(f"parameter {alias}={value!r} must be positive", field=alias)
            params[canon] = tf(value)
    cls = FAMILIES[family]
    try:
        return cls(**{k: float(v) for k, v in params.items()})
    except TypeError as exc:
        raise DomainError(f"bad parameters for {family}: {exc}", field="params") from None


# ----------------------------------------------------------------------------
# module-level operations


def evaluate(fn: Distortion, s):
    return fn(s)


def inverse(fn: Distortion, y):
    return fn.inverse(y)


class DerivativeBounds(NamedTuple):
    """Extremes of ``f'`` over the unit interval; ``upper`` may be ``inf``."""

    lower: float
    upper: float

    @property
    def degenerate(self) -> bool:
        return not (0.0 < self.lower <= self.upper < math.inf)


def derivative_bounds(fn: Distortion, grid_n: int = GRID_N) -> DerivativeBounds:
    """Min and max of the analytic derivative on a uniform grid of [0, 1].

    Endpoint limits are included, so an unbounded derivative shows up as an
    ``inf`` upper bound rather than a large finite number.
    """
    if grid_n < 101:
        raise DomainError("grid_n must be at least 101", field="grid_n")
    d = np.asarray(fn.deriv(np.linspace(0.0, 1.0, grid_n)))
    d = np.where(np.isnan(d), np.inf, d)
    return DerivativeBounds(float(d.min()), float(d.max()))


@dataclass(frozen=True)
class AdmissibilityReport:
    endpoints_ok: bool
    monotone_ok: bool
    concave_ok: bool
    max_concavity_violation: float

    @property
    def ok(self) -> bool:
        return self.endpoints_ok and self.monotone_ok and self.concave_ok


def midpoint_violation(values_half_grid: np.ndarray) -> tuple[float, int, int]:
    """Largest ``(f(s)+f(t))/2 - f((s+t)/2)`` over all pairs of a uniform grid.

    ``values_half_grid`` holds ``f`` on a grid of spacing ``h/2``; the base
    grid is every other point, and the midpoint of base points ``i, j`` is
    half-grid point ``i + j``.  Returns the violation and the base indices.
    """
    base = values_half_grid[::2]
    n = base.size
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    gap = 0.5 * (base[ii] + base[jj]) - values_half_grid[ii + jj]
    k = int(np.argmax(gap))
    return float(gap.flat[k]), int(ii.flat[k]), int(jj.flat[k])


def check_admissible(fn: Distortion, grid_n: int = GRID_N) -> AdmissibilityReport:
    """Grid checks for endpoints, monotonicity and midpoint concavity."""
    endpoints_ok = fn(0.0) == 0.0 and fn(1.0) == 1.0
    half = np.asarray(fn(np.linspace(0.0, 1.0, 2 * grid_n - 1)))
    monotone_ok = bool(np.all(np.diff(half[::2]) >= 0.0))
    # concavity: f(mid) >= mean(f) - tol, i.e. mean - f(mid) <= tol
    viol, _, _ = midpoint_violation(half)
    viol = max(viol, 0.0)
    return AdmissibilityReport(bool(endpoints_ok), monotone_ok, viol <= CONCAVITY_TOL, viol)
