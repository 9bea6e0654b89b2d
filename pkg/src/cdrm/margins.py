"""Marginal loss distributions.

Pareto margins keep the tail-index parameterisation ``F(x) = 1 - x**(-1/alpha)``
on ``x > 1``: ``alpha`` is the reciprocal of the usual Pareto shape, and the
mean is finite only for ``alpha < 1``.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import ClassVar

import numpy as np

from .errors import DomainError, InfiniteQuantileError, NonIntegrableError


def _ret(arr, like):
    return arr if np.ndim(like) else float(arr)


class Margin(ABC):
    family: ClassVar[str] = ""
    support_inf: float = 0.0

    @abstractmethod
    def cdf(self, x): ...

    @abstractmethod
    def sf(self, x):
        """Survival function, accurate where ``cdf`` is close to 1."""

    @abstractmethod
    def pdf(self, x): ...

    @abstractmethod
    def quantile(self, u): ...

    @abstractmethod
    def mean(self) -> float: ...

    @property
    @abstractmethod
    def tail_index(self) -> float:
        """``k`` with ``sf(x)`` regularly varying of index ``-k`` (``inf`` if lighter)."""

    @abstractmethod
    def to_spec(self) -> dict: ...

    def _check_u(self, u):
        arr = np.asarray(u, dtype=float)
        if np.any(np.isnan(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
            raise DomainError("quantile level must lie in [0, 1)")
        if np.any(arr == 1.0):
            raise InfiniteQuantileError(f"{self.family} quantile at level 1 is infinite")
        return arr


@dataclass(frozen=True)
class Pareto(Margin):
    alpha: float
    family: ClassVar[str] = "pareto"
    support_inf: ClassVar[float] = 1.0

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise DomainError(f"pareto alpha={self.alpha!r} outside (0, 1); the mean would be infinite",
                              field="alpha")

    @property
    def tail_index(self) -> float:
        return 1.0 / self.alpha

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            out = np.where(x > 1.0, np.maximum(x, 1.0) ** (-1.0 / self.alpha), 1.0)
        return _ret(out, x)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            out = np.where(x > 1.0, -np.expm1(-np.log(np.maximum(x, 1.0)) / self.alpha), 0.0)
        return _ret(out, x)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        k = 1.0 / self.alpha
        out = np.where(x > 1.0, k * np.maximum(x, 1.0) ** (-k - 1.0), 0.0)
        return _ret(out, x)

    def quantile(self, u):
        u = self._check_u(u)
        out = np.exp(-self.alpha * np.log1p(-u))
        return _ret(out, u)

    def quantile_sf(self, s):
        """Quantile at survival level ``s`` (i.e. level ``1 - s``) without cancellation."""
        s = np.asarray(s, dtype=float)
        return _ret(s ** (-self.alpha), s)

    def mean(self) -> float:
        if self.alpha >= 1.0:
            raise NonIntegrableError("pareto mean is infinite for alpha >= 1")
        return 1.0 / (1.0 - self.alpha)

    def to_spec(self) -> dict:
        return {"family": self.family, "alpha": self.alpha}


@dataclass(frozen=True)
class Exponential(Margin):
    rate: float
    family: ClassVar[str] = "exponential"
    support_inf: ClassVar[float] = 0.0

    def __post_init__(self):
        if not (0.0 < self.rate < math.inf):
            raise DomainError(f"exponential rate={self.rate!r} must be positive", field="rate")

    @property
    def tail_index(self) -> float:
        return math.inf

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x > 0.0, np.exp(-self.rate * np.maximum(x, 0.0)), 1.0)
        return _ret(out, x)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x > 0.0, -np.expm1(-self.rate * np.maximum(x, 0.0)), 0.0)
        return _ret(out, x)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x >= 0.0, self.rate * np.exp(-self.rate * np.maximum(x, 0.0)), 0.0)
        return _ret(out, x)

    def quantile(self, u):
        u = self._check_u(u)
        return _ret(-np.log1p(-u) / self.rate, u)

    def quantile_sf(self, s):
        s = np.asarray(s, dtype=float)
        return _ret(-np.log(s) / self.rate, s)

    def mean(self) -> float:
        return 1.0 / self.rate

    def to_spec(self) -> dict:
        return {"family": self.family, "rate": self.rate}


def from_spec(spec: dict) -> Margin:
    family = spec.get("family")
    rest = {k: v for k, v in spec.items() if k != "family"}
    if family == "pareto":
        keys = {"alpha"}
    elif family == "exponential":
        keys = {"rate"}
    else:
        raise DomainError(f"unknown margin family {family!r}; expected 'pareto' or 'exponential'",
                          field="family")
    if set(rest) != keys:
        raise DomainError(f"{family} margin needs exactly {sorted(keys)}, got {sorted(rest)}", field="family")
    (key,) = keys
    cls = Pareto if family == "pareto" else Exponential
    return cls(float(rest[key]))


def cdf(m: Margin, x):
    return m.cdf(x)


def quantile(m: Margin, u):
    return m.quantile(u)


def mean(m: Margin) -> float:
    return m.mean()
