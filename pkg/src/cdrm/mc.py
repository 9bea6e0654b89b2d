"""Monte Carlo oracle: copula sampling, empirical estimators and coherence probes.

Every batch is drawn from numpy's PCG64 generator seeded with
``SeedSequence([seed, stream])``, so a ``(seed, stream)`` pair always
reproduces the same numbers whatever else runs in parallel.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .aggregate import PortfolioModel
from .copula import ArchimedeanCopula, Frank, Gumbel, conditional_quantile
from .distortion import Distortion
from .errors import DomainError, SamplerError, UnsupportedDimensionError

RNG_ALGORITHM = f"numpy.random.PCG64 (numpy {np.__version__})"
_OPEN_LO = np.nextafter(0.0, 1.0)
_OPEN_HI = np.nextafter(1.0, 0.0)


def rng_for(seed: int, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed) & (2**64 - 1), int(stream)])))


@dataclass(frozen=True, eq=False)
class SampleBatch:
    seed: int
    n: int
    uniforms: np.ndarray
    losses: np.ndarray | None = None
    sums: np.ndarray | None = None
    model_hash: str | None = None

    def __eq__(self, other):
        if not isinstance(other, SampleBatch):
            return NotImplemented
        def same(a, b):
            return (a is None and b is None) or (a is not None and b is not None and np.array_equal(a, b))
        return (self.seed == other.seed and self.n == other.n and same(self.uniforms, other.uniforms)
                and same(self.losses, other.losses) and same(self.sums, other.sums))


def model_hash(model: PortfolioModel) -> str:
    spec = {
        "margins": [m.to_spec() for m in model.margins],
        "copula": model.copula.generator.to_spec(),
        "dimension": model.copula.dimension,
        "copula_distortion": None if model.copula_distortion is None else model.copula_distortion.to_spec(),
        "tail_distortion": model.tail_distortion.to_spec(),
    }
    return hashlib.sha256(json.dumps(spec, sort_keys=True).encode()).hexdigest()[:16]


def _frailty(c: ArchimedeanCopula, n: int, rng: np.random.Generator) -> tuple[np.ndarray, callable]:
    """Mixing variable and Laplace transform for the Marshall-Olkin construction."""
    g = c.generator
    th = c.clayton_theta
    if th is not None:
        v = rng.gamma(1.0 / th, 1.0, size=n)
        return v, lambda s: (1.0 + s) ** (-1.0 / th)
    if isinstance(g, Gumbel):
        a = 1.0 / g.alpha
        if a == 1.0:
            return np.ones(n), lambda s: np.exp(-s)
        # positive stable variable via Kanter's representation
        w = rng.uniform(0.0, math.pi, size=n)
        e = rng.exponential(size=n)
        v = (np.sin(a * w) / np.sin(w) ** (1 / a)) * (np.sin((1 - a) * w) / e) ** ((1 - a) / a)
        return v, lambda s: np.exp(-s**a)
    if isinstance(g, Frank) and g.beta > 0:
        p = -math.expm1(-g.beta)
        v = rng.logseries(p, size=n).astype(float)
        return v, lambda s: -np.log1p(-p * np.exp(-s)) / g.beta
    raise UnsupportedDimensionError(
        f"sampling in dimension {c.dimension} is available for Clayton-type, Gumbel and Frank(beta>0) only")


def sample_copula(c: ArchimedeanCopula, n: int, seed: int, stream: int = 0) -> SampleBatch:
    """Draw ``n`` points from ``c``.

    Bivariate copulas use conditional inversion: ``u1`` uniform, then ``u2``
    solving ``P(U2 <= u2 | U1 = u1) = w`` for an independent uniform ``w``
    (closed form for Clayton type, bisection otherwise).  Higher dimensions
    use the frailty construction where the family admits one.
    """
    if int(n) != n or n < 1:
        raise DomainError("n must be a positive integer", field="n")
    rng = rng_for(seed, stream)
    if c.dimension == 2:
        u1 = rng.uniform(size=n)
        w = rng.uniform(size=n)
        u1 = np.clip(u1, _OPEN_LO, _OPEN_HI)
        w = np.clip(w, _OPEN_LO, _OPEN_HI)
        if not c.generator.strict:
            raise SamplerError("conditional inversion needs a strict generator")
        u2 = np.asarray(conditional_quantile(c, w, u1, tol=1e-12), dtype=float)
        bad = ~np.isfinite(u2)
        if np.any(bad):
            i = int(np.argmax(bad))
            raise SamplerError(f"conditional inverse failed at (u1, w) = ({u1[i]}, {w[i]})")
        u = np.column_stack([u1, np.clip(u2, _OPEN_LO, _OPEN_HI)])
    else:
        v, laplace = _frailty(c, n, rng)
        e = rng.exponential(size=(n, c.dimension))
        u = np.clip(laplace(e / v[:, None]), _OPEN_LO, _OPEN_HI)
    return SampleBatch(seed=int(seed), n=int(n), uniforms=u)


def sample_losses(model: PortfolioModel, n: int, seed: int, stream: int = 0,
                  distorted: bool = False) -> SampleBatch:
    """Copula sample pushed through the margin quantiles; ``distorted`` uses the distorted copula."""
    c = model.distorted_copula if distorted else model.copula
    b = sample_copula(c, n, seed, stream)
    x = np.column_stack([m.quantile(b.uniforms[:, i]) for i, m in enumerate(model.margins)])
    z = x.sum(axis=1)
    return SampleBatch(seed=b.seed, n=b.n, uniforms=b.uniforms, losses=x, sums=z, model_hash=model_hash(model))


def empirical_cdf(values: np.ndarray, t) -> np.ndarray:
    v = np.sort(np.asarray(values, dtype=float))
    return np.searchsorted(v, np.asarray(t, dtype=float), side="right") / v.size


def _l_weights(psi: Distortion, n: int) -> np.ndarray:
    # weight of the i-th smallest value: psi((n-i+1)/n) - psi((n-i)/n)
    levels = np.asarray(psi(np.arange(n + 1) / n), dtype=float)
    return (levels[1:] - levels[:-1])[::-1]


def empirical_drm(sample, psi: Distortion) -> float:
    """L-statistic ``sum_i z_(i) [psi((n-i+1)/n) - psi((n-i)/n)]`` over the order statistics.

    ``sample`` is a :class:`SampleBatch` (its sums are used) or an array.
    """
    z = sample.sums if isinstance(sample, SampleBatch) else np.asarray(sample, dtype=float)
    z = np.sort(z)
    w = _l_weights(psi, z.size)
    return math.fsum(w * z)


@dataclass(frozen=True)
class TauEstimate:
    tau: float
    stderr: float
    ties: int


def empirical_kendall_tau(batch: SampleBatch | np.ndarray, max_n: int = 100_000) -> TauEstimate:
    """Kendall's tau of the first two columns with its asymptotic standard error.

    The standard error is ``2 sd(h) / sqrt(n)`` with ``h = 4 C_n - 2 u - 2 v + 1``
    the per-point projection of the U-statistic kernel, ``C_n`` being the
    empirical copula at each point (counted in O(n log n)).  Ties are
    excluded by the estimator and their count reported; continuous copulas
    should produce none.
    """
    u = batch.uniforms if isinstance(batch, SampleBatch) else np.asarray(batch, dtype=float)
    u = u[:max_n]
    x, y = u[:, 0], u[:, 1]
    n = x.size
    if n < 100:
        raise DomainError("empirical Kendall tau needs at least 100 points", field="n")
    ties = (n - np.unique(x).size) + (n - np.unique(y).size)
    # per-point concordance: 4 C_n(x_i, y_i) - 2 (u_i + v_i) + 1, C_n the empirical copula at the point
    order = np.argsort(x, kind="stable")
    ry = stats.rankdata(y[order], method="ordinal")
    below = _count_dominated(ry)
    if ties:
        tau = float(stats.kendalltau(x, y).statistic)
    else:
        # exact from the integer concordant-pair count
        pairs = n * (n - 1)
        tau = (4 * int(below.sum()) - pairs) / pairs
    cn = below / (n - 1)
    rx = np.arange(1, n + 1) / n
    rys = ry / n
    h = 4 * cn - 2 * (rx + rys) + 1
    stderr = 2.0 * float(np.std(h, ddof=1)) / math.sqrt(n)
    return TauEstimate(tau, stderr, int(ties))


def _count_dominated(ry: np.ndarray) -> np.ndarray:
    """For points sorted by x, count earlier points with smaller y (Fenwick tree)."""
    n = ry.size
    tree = np.zeros(n + 1, dtype=np.int64)
    out = np.empty(n, dtype=np.int64)
    ry = ry.astype(np.int64)
    for i in range(n):
        k, s = int(ry[i]) - 1, 0
        while k > 0:
            s += tree[k]
            k -= k & -k
        out[i] = s
        k = int(ry[i])
        while k <= n:
            tree[k] += 1
            k += k & -k
    return out


def batch_stderr(values: np.ndarray, n_batches: int = 20) -> float:
    """Batch-means standard error of the mean of an i.i.d. sample."""
    v = np.asarray(values, dtype=float)
    means = np.array([b.mean() for b in np.array_split(v, n_batches)])
    return float(np.std(means, ddof=1) / math.sqrt(n_batches))


@dataclass(frozen=True)
class AxiomCheck:
    name: str
    passed: bool
    lhs: float
    rhs: float
    tolerance: float
    note: str = ""


@dataclass(frozen=True)
class CoherenceReport:
    checks: tuple[AxiomCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> AxiomCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def _drm_stderr(z: np.ndarray, psi: Distortion, n_batches: int = 20) -> float:
    parts = np.array_split(z, n_batches)
    vals = np.array([empirical_drm(p, psi) for p in parts])
    # batch estimates are each based on n / n_batches points
    return float(np.std(vals, ddof=1) / math.sqrt(n_batches))


def coherence_probe(psi: Distortion, model: PortfolioModel, n: int, seed: int, truncation: float,
                    a: float = 2.0, b: float = 1.0, stream: int = 0) -> CoherenceReport:
    """Empirical checks of the four coherence axioms on one shared sample.

    H1 (bounded by the largest loss) is checked on losses truncated at
    ``truncation`` because untruncated Pareto losses have no maximum.
    H2 compares against the sample mean, H3 verifies affine equivariance of
    the estimator itself and H4 compares the sum with its two components.
    Violations are reported, never raised.
    """
    batch = sample_losses(model, n, seed, stream)
    x1, x2 = batch.losses[:, 0], batch.losses[:, 1]
    z = batch.sums
    checks = []

    zt = np.minimum(x1, truncation) + np.minimum(x2, truncation)
    pt = empirical_drm(zt, psi)
    checks.append(AxiomCheck("H1", pt <= zt.max() + 1e-12 * abs(zt.max()), pt, float(zt.max()), 0.0,
                             note=f"losses truncated at {truncation}"))

    pz = empirical_drm(z, psi)
    se_mean = batch_stderr(z)
    mean = math.fsum(z) / z.size
    checks.append(AxiomCheck("H2", pz >= mean - 3 * se_mean, pz, mean, 3 * se_mean))

    lhs = empirical_drm(a * z + b, psi)
    rhs = a * pz + b
    tol = 1e-10 * max(1.0, abs(rhs))
    checks.append(AxiomCheck("H3", abs(lhs - rhs) <= tol, lhs, rhs, tol, note=f"a={a}, b={b}"))

    p1, p2 = empirical_drm(x1, psi), empirical_drm(x2, psi)
    se = math.sqrt(_drm_stderr(z, psi) ** 2 + _drm_stderr(x1, psi) ** 2 + _drm_stderr(x2, psi) ** 2)
    checks.append(AxiomCheck("H4", pz <= p1 + p2 + 3 * se, pz, p1 + p2, 3 * se))
    return CoherenceReport(tuple(checks))


def replicate_drm(model: PortfolioModel, psi: Distortion | None, n: int, seed: int, replicates: int,
                  distorted: bool = False) -> np.ndarray:
    """Empirical DRM of the sum over independent streams ``0 .. replicates-1``."""
    psi = psi or model.tail_distortion
    return np.array([empirical_drm(sample_losses(model, n, seed, r, distorted), psi) for r in range(replicates)])


def write_batch_csv(batch: SampleBatch, path, extra_meta: dict | None = None) -> None:
    """CSV with a ``#`` metadata line followed by ``u1,u2,...,x1,x2,...,z`` columns."""
    d = batch.uniforms.shape[1]
    meta = {"seed": batch.seed, "n": batch.n, "model_hash": batch.model_hash, "rng": RNG_ALGORITHM}
    meta.update(extra_meta or {})
    cols = [f"u{i + 1}" for i in range(d)]
    data = [batch.uniforms]
    if batch.losses is not None:
        cols += [f"x{i + 1}" for i in range(d)] + ["z"]
        data += [batch.losses, batch.sums[:, None]]
    arr = np.hstack(data)
    with open(path, "w", newline="") as fh:
        fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in arr:
            w.writerow([repr(float(v)) for v in row])


def read_batch_csv(path) -> tuple[dict, list[str], np.ndarray]:
    with open(path) as fh:
        meta = json.loads(fh.readline()[2:])
        cols = fh.readline().strip().split(",")
        arr = np.loadtxt(fh, delimiter=",", ndmin=2)
    return meta, cols, arr
