"""Input distributions: density, gradient, sampling, CDFs, truncation.

Three spec shapes cover the benchmarks: products of independent univariates,
multivariate Gaussians, and factorized chains whose factor locations may
reference earlier variables (e.g. T2(0, 0.5) * N(x, 0.5) * N(x, 0.5)).

Convention: the second parameter of Gaussian(loc, scale) and StudentT(dof,
loc, scale) is the standard deviation (scale), never the variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy import special

from paisc.boxes import Box
from paisc.rng import RngStream, as_generator

_LOG_2PI = math.log(2.0 * math.pi)

# Mass below which a truncation interval is considered empty.
MIN_TRUNCATION_MASS = 1e-300

# Draw count for the sampled covariance fallback.
COVARIANCE_SAMPLE_SIZE = 100

_DEFAULT_COV_STREAM = RngStream(0x5EEDC0F, 0)


class EmptyTruncationError(ValueError):
    pass


class IntractableCdfError(ValueError):
    """Raised where a closed-form CDF would be required but does not exist."""


# ---------------------------------------------------------------------------
# Scalar family math (vectorized over x; loc may be an array for chains)


def _gauss_logpdf(x, loc, scale):
    z = (x - loc) / scale
    return -0.5 * _LOG_2PI - math.log(scale) - 0.5 * z * z


def _gauss_grad(x, loc, scale):
    return -(x - loc) / (scale * scale)


def _t_logpdf(x, loc, scale, dof):
    z = (x - loc) / scale
    const = (
        math.lgamma(0.5 * (dof + 1.0))
        - math.lgamma(0.5 * dof)
        - 0.5 * math.log(dof * math.pi)
        - math.log(scale)
    )
    return const - 0.5 * (dof + 1.0) * np.log1p(z * z / dof)


def _t_grad(x, loc, scale, dof):
    z = (x - loc) / scale
    return -(dof + 1.0) * z / (dof + z * z) / scale


# ---------------------------------------------------------------------------
# Univariate families


@dataclass(frozen=True)
class Gaussian:
    loc: float
    scale: float

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    def log_pdf(self, x):
        return _gauss_logpdf(np.asarray(x, dtype=float), self.loc, self.scale)

    def grad_log_pdf(self, x):
        return _gauss_grad(np.asarray(x, dtype=float), self.loc, self.scale)

    def cdf(self, t):
        return special.ndtr((np.asarray(t, dtype=float) - self.loc) / self.scale)

    def ppf(self, q):
        return self.loc + self.scale * special.ndtri(np.asarray(q, dtype=float))

    def sample(self, gen: np.random.Generator, n: int):
        return self.loc + self.scale * gen.standard_normal(n)

    def support(self) -> tuple[float, float]:
        return (-math.inf, math.inf)

    def mean(self) -> float:
        return self.loc

    def variance(self) -> float | None:
        return self.scale * self.scale


@dataclass(frozen=True)
class StudentT:
    dof: float
    loc: float
    scale: float

    def __post_init__(self):
        if not self.dof > 0:
            raise ValueError("dof must be positive")
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    def log_pdf(self, x):
        return _t_logpdf(np.asarray(x, dtype=float), self.loc, self.scale, self.dof)

    def grad_log_pdf(self, x):
        return _t_grad(np.asarray(x, dtype=float), self.loc, self.scale, self.dof)

    def cdf(self, t):
        z = (np.asarray(t, dtype=float) - self.loc) / self.scale
        return special.stdtr(self.dof, z)

    def ppf(self, q):
        return self.loc + self.scale * special.stdtrit(self.dof, np.asarray(q, dtype=float))

    def sample(self, gen: np.random.Generator, n: int):
        return self.loc + self.scale * gen.standard_t(self.dof, n)

    def support(self) -> tuple[float, float]:
        return (-math.inf, math.inf)

    def mean(self) -> float:
        return self.loc

    def variance(self) -> float | None:
        if self.dof > 2:
            return self.scale * self.scale * self.dof / (self.dof - 2.0)
        return None  # undefined/infinite: callers fall back to sampling


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("uniform needs lo < hi")

    def log_pdf(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.lo) & (x <= self.hi)
        return np.where(inside, -math.log(self.hi - self.lo), -math.inf)

    def grad_log_pdf(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def cdf(self, t):
        t = np.asarray(t, dtype=float)
        return np.clip((t - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    def ppf(self, q):
        return self.lo + (self.hi - self.lo) * np.asarray(q, dtype=float)

    def sample(self, gen: np.random.Generator, n: int):
        return self.lo + (self.hi - self.lo) * gen.random(n)

    def support(self) -> tuple[float, float]:
        return (self.lo, self.hi)

    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def variance(self) -> float | None:
        w = self.hi - self.lo
        return w * w / 12.0


@dataclass(frozen=True)
class TruncatedGaussian:
    loc: float
    scale: float
    lo: float
    hi: float

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        if not self.lo < self.hi:
            raise ValueError("truncation needs lo < hi")
        if self._mass() < MIN_TRUNCATION_MASS:
            raise ValueError("truncation interval carries no probability mass")

    def _z(self, t):
        return (np.asarray(t, dtype=float) - self.loc) / self.scale

    def _mass(self) -> float:
        return float(special.ndtr(self._z(self.hi)) - special.ndtr(self._z(self.lo)))

    def log_pdf(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.lo) & (x <= self.hi)
        base = _gauss_logpdf(x, self.loc, self.scale) - math.log(self._mass())
        return np.where(inside, base, -math.inf)

    def grad_log_pdf(self, x):
        return _gauss_grad(np.asarray(x, dtype=float), self.loc, self.scale)

    def cdf(self, t):
        lo_c = special.ndtr(self._z(self.lo))
        return np.clip((special.ndtr(self._z(t)) - lo_c) / self._mass(), 0.0, 1.0)

    def ppf(self, q):
        lo_c = special.ndtr(self._z(self.lo))
        return self.loc + self.scale * special.ndtri(
            lo_c + np.asarray(q, dtype=float) * self._mass()
        )

    def sample(self, gen: np.random.Generator, n: int):
        return _truncated_gauss_draw(gen, self.loc, self.scale, self.lo, self.hi, n)

    def support(self) -> tuple[float, float]:
        return (self.lo, self.hi)

    def mean(self) -> float:
        a, b = self._z(self.lo), self._z(self.hi)
        z = self._mass()
        phi = lambda t: math.exp(-0.5 * t * t) / math.sqrt(2.0 * math.pi)
        return self.loc + self.scale * (phi(a) - phi(b)) / z

    def variance(self) -> float | None:
        a, b = self._z(self.lo), self._z(self.hi)
        z = self._mass()
        phi = lambda t: math.exp(-0.5 * t * t) / math.sqrt(2.0 * math.pi)
        da = a * phi(a) if math.isfinite(a) else 0.0
        db = b * phi(b) if math.isfinite(b) else 0.0
        r = (phi(a) - phi(b)) / z
        return self.scale * self.scale * (1.0 + (da - db) / z - r * r)


Univariate = Union[Gaussian, StudentT, Uniform, TruncatedGaussian]


def _truncated_gauss_draw(gen, loc, scale, lo, hi, n):
    """Inverse-CDF draws from a Gaussian restricted to [lo, hi], tail-stable."""
    a = (lo - loc) / scale
    b = (hi - loc) / scale
    u = gen.random(n)
    if a >= 0:  # right tail: work with survival function for precision
        sa, sb = special.ndtr(-a), special.ndtr(-b)
        s = sa + u * (sb - sa)
        return loc - scale * special.ndtri(s)
    if b <= 0:  # left tail, mirrored
        ca, cb = special.ndtr(a), special.ndtr(b)
        return loc + scale * special.ndtri(ca + u * (cb - ca))
    ca, cb = special.ndtr(a), special.ndtr(b)
    return loc + scale * special.ndtri(ca + u * (cb - ca))


# ---------------------------------------------------------------------------
# Composite specs


def _as_points(x, dim: int) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    if np.isnan(arr).any():
        raise ValueError("NaN in evaluation point")
    if arr.ndim == 1:
        if arr.shape[0] != dim:
            raise ValueError(f"expected a point of dimension {dim}")
        return arr[None, :], True
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise ValueError(f"expected points of dimension {dim}")
    return arr, False


@dataclass(frozen=True)
class IndependentProduct:
    components: tuple[Univariate, ...]

    def __post_init__(self):
        if not self.components:
            raise ValueError("need at least one component")

    @property
    def dim(self) -> int:
        return len(self.components)

    def log_pdf(self, x):
        pts, single = _as_points(x, self.dim)
        total = np.zeros(pts.shape[0])
        for i, comp in enumerate(self.components):
            total = total + comp.log_pdf(pts[:, i])
        return total[0] if single else total

    def grad_log_pdf(self, x):
        pts, single = _as_points(x, self.dim)
        _require_interior(self, pts)
        out = np.empty_like(pts)
        for i, comp in enumerate(self.components):
            out[:, i] = comp.grad_log_pdf(pts[:, i])
        return out[0] if single else out

    def sample(self, rng, n: int):
        gen = as_generator(rng)
        out = np.empty((n, self.dim))
        for i, comp in enumerate(self.components):
            out[:, i] = comp.sample(gen, n)
        return out

    def support_mask(self, pts: np.ndarray) -> np.ndarray:
        mask = np.ones(pts.shape[0], dtype=bool)
        for i, comp in enumerate(self.components):
            lo, hi = comp.support()
            mask &= (pts[:, i] >= lo) & (pts[:, i] <= hi)
        return mask

    def interior_mask(self, pts: np.ndarray) -> np.ndarray:
        mask = np.ones(pts.shape[0], dtype=bool)
        for i, comp in enumerate(self.components):
            lo, hi = comp.support()
            mask &= (pts[:, i] > lo) & (pts[:, i] < hi)
        return mask

    def analytic_covariance(self) -> np.ndarray | None:
        variances = [comp.variance() for comp in self.components]
        if any(v is None for v in variances):
            return None
        return np.diag(np.array(variances, dtype=float))


@dataclass(frozen=True)
class MultivariateGaussian:
    mean: tuple[float, ...]
    cov: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        m = np.asarray(self.mean, dtype=float)
        c = np.asarray(self.cov, dtype=float)
        if c.shape != (m.size, m.size):
            raise ValueError("covariance shape does not match mean")
        if not np.allclose(c, c.T):
            raise ValueError("covariance must be symmetric")
        try:
            np.linalg.cholesky(c)
        except np.linalg.LinAlgError:
            raise ValueError("covariance must be positive definite") from None

    @property
    def dim(self) -> int:
        return len(self.mean)

    def _chol(self) -> np.ndarray:
        # tiny matrices: recomputing is cheap, but cache per instance anyway
        cached = getattr(self, "_chol_cache", None)
        if cached is None:
            cached = np.linalg.cholesky(np.asarray(self.cov, dtype=float))
            object.__setattr__(self, "_chol_cache", cached)
        return cached

    def log_pdf(self, x):
        from scipy.linalg import solve_triangular

        pts, single = _as_points(x, self.dim)
        L = self._chol()
        diff = pts - np.asarray(self.mean)
        y = solve_triangular(L, diff.T, lower=True)
        quad = np.sum(y * y, axis=0)
        logdet = 2.0 * np.sum(np.log(np.diag(L)))
        out = -0.5 * (self.dim * _LOG_2PI + logdet + quad)
        return out[0] if single else out

    def grad_log_pdf(self, x):
        from scipy.linalg import cho_solve

        pts, single = _as_points(x, self.dim)
        diff = pts - np.asarray(self.mean)
        out = -cho_solve((self._chol(), True), diff.T).T
        return out[0] if single else out

    def sample(self, rng, n: int):
        gen = as_generator(rng)
        z = gen.standard_normal((n, self.dim))
        return np.asarray(self.mean) + z @ self._chol().T

    def support_mask(self, pts: np.ndarray) -> np.ndarray:
        return np.ones(pts.shape[0], dtype=bool)

    interior_mask = support_mask

    def analytic_covariance(self) -> np.ndarray | None:
        return np.asarray(self.cov, dtype=float)


@dataclass(frozen=True)
class ChainFactor:
    """One factor of a factorized chain.

    loc_ref indexes an earlier variable whose sampled value replaces the
    base family's location parameter; None keeps the base location.
    """

    base: Univariate
    loc_ref: int | None = None

    def __post_init__(self):
        if self.loc_ref is not None and not isinstance(self.base, (Gaussian, StudentT)):
            raise ValueError("location references need a location-scale family")


@dataclass(frozen=True)
class FactorizedChain:
    factors: tuple[ChainFactor, ...]

    def __post_init__(self):
        for i, f in enumerate(self.factors):
            if f.loc_ref is not None and not (0 <= f.loc_ref < i):
                raise ValueError("factor locations may only reference earlier variables")

    @property
    def dim(self) -> int:
        return len(self.factors)

    def _loc(self, i: int, pts: np.ndarray):
        f = self.factors[i]
        return f.base.loc if f.loc_ref is None else pts[:, f.loc_ref]

    def log_pdf(self, x):
        pts, single = _as_points(x, self.dim)
        total = np.zeros(pts.shape[0])
        for i, f in enumerate(self.factors):
            loc = self._loc(i, pts)
            base = f.base
            if isinstance(base, Gaussian):
                total = total + _gauss_logpdf(pts[:, i], loc, base.scale)
            elif isinstance(base, StudentT):
                total = total + _t_logpdf(pts[:, i], loc, base.scale, base.dof)
            else:
                total = total + base.log_pdf(pts[:, i])
        return total[0] if single else total

    def grad_log_pdf(self, x):
        pts, single = _as_points(x, self.dim)
        _require_interior(self, pts)
        out = np.zeros_like(pts)
        for i, f in enumerate(self.factors):
            loc = self._loc(i, pts)
            base = f.base
            if isinstance(base, Gaussian):
                g = _gauss_grad(pts[:, i], loc, base.scale)
            elif isinstance(base, StudentT):
                g = _t_grad(pts[:, i], loc, base.scale, base.dof)
            else:
                g = base.grad_log_pdf(pts[:, i])
            out[:, i] += g
            if f.loc_ref is not None:
                out[:, f.loc_ref] -= g  # d(logf)/d(loc) = -d(logf)/dx
        return out[0] if single else out

    def sample(self, rng, n: int):
        gen = as_generator(rng)
        out = np.empty((n, self.dim))
        for i, f in enumerate(self.factors):
            base = f.base
            loc = self._loc(i, out)
            if isinstance(base, Gaussian):
                out[:, i] = loc + base.scale * gen.standard_normal(n)
            elif isinstance(base, StudentT):
                out[:, i] = loc + base.scale * gen.standard_t(base.dof, n)
            else:
                out[:, i] = base.sample(gen, n)
        return out

    def support_mask(self, pts: np.ndarray) -> np.ndarray:
        mask = np.ones(pts.shape[0], dtype=bool)
        for i, f in enumerate(self.factors):
            if f.loc_ref is None:
                lo, hi = f.base.support()
                mask &= (pts[:, i] >= lo) & (pts[:, i] <= hi)
        return mask

    def interior_mask(self, pts: np.ndarray) -> np.ndarray:
        mask = np.ones(pts.shape[0], dtype=bool)
        for i, f in enumerate(self.factors):
            if f.loc_ref is None:
                lo, hi = f.base.support()
                mask &= (pts[:, i] > lo) & (pts[:, i] < hi)
        return mask

    def analytic_covariance(self) -> np.ndarray | None:
        return None


DistributionSpec = Union[IndependentProduct, MultivariateGaussian, FactorizedChain]


def _require_interior(d, pts: np.ndarray) -> None:
    if not d.interior_mask(pts).all():
        raise ValueError("gradient requested on or outside the support boundary")


# ---------------------------------------------------------------------------
# Module-level operation surface


def log_pdf(d, x):
    return d.log_pdf(x)


def grad_log_pdf(d, x):
    return d.grad_log_pdf(x)


def sample(d, rng, n: int):
    return d.sample(rng, n)


def cdf(u: Univariate, t):
    return u.cdf(t)


def sample_truncated(u: Univariate, lo: float, hi: float, rng) -> float:
    return float(sample_truncated_batch(u, lo, hi, rng, 1)[0])


def sample_truncated_batch(u: Univariate, lo: float, hi: float, rng, n: int) -> np.ndarray:
    """Inverse-CDF draws from u restricted to [lo, hi]."""
    if not lo < hi:
        raise ValueError("truncation needs lo < hi")
    s_lo, s_hi = u.support()
    lo, hi = max(lo, s_lo), min(hi, s_hi)
    if not lo < hi:
        raise EmptyTruncationError("truncation interval outside the support")
    gen = as_generator(rng)
    if isinstance(u, (Gaussian, TruncatedGaussian)):
        # base-Gaussian truncation; the base's own bounds were intersected above
        loc, scale = u.loc, u.scale
        a, b = (lo - loc) / scale, (hi - loc) / scale
        # evaluate the interval mass in whichever tail is better conditioned
        mass = special.ndtr(-a) - special.ndtr(-b) if a >= 0 else (
            special.ndtr(b) - special.ndtr(a)
        )
        if mass < MIN_TRUNCATION_MASS:
            raise EmptyTruncationError("empty truncation")
        return _truncated_gauss_draw(gen, loc, scale, lo, hi, n)
    c_lo = float(u.cdf(lo))
    c_hi = float(u.cdf(hi))
    if c_hi - c_lo < MIN_TRUNCATION_MASS:
        raise EmptyTruncationError("empty truncation")
    q = c_lo + gen.random(n) * (c_hi - c_lo)
    return np.asarray(u.ppf(q), dtype=float)


def covariance_of(d: DistributionSpec, rng: RngStream | None = None) -> np.ndarray:
    """Input covariance: analytic where the family permits, else estimated
    from exactly COVARIANCE_SAMPLE_SIZE draws."""
    analytic = d.analytic_covariance()
    if analytic is not None:
        return analytic
    stream = rng if rng is not None else _DEFAULT_COV_STREAM
    draws = d.sample(stream, COVARIANCE_SAMPLE_SIZE)
    cov = np.cov(draws, rowvar=False)
    cov = np.atleast_2d(cov)
    return 0.5 * (cov + cov.T)


def needs_sampled_covariance(d: DistributionSpec) -> bool:
    return d.analytic_covariance() is None


def box_support(d: DistributionSpec, box: Box) -> bool:
    """True if the box lies inside the support (used for sanity checks only)."""
    lo = np.array([iv.lo for iv in box.intervals])
    hi = np.array([iv.hi for iv in box.intervals])
    return bool(d.support_mask(lo[None, :]).all() and d.support_mask(hi[None, :]).all())


def correlation_groups(d: DistributionSpec, names: Sequence[str]) -> list[set[str]]:
    """Variable groups made dependent by the distribution itself."""
    if isinstance(d, MultivariateGaussian):
        return [set(names)] if d.dim > 1 else []
    if isinstance(d, FactorizedChain):
        groups: list[set[int]] = []
        for i, f in enumerate(d.factors):
            if f.loc_ref is not None:
                merged = {i, f.loc_ref}
                rest = []
                for g in groups:
                    if g & merged:
                        merged |= g
                    else:
                        rest.append(g)
                groups = rest + [merged]
        return [{names[i] for i in g} for g in groups]
    return []
