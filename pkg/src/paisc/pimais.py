"""Parallel adaptive importance sampling for constrained targets.

N MCMC chains (random-walk Metropolis-Hastings, optionally with a truncated
proposal kernel, or Hamiltonian Monte Carlo) explore the constrained input
density p(x)*1_C(x). At every iteration the chain states parameterize an
equally weighted Gaussian mixture proposal with shared covariance; M draws
per sub-proposal are weighted by the full-mixture density (deterministic
mixture weighting), and the average weight over all iterations estimates the
constraint's satisfaction probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import special
from scipy.linalg import solve_triangular

from paisc import kernels
from paisc.boxes import Box
from paisc.constraints import ConstraintAst
from paisc.distributions import covariance_of, needs_sampled_covariance
from paisc.estimators import EstimateReport
from paisc.intervals import SEED_ACCURACY, bounding_box, dfs_feasible_boxes
from paisc.rng import RngStream

_LOG_2PI = math.log(2.0 * math.pi)

# Feasible-seed search: DFS box budget, then rejection sampling from p.
SEED_MAX_SOLUTIONS = 256
REJECTION_FALLBACK_DRAWS = 100_000

# Warmup acceptance-rate window for step-size adaptation.
ADAPT_WINDOW = 100


class SeedingError(RuntimeError):
    """No feasible chain seed could be found; the constraint may be infeasible."""


@dataclass
class PimaisConfig:
    """Knobs for the adaptive importance sampling loop (paper defaults)."""

    n_chains: int = 100
    samples_per_proposal: int = 5
    iterations: int | None = None  # derived from budget when None
    warmup: int = 500
    rwmh_scale: float = 1.0
    proposal_cov_factor: float = 0.5
    hmc_steps: int = 20
    hmc_step_size: float = 0.1
    kernel: str = "rwmh"  # rwmh | rwmh-truncated | hmc
    seed_strategy: str = "diverse+resample"  # single | diverse | diverse+resample
    budget: int = 1_000_000

    def __post_init__(self):
        if min(self.n_chains, self.samples_per_proposal, self.warmup + 1) < 1:
            raise ValueError("n_chains, samples_per_proposal must be >= 1, warmup >= 0")
        if self.iterations is not None and self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.rwmh_scale <= 0 or self.hmc_step_size <= 0 or self.hmc_steps < 1:
            raise ValueError("kernel step sizes must be positive")
        if self.proposal_cov_factor <= 0:
            raise ValueError("proposal_cov_factor must be positive")
        if self.kernel not in ("rwmh", "rwmh-truncated", "hmc"):
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if self.seed_strategy not in ("single", "diverse", "diverse+resample"):
            raise ValueError(f"unknown seed strategy {self.seed_strategy!r}")


class TargetDensity:
    """The constrained, unnormalized target p(x)*1_C(x)."""

    def __init__(self, c: ConstraintAst, p):
        self.c = c
        self.p = p

    def log_bar(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        out = np.full(pts.shape[0], -np.inf)
        ok = self.c.indicator(pts).astype(bool)
        if ok.any():
            out[ok] = self.p.log_pdf(pts[ok])
        return out

    def feasible(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return self.c.indicator(pts).astype(bool) & self.p.support_mask(pts)

    def grad_log(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Gradient of log p (the indicator contributes no gradient); points
        outside the open support get a zero gradient and a False mask."""
        pts = np.atleast_2d(pts)
        mask = self.p.interior_mask(pts)
        out = np.zeros_like(pts)
        if mask.any():
            out[mask] = self.p.grad_log_pdf(pts[mask])
        return out, mask


@dataclass
class ChainState:
    """One MCMC chain: feasible position, its log target, current RWMH scale."""

    position: np.ndarray
    log_target: float
    scale: float


class MixtureProposal:
    """Equally weighted Gaussian mixture: one mean per chain, shared covariance."""

    def __init__(self, means: np.ndarray, cov: np.ndarray):
        self.means = np.atleast_2d(np.asarray(means, dtype=float))
        self.cov = np.asarray(cov, dtype=float)
        self.chol = np.linalg.cholesky(self.cov)
        d = self.cov.shape[0]
        self.chol_inv = solve_triangular(self.chol, np.eye(d), lower=True)
        self.log_norm = -0.5 * d * _LOG_2PI - float(np.sum(np.log(np.diag(self.chol))))

    @property
    def n_components(self) -> int:
        return self.means.shape[0]

    def log_density(self, x: np.ndarray) -> np.ndarray:
        x = np.ascontiguousarray(np.atleast_2d(x), dtype=float)
        return kernels.mixture_logpdf(x, self.means, self.chol_inv, self.log_norm)

    def sample_per_component(self, rng: RngStream, m: int) -> np.ndarray:
        """m draws from every sub-proposal, ordered component-major."""
        gen = rng.generator()
        n, d = self.means.shape
        z = gen.standard_normal((n, m, d))
        return (self.means[:, None, :] + z @ self.chol.T).reshape(n * m, d)

    def sample(self, rng: RngStream, n: int) -> np.ndarray:
        gen = rng.generator()
        comp = gen.integers(0, self.n_components, n)
        z = gen.standard_normal((n, self.means.shape[1]))
        return self.means[comp] + z @ self.chol.T


def mixture_log_density(q: MixtureProposal, x: np.ndarray) -> np.ndarray:
    """Log of the averaged component densities, via stable log-sum-exp."""
    return q.log_density(x)


def adapt_scale(acceptance_rate, sigma):
    """Warmup-only multiplicative step scale update, driving acceptance
    towards the [0.2, 0.5] band."""
    acc = np.asarray(acceptance_rate, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    factor = np.where(
        acc < 0.05, 0.5,
        np.where(acc < 0.2, 0.9, np.where(acc > 0.95, 2.0, np.where(acc > 0.5, 1.1, 1.0))),
    )
    out = sigma * factor
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Kernel steps (vectorized across chains)


def _truncnorm_draw(gen, centers, sigmas, lo, hi):
    """Per-dimension truncated Gaussian proposals around `centers`."""
    a = special.ndtr((lo[None, :] - centers) / sigmas[:, None])
    b = special.ndtr((hi[None, :] - centers) / sigmas[:, None])
    u = gen.random(centers.shape)
    q = np.clip(a + u * (b - a), 1e-320, 1.0 - 1e-16)
    z = special.ndtri(q)
    return np.clip(centers + sigmas[:, None] * z, lo[None, :], hi[None, :])


def _log_window_mass(centers, sigmas, lo, hi):
    a = special.ndtr((lo[None, :] - centers) / sigmas[:, None])
    b = special.ndtr((hi[None, :] - centers) / sigmas[:, None])
    return np.log(np.maximum(b - a, 1e-300)).sum(axis=1)


def _rwmh_advance(target, positions, logp, sigmas, kernel_box, gen):
    if kernel_box is None:
        z = gen.standard_normal(positions.shape)
        proposals = positions + sigmas[:, None] * z
        log_corr = 0.0
    else:
        lo = np.array([iv.lo for iv in kernel_box.intervals])
        hi = np.array([iv.hi for iv in kernel_box.intervals])
        proposals = _truncnorm_draw(gen, positions, sigmas, lo, hi)
        # Hastings correction: ratio of truncation normalizers
        log_corr = _log_window_mass(positions, sigmas, lo, hi) - _log_window_mass(
            proposals, sigmas, lo, hi
        )
    logp_prop = target.log_bar(proposals)
    log_alpha = logp_prop - logp + log_corr
    accept = np.log(gen.random(positions.shape[0])) < log_alpha
    positions = np.where(accept[:, None], proposals, positions)
    logp = np.where(accept, logp_prop, logp)
    return positions, logp, accept


def leapfrog(grad_fn, x0: np.ndarray, rho0: np.ndarray, step_size: float, n_steps: int):
    """Symplectic leapfrog integration of the Hamiltonian dynamics."""
    x = x0.copy()
    rho = rho0.copy()
    g = grad_fn(x)
    rho = rho + 0.5 * step_size * g
    for step in range(n_steps):
        x = x + step_size * rho
        g = grad_fn(x)
        if step < n_steps - 1:
            rho = rho + step_size * g
    rho = rho + 0.5 * step_size * g
    return x, rho


def _hmc_advance(target, positions, logp, step_size, n_steps, gen):
    n = positions.shape[0]
    rho0 = gen.standard_normal(positions.shape)
    h0 = 0.5 * np.sum(rho0 * rho0, axis=1) - logp
    violated = np.zeros(n, dtype=bool)

    x = positions.copy()
    rho = rho0.copy()
    g, inside = target.grad_log(x)
    violated |= ~inside
    rho = rho + 0.5 * step_size * g
    for step in range(n_steps):
        x = x + step_size * rho
        violated |= ~target.feasible(x)
        g, inside = target.grad_log(x)
        violated |= ~inside
        if step < n_steps - 1:
            rho = rho + step_size * g
    rho = rho + 0.5 * step_size * g

    logp_prop = target.log_bar(x)
    h1 = 0.5 * np.sum(rho * rho, axis=1) - logp_prop
    log_alpha = np.where(violated, -np.inf, h0 - h1)
    accept = np.log(gen.random(n)) < log_alpha
    positions = np.where(accept[:, None], x, positions)
    logp = np.where(accept, logp_prop, logp)
    return positions, logp, accept


def rwmh_step(
    state: ChainState, target: TargetDensity, kernel_box: Box | None, rng: RngStream
) -> ChainState:
    """One random-walk Metropolis-Hastings transition for a single chain."""
    pos = state.position[None, :]
    logp = np.array([state.log_target])
    sigmas = np.array([state.scale])
    pos, logp, _ = _rwmh_advance(target, pos, logp, sigmas, kernel_box, rng.generator())
    return replace(state, position=pos[0], log_target=float(logp[0]))


def hmc_step(
    state: ChainState, target: TargetDensity, cfg: PimaisConfig, rng: RngStream
) -> ChainState:
    """One Hamiltonian Monte Carlo transition for a single chain."""
    pos = state.position[None, :]
    logp = np.array([state.log_target])
    pos, logp, _ = _hmc_advance(
        target, pos, logp, cfg.hmc_step_size, cfg.hmc_steps, rng.generator()
    )
    return replace(state, position=pos[0], log_target=float(logp[0]))


# ---------------------------------------------------------------------------
# Seeding


def seed_chains(
    c: ConstraintAst, p, cfg: PimaisConfig, rng: RngStream
) -> np.ndarray:
    """Initial feasible positions for the N chains.

    Feasible candidates come from the centers of depth-first feasible boxes;
    if the interval search finds none, rejection sampling from p is tried as a
    fallback. Candidates with zero input density are discarded (a chain can
    never leave such a point).
    """
    boxes = dfs_feasible_boxes(c, SEED_ACCURACY, max_solutions=SEED_MAX_SOLUTIONS)
    candidates = [b.midpoint() for b in boxes]
    if candidates:
        pts = np.asarray(candidates)
        ok = c.indicator(pts).astype(bool) & np.isfinite(p.log_pdf(pts))
        candidates = [x for x, keep in zip(candidates, ok) if keep]
    if not candidates:
        gen = rng.derive(9).generator()
        remaining = REJECTION_FALLBACK_DRAWS
        while remaining > 0 and len(candidates) < SEED_MAX_SOLUTIONS:
            n = min(16384, remaining)
            pts = p.sample(gen, n)
            hits = c.indicator(pts).astype(bool) & np.isfinite(p.log_pdf(pts))
            candidates.extend(pts[hits])
            remaining -= n
    if not candidates:
        raise SeedingError(
            "no feasible seed found by interval search or rejection sampling; "
            "the constraint may be infeasible"
        )

    centers = np.asarray(candidates)
    n_found = centers.shape[0]
    n_chains = cfg.n_chains
    if cfg.seed_strategy == "single":
        return np.tile(centers[0], (n_chains, 1))
    if cfg.seed_strategy == "diverse":
        if n_found >= n_chains:  # spread evenly across the discovery order
            idx = [(i * n_found) // n_chains for i in range(n_chains)]
        else:
            idx = [i % n_found for i in range(n_chains)]
        return centers[np.asarray(idx)]
    # diverse+resample: categorical by input-density weight
    logw = p.log_pdf(centers)
    logw = logw - logw.max()
    w = np.exp(logw)
    w_sum = w.sum()
    probs = w / w_sum if w_sum > 0 else np.full(n_found, 1.0 / n_found)
    gen = rng.derive(8).generator()
    idx = gen.choice(n_found, size=n_chains, p=probs)
    return centers[idx]


# ---------------------------------------------------------------------------
# The estimation loop


def _proposal_chol(cov: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        jitter = 1e-12 * max(float(np.trace(cov)), 1.0)
        return np.linalg.cholesky(cov + jitter * np.eye(cov.shape[0]))


def pimais_run(
    c: ConstraintAst, p, cfg: PimaisConfig, rng: RngStream
) -> EstimateReport:
    """Run the full adaptive importance sampling estimate for one constraint.

    The sample budget pays for the covariance estimate (when sampled), the
    warmup steps of all chains, and T iterations of N*M weighted draws; T is
    derived from the budget unless pinned in the config.
    """
    n_chains = cfg.n_chains
    m_draws = cfg.samples_per_proposal
    cov_cost = 100 if needs_sampled_covariance(p) else 0
    lam = covariance_of(p, rng.derive(3))
    cov = cfg.proposal_cov_factor * np.atleast_2d(lam)

    overhead = cfg.warmup * n_chains + cov_cost
    per_iter = n_chains * m_draws
    if cfg.iterations is None:
        iterations = (cfg.budget - overhead) // per_iter
        if iterations < 1:
            raise ValueError(
                f"budget {cfg.budget} cannot cover warmup ({overhead}) plus one "
                f"iteration of {per_iter} draws"
            )
        iterations = int(iterations)
    else:
        iterations = cfg.iterations

    target = TargetDensity(c, p)
    positions = seed_chains(c, p, cfg, rng.derive(0))
    logp = target.log_bar(positions)
    assert np.isfinite(logp).all(), "chain seeds must have positive target density"

    kernel_box = None
    if cfg.kernel == "rwmh-truncated":
        kernel_box = bounding_box(c)
        if kernel_box is None:
            raise SeedingError("constraint contracted to an empty box")

    sigmas = np.full(n_chains, cfg.rwmh_scale)

    def advance(step_index: int):
        nonlocal positions, logp
        gen = rng.derive(1, step_index).generator()
        if cfg.kernel == "hmc":
            positions, logp, accepted = _hmc_advance(
                target, positions, logp, cfg.hmc_step_size, cfg.hmc_steps, gen
            )
        else:
            positions, logp, accepted = _rwmh_advance(
                target, positions, logp, sigmas, kernel_box, gen
            )
        return accepted

    acc_count = np.zeros(n_chains)
    for step in range(cfg.warmup):
        accepted = advance(step)
        acc_count += accepted
        if (step + 1) % ADAPT_WINDOW == 0 and cfg.kernel != "hmc":
            sigmas = adapt_scale(acc_count / ADAPT_WINDOW, sigmas)
            acc_count[:] = 0.0

    chol = _proposal_chol(cov)
    d = cov.shape[0]
    chol_inv = solve_triangular(chol, np.eye(d), lower=True)
    log_norm = -0.5 * d * _LOG_2PI - float(np.sum(np.log(np.diag(chol))))

    weights = np.empty((iterations, per_iter))
    trace: list[tuple[int, float]] = []
    consumed = overhead
    running_sum = 0.0
    for t in range(iterations):
        advance(cfg.warmup + t)
        assert np.isfinite(logp).all(), "chain left the feasible region"
        means = positions.copy()
        gen = rng.derive(2, t).generator()
        z = gen.standard_normal((n_chains, m_draws, d))
        draws = (means[:, None, :] + z @ chol.T).reshape(per_iter, d)
        draws = np.ascontiguousarray(draws)
        log_q = kernels.mixture_logpdf(draws, means, chol_inv, log_norm)
        log_p_bar = target.log_bar(draws)
        w = np.where(np.isneginf(log_p_bar), 0.0, np.exp(log_p_bar - log_q))
        assert np.isfinite(w).all(), "importance weight overflow"
        weights[t] = w
        running_sum += float(w.sum())
        consumed += per_iter
        trace.append((consumed, running_sum / ((t + 1) * per_iter)))

    flat = weights.ravel()
    mean = float(flat.mean())
    var_w = float(flat.var(ddof=1)) if flat.size > 1 else 0.0
    return EstimateReport(
        mean=mean,
        variance=var_w / flat.size,
        n_samples=consumed,
        trace=trace,
    )
