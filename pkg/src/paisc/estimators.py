"""Baseline estimators and estimate algebra.

Direct Monte Carlo (hit-or-miss), stratified sampling over an interval
paving, plain importance sampling against an explicit proposal, plus the
composition rules for disjoint path conditions (sum) and independent
constraint slices (product), and the relative-absolute-error metric.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from paisc.boxes import Box
from paisc.constraints import ConstraintAst
from paisc.distributions import (
    IndependentProduct,
    IntractableCdfError,
    sample_truncated_batch,
)
from paisc.intervals import Paving
from paisc.rng import RngStream

_CHUNK = 65536

# Floor for per-outer-box sample allocation in stratified sampling, guarding
# against zero-variance illusions from single-sample boxes.
MIN_BOX_SAMPLES = 10

_NEGLIGIBLE_MASS = 1e-300


@dataclass
class EstimateReport:
    """Estimator output: mean, estimator variance, spent samples, trace.

    The trace lists (samples_used, running_mean) checkpoints so consumers can
    judge whether the estimate has stabilized before trusting the variance.
    """

    mean: float
    variance: float
    n_samples: int
    trace: list[tuple[int, float]] = field(default_factory=list)

    def __post_init__(self):
        if self.variance < 0:
            self.variance = 0.0

    def std_error(self) -> float:
        return float(np.sqrt(self.variance))

    def to_json_dict(self) -> dict:
        return {
            "mean": self.mean,
            "variance": self.variance,
            "n_samples": self.n_samples,
            "trace": [[int(n), float(m)] for n, m in self.trace],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    def csv_row(self, method: str, subject: str, seed: int, truth: float | None = None) -> str:
        r = "" if truth is None else repr(rae(self.mean, truth))
        return ",".join(
            [method, subject, str(seed), str(self.n_samples),
             repr(self.mean), repr(self.variance), r]
        )


class Proposal(Protocol):
    """Anything that can drive plain importance sampling."""

    def log_density(self, x: np.ndarray) -> np.ndarray: ...

    def sample(self, rng: RngStream, n: int) -> np.ndarray: ...


def dmc_estimate(
    c: ConstraintAst, p, budget: int, rng: RngStream, checkpoints: int = 50
) -> EstimateReport:
    """Hit-or-miss estimate: fraction of p-samples satisfying the constraint."""
    if budget < 1:
        raise ValueError("budget must be at least 1")
    gen = rng.generator()
    hits = 0
    done = 0
    trace: list[tuple[int, float]] = []
    step = max(budget // checkpoints, 1)
    next_mark = step
    while done < budget:
        n = min(_CHUNK, budget - done)
        pts = p.sample(gen, n)
        hits += int(c.indicator(pts).sum())
        done += n
        if done >= next_mark or done == budget:
            trace.append((done, hits / done))
            next_mark += step
    mean = hits / budget
    variance = mean * (1.0 - mean) / budget
    return EstimateReport(mean=mean, variance=variance, n_samples=budget, trace=trace)


def box_mass(p, b: Box) -> float:
    """Probability mass of an axis-aligned box under independent inputs."""
    if not isinstance(p, IndependentProduct):
        raise IntractableCdfError(
            "box mass needs a closed-form CDF; the input distribution is "
            "correlated or has no analytical CDF"
        )
    mass = 1.0
    for comp, iv in zip(p.components, b.intervals):
        mass *= float(comp.cdf(iv.hi) - comp.cdf(iv.lo))
    return min(max(mass, 0.0), 1.0)


def stratified_estimate(
    c: ConstraintAst, p, paving: Paving, budget: int, rng: RngStream
) -> EstimateReport:
    """Compose per-box truncated estimates, weighted by box mass.

    Inner boxes contribute their mass exactly; sampling happens only inside
    outer boxes, with the budget split proportionally to box mass (minimum
    MIN_BOX_SAMPLES each). Requires an exhaustive paving for unbiasedness.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    inner_mass = sum(box_mass(p, b) for b in paving.inner)
    outer = [(b, box_mass(p, b)) for b in paving.outer]
    outer = [(b, m) for b, m in outer if m > _NEGLIGIBLE_MASS]
    total_outer = sum(m for _, m in outer)

    mean = inner_mass
    variance = 0.0
    used = 0
    trace: list[tuple[int, float]] = []
    for i, (b, m) in enumerate(outer):
        n = max(MIN_BOX_SAMPLES, int(budget * m / total_outer)) if total_outer > 0 else MIN_BOX_SAMPLES
        box_rng = rng.derive(i)
        pts = np.empty((n, c.dim))
        for dim, (comp, iv) in enumerate(zip(p.components, b.intervals)):
            pts[:, dim] = sample_truncated_batch(comp, iv.lo, iv.hi, box_rng.derive(dim), n)
        sat = c.indicator(pts)
        frac = float(sat.mean())
        mean += m * frac
        variance += m * m * frac * (1.0 - frac) / n
        used += n
        trace.append((used, mean))
    if not trace:
        trace.append((0, mean))
    return EstimateReport(mean=mean, variance=variance, n_samples=used, trace=trace)


def is_estimate(
    c: ConstraintAst, p, proposal: Proposal, budget: int, rng: RngStream,
    checkpoints: int = 50,
) -> EstimateReport:
    """Plain importance sampling with weights p*1_C / q against `proposal`."""
    if budget < 1:
        raise ValueError("budget must be at least 1")
    w_sum = 0.0
    w2_sum = 0.0
    done = 0
    trace: list[tuple[int, float]] = []
    step = max(budget // checkpoints, 1)
    next_mark = step
    chunk_idx = 0
    while done < budget:
        n = min(_CHUNK, budget - done)
        pts = proposal.sample(rng.derive(chunk_idx), n)
        chunk_idx += 1
        log_q = proposal.log_density(pts)
        log_p = p.log_pdf(pts)
        sat = c.indicator(pts).astype(bool)
        w = np.where(sat, np.exp(log_p - log_q), 0.0)
        if not np.isfinite(w).all():
            raise FloatingPointError("non-finite importance weight (proposal too narrow)")
        w_sum += float(w.sum())
        w2_sum += float((w * w).sum())
        done += n
        if done >= next_mark or done == budget:
            trace.append((done, w_sum / done))
            next_mark += step
    mean = w_sum / budget
    var_w = (w2_sum - budget * mean * mean) / (budget - 1) if budget > 1 else 0.0
    return EstimateReport(
        mean=mean, variance=max(var_w, 0.0) / budget, n_samples=budget, trace=trace
    )


def compose_disjoint_sum(reports: Sequence[EstimateReport]) -> EstimateReport:
    """Sum of estimates over disjoint path conditions (independent runs)."""
    if not reports:
        raise ValueError("nothing to compose")
    return EstimateReport(
        mean=float(sum(r.mean for r in reports)),
        variance=float(sum(r.variance for r in reports)),
        n_samples=int(sum(r.n_samples for r in reports)),
        trace=[],
    )


def compose_product(reports: Sequence[EstimateReport]) -> EstimateReport:
    """Product of estimates over independent constraint slices.

    Variance follows the independent-product rule
    var = prod(v_i + m_i^2) - prod(m_i^2).
    """
    if not reports:
        raise ValueError("nothing to compose")
    mean = 1.0
    second = 1.0
    for r in reports:
        mean *= r.mean
        second *= r.variance + r.mean * r.mean
    return EstimateReport(
        mean=mean,
        variance=max(second - mean * mean, 0.0),
        n_samples=int(sum(r.n_samples for r in reports)),
        trace=[],
    )


def rae(estimate: float, truth: float) -> float:
    """Relative absolute error |estimate - truth| / truth; truth must be nonzero."""
    if truth == 0:
        raise ValueError("relative absolute error is undefined at truth = 0")
    return abs(estimate - truth) / truth
