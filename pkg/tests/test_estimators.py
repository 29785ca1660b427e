import math

import numpy as np
import pytest

from paisc.boxes import Box, Interval
from paisc.constraints import parse_constraint
from paisc.distributions import (
    FactorizedChain,
    ChainFactor,
    Gaussian,
    IndependentProduct,
    IntractableCdfError,
    StudentT,
    Uniform,
)
from paisc.estimators import (
    EstimateReport,
    box_mass,
    compose_disjoint_sum,
    compose_product,
    dmc_estimate,
    is_estimate,
    rae,
    stratified_estimate,
)
from paisc.intervals import Paving, pave
from paisc.rng import RngStream

CIRCLE = parse_constraint("x^2 + y^2 <= 1", "x -2 2\ny -2 2")
UNIFORM2 = IndependentProduct((Uniform(-2, 2), Uniform(-2, 2)))
CIRCLE_TRUTH = math.pi / 16


class TestDmc:
    def test_tautology(self):
        c = parse_constraint("x <= x", "x 0 1")
        r = dmc_estimate(c, IndependentProduct((Uniform(0, 1),)), 1000, RngStream(0))
        assert r.mean == 1.0 and r.variance == 0.0

    def test_infeasible(self):
        c = parse_constraint("x^2 <= -1", "x -1 1")
        r = dmc_estimate(c, IndependentProduct((Uniform(-1, 1),)), 1000, RngStream(0))
        assert r.mean == 0.0

    def test_circle_within_three_sigma(self):
        r = dmc_estimate(CIRCLE, UNIFORM2, 10 ** 5, RngStream(1))
        se = math.sqrt(CIRCLE_TRUTH * (1 - CIRCLE_TRUTH) / 10 ** 5)
        assert abs(r.mean - CIRCLE_TRUTH) < 3 * se

    def test_trace_monotone_and_complete(self):
        r = dmc_estimate(CIRCLE, UNIFORM2, 10 ** 4, RngStream(2))
        ns = [n for n, _ in r.trace]
        assert ns == sorted(ns)
        assert ns[-1] == 10 ** 4
        assert r.trace[-1][1] == r.mean

    def test_deterministic(self):
        a = dmc_estimate(CIRCLE, UNIFORM2, 5000, RngStream(3))
        b = dmc_estimate(CIRCLE, UNIFORM2, 5000, RngStream(3))
        assert a.mean == b.mean

    def test_unbiasedness_grand_mean(self):
        means = [
            dmc_estimate(CIRCLE, UNIFORM2, 1000, RngStream(4).derive(i)).mean
            for i in range(200)
        ]
        se = math.sqrt(CIRCLE_TRUTH * (1 - CIRCLE_TRUTH) / (200 * 1000))
        assert abs(np.mean(means) - CIRCLE_TRUTH) < 4 * se


class TestBoxMass:
    def test_full_domain_of_wide_gaussian(self):
        p = IndependentProduct((Gaussian(0, 1), Gaussian(0, 1)))
        b = Box((Interval(-50, 50), Interval(-50, 50)))
        assert box_mass(p, b) == pytest.approx(1.0, abs=1e-12)

    def test_uniform_quarter(self):
        p = IndependentProduct((Uniform(0, 1), Uniform(0, 1)))
        b = Box((Interval(0, 0.5), Interval(0, 0.5)))
        assert box_mass(p, b) == pytest.approx(0.25, abs=1e-15)

    def test_gaussian_erf_value(self):
        p = IndependentProduct((Gaussian(0, 1),))
        b = Box((Interval(0, 2),))
        erf_value = 0.5 * math.erf(2 / math.sqrt(2))
        assert box_mass(p, b) == pytest.approx(erf_value, abs=1e-14)

    def test_correlated_rejected(self):
        p = FactorizedChain(
            (ChainFactor(StudentT(2, 0, 0.5)), ChainFactor(Gaussian(0, 0.5), loc_ref=0))
        )
        with pytest.raises(IntractableCdfError):
            box_mass(p, Box((Interval(0, 1), Interval(0, 1))))


class TestStratified:
    def test_inner_only_paving_is_exact(self):
        paving = Paving(
            inner=[Box((Interval(0, 0.5), Interval(0, 0.5))),
                   Box((Interval(0.5, 1.0), Interval(0, 0.5)))],
            outer=[],
            accuracy=0.1,
        )
        p = IndependentProduct((Uniform(0, 1), Uniform(0, 1)))
        r = stratified_estimate(CIRCLE, p, paving, 1000, RngStream(0))
        assert r.mean == pytest.approx(0.5, abs=1e-12)
        assert r.variance == 0.0

    def test_empty_paving(self):
        r = stratified_estimate(CIRCLE, UNIFORM2, Paving(), 1000, RngStream(0))
        assert r.mean == 0.0 and r.variance == 0.0

    def test_matches_dmc_with_smaller_variance(self):
        paving = pave(CIRCLE, accuracy=0.1, max_boxes=1024)
        strat_vars, dmc_vars = [], []
        for i in range(20):
            rs = stratified_estimate(CIRCLE, UNIFORM2, paving, 10 ** 4, RngStream(10).derive(i))
            rd = dmc_estimate(CIRCLE, UNIFORM2, 10 ** 4, RngStream(11).derive(i))
            assert abs(rs.mean - rd.mean) < 3 * math.sqrt(rs.variance + rd.variance)
            strat_vars.append(rs.variance)
            dmc_vars.append(rd.variance)
        assert np.median(strat_vars) <= np.median(dmc_vars)

    def test_propagates_intractable(self):
        p = FactorizedChain(
            (ChainFactor(StudentT(2, 0, 0.5)), ChainFactor(Gaussian(0, 0.5), loc_ref=0))
        )
        c = parse_constraint("x + y <= 1", "x -5 5\ny -5 5")
        paving = pave(c, accuracy=0.25, max_boxes=64)
        with pytest.raises(IntractableCdfError):
            stratified_estimate(c, p, paving, 1000, RngStream(0))


class TestCompose:
    def test_sum_single_identity(self):
        r = EstimateReport(0.4, 1e-4, 100)
        out = compose_disjoint_sum([r])
        assert out.mean == 0.4 and out.variance == 1e-4

    def test_sum_linearity(self):
        out = compose_disjoint_sum(
            [EstimateReport(0.2, 1e-4, 10), EstimateReport(0.3, 2e-4, 10)]
        )
        assert out.mean == pytest.approx(0.5, abs=1e-15)
        assert out.variance == pytest.approx(3e-4, abs=1e-18)

    def test_sum_permutation_invariant_and_associative(self):
        rs = [EstimateReport(m, v, 1) for m, v in [(0.1, 1e-5), (0.2, 2e-5), (0.3, 3e-5)]]
        a = compose_disjoint_sum(rs)
        b = compose_disjoint_sum(rs[::-1])
        c = compose_disjoint_sum([compose_disjoint_sum(rs[:2]), rs[2]])
        assert a.mean == pytest.approx(b.mean, rel=1e-15)
        assert a.mean == pytest.approx(c.mean, rel=1e-15)
        assert a.variance == pytest.approx(b.variance, rel=1e-15)
        assert a.variance == pytest.approx(c.variance, rel=1e-15)

    def test_product_identity(self):
        out = compose_product([EstimateReport(1.0, 0.0, 5), EstimateReport(0.7, 1e-4, 5)])
        assert out.mean == pytest.approx(0.7)
        assert out.variance == pytest.approx(1e-4, rel=1e-9)

    def test_product_exact(self):
        out = compose_product([EstimateReport(0.5, 0.0, 1), EstimateReport(0.5, 0.0, 1)])
        assert out.mean == 0.25 and out.variance == 0.0

    def test_product_variance_vs_simulation(self):
        m1, v1, m2, v2 = 0.6, 0.01, 0.3, 0.004
        gen = np.random.default_rng(5)
        xs = gen.normal(m1, math.sqrt(v1), 2_000_000)
        ys = gen.normal(m2, math.sqrt(v2), 2_000_000)
        sim_var = (xs * ys).var()
        out = compose_product([EstimateReport(m1, v1, 1), EstimateReport(m2, v2, 1)])
        assert out.variance == pytest.approx(sim_var, rel=0.05)


class TestRae:
    def test_values(self):
        assert rae(0.5, 0.5) == 0.0
        assert rae(0.55, 0.5) == pytest.approx(0.1)
        assert rae(0.0, 0.5) == 1.0

    def test_zero_truth_rejected(self):
        with pytest.raises(ValueError):
            rae(0.1, 0.0)


class TestPlainIs:
    def test_weights_all_one_when_proposal_is_input(self):
        c = parse_constraint("x <= x && y <= y", "x -3 3\ny -3 3")
        p = IndependentProduct((Gaussian(0, 1), Gaussian(0, 1)))

        class AsProposal:
            def log_density(self, x):
                return p.log_pdf(x)

            def sample(self, rng, n):
                return p.sample(rng, n)

        r = is_estimate(c, p, AsProposal(), 2000, RngStream(6))
        assert r.mean == pytest.approx(1.0, abs=1e-12)
        assert r.variance < 1e-25

    def test_report_serialization(self):
        r = dmc_estimate(CIRCLE, UNIFORM2, 1000, RngStream(7))
        doc = r.to_json_dict()
        assert set(doc) == {"mean", "variance", "n_samples", "trace"}
        row = r.csv_row("dmc", "circle", 7, truth=CIRCLE_TRUTH)
        assert row.startswith("dmc,circle,7,1000,")
