import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from paisc.constraints import (
    Atom,
    BinOp,
    Const,
    ConstraintAst,
    Neg,
    ParseError,
    Pow,
    Sqrt,
    Var,
    diagnostics,
    eval_indicator,
    format_constraint,
    format_domain,
    parse_constraint,
    slice_constraint,
)

CIRCLE_DOMAIN = "x -2 2\ny -2 2"
TORUS_DOMAIN = "x -5 5\ny -5 5\nz -5 5"


def circle():
    return parse_constraint("x*x + y*y <= 1", CIRCLE_DOMAIN)


def torus():
    return parse_constraint("(sqrt(x^2+y^2)-3)^2 + z^2 <= 1", TORUS_DOMAIN)


class TestParse:
    def test_circle_shape(self):
        c = circle()
        assert len(c.atoms) == 1
        assert c.vars == ("x", "y")
        assert c.atoms[0].rel == "<="

    def test_torus_shape(self):
        c = torus()
        assert len(c.atoms) == 1
        assert c.vars == ("x", "y", "z")

    def test_tautology(self):
        c = parse_constraint("x <= x", "x 0 1")
        assert len(c.atoms) == 1
        assert eval_indicator(c, [0.37]) == 1

    def test_conjunction_order(self):
        c = parse_constraint("x <= 1 && y >= 0 && x + y == 1", CIRCLE_DOMAIN)
        assert [a.rel for a in c.atoms] == ["<=", ">=", "=="]

    def test_syntax_error_position(self):
        with pytest.raises(ParseError) as err:
            parse_constraint("x + <= 1", "x 0 1")
        assert err.value.position == 4

    def test_undeclared_variable(self):
        with pytest.raises(ValueError, match="undeclared variable 'q'"):
            parse_constraint("q <= 1", "x 0 1")

    def test_unbounded_domain_rejected(self):
        with pytest.raises(ValueError, match="bounded"):
            parse_constraint("x <= 1", "x -inf inf")

    def test_pow_requires_integer_literal(self):
        with pytest.raises(ParseError):
            parse_constraint("x^y <= 1", CIRCLE_DOMAIN)
        with pytest.raises(ParseError):
            parse_constraint("x^1.5 <= 1", "x 0 1")

    def test_negative_exponent_rejected(self):
        with pytest.raises(ParseError):
            parse_constraint("x^-2 <= 1", "x 0 1")

    def test_precedence(self):
        c = parse_constraint("1 + 2*x^2 <= 9", "x -5 5")
        # 1 + (2*(x^2)): satisfied iff x^2 <= 4
        assert eval_indicator(c, [2.0]) == 1
        assert eval_indicator(c, [2.1]) == 0

    def test_unary_minus_binds_below_power(self):
        c = parse_constraint("-x^2 <= 0", "x -5 5")
        assert eval_indicator(c, [3.0]) == 1  # -(x^2) <= 0 always


class TestIndicator:
    def test_circle_points(self):
        c = circle()
        assert eval_indicator(c, [0.0, 0.0]) == 1
        assert eval_indicator(c, [1.0, 1.0]) == 0

    def test_torus_points(self):
        t = torus()
        assert eval_indicator(t, [3.0, 0.0, 0.0]) == 1
        assert eval_indicator(t, [0.0, 0.0, 0.0]) == 0

    def test_boundary_inclusive_vs_strict(self):
        le = parse_constraint("x <= 1", "x 0 2")
        lt = parse_constraint("x < 1", "x 0 2")
        ge = parse_constraint("x >= 1", "x 0 2")
        gt = parse_constraint("x > 1", "x 0 2")
        eq = parse_constraint("x == 1", "x 0 2")
        assert [eval_indicator(c, [1.0]) for c in (le, lt, ge, gt, eq)] == [1, 0, 1, 0, 1]

    def test_nan_counts_as_unsatisfied(self):
        c = parse_constraint("sqrt(x) >= -10", "x -4 4")
        diagnostics.reset()
        assert eval_indicator(c, [-1.0]) == 0
        assert eval_indicator(c, [1.0]) == 1
        assert diagnostics.nan_points == 1

    def test_division_by_zero_is_nan(self):
        c = parse_constraint("1/x <= 1000000", "x -1 1")
        diagnostics.reset()
        assert eval_indicator(c, [0.0]) == 0
        assert diagnostics.nan_points == 1

    def test_batch_matches_scalar(self):
        c = torus()
        gen = np.random.default_rng(0)
        pts = gen.uniform(-5, 5, size=(500, 3))
        batch = c.indicator(pts)
        scalar = np.array([eval_indicator(c, p) for p in pts], dtype=np.uint8)
        assert np.array_equal(batch, scalar)

    def test_deterministic(self):
        c = torus()
        pts = np.random.default_rng(1).uniform(-5, 5, size=(100, 3))
        assert np.array_equal(c.indicator(pts), c.indicator(pts))


class TestSlicing:
    def test_disjoint_atoms(self):
        c = parse_constraint("x <= 1 && y <= 1", CIRCLE_DOMAIN)
        ss = slice_constraint(c)
        assert len(ss.groups) == 2
        assert [g[1] for g in ss.groups] == [("x",), ("y",)]

    def test_transitive_closure(self):
        c = parse_constraint("x + y <= 1 && y + z <= 1", TORUS_DOMAIN)
        ss = slice_constraint(c)
        assert len(ss.groups) == 1
        assert ss.groups[0][1] == ("x", "y", "z")

    def test_correlation_group_merges(self):
        c = parse_constraint("x <= 1 && y <= 1", CIRCLE_DOMAIN)
        ss = slice_constraint(c, [{"x", "y"}])
        assert len(ss.groups) == 1
        assert ss.groups[0][1] == ("x", "y")

    def test_partition_property(self):
        c = parse_constraint("x*y <= 1 && z <= 0.5", TORUS_DOMAIN)
        ss = slice_constraint(c)
        seen = [v for _, subset in ss.groups for v in subset]
        assert sorted(seen) == ["x", "y", "z"]
        assert len(seen) == len(set(seen))

    def test_indicator_factorizes_over_slices(self):
        c = parse_constraint("x*x <= 2 && y + z <= 1 && z <= 0.5", TORUS_DOMAIN)
        ss = slice_constraint(c)
        gen = np.random.default_rng(7)
        pts = gen.uniform(-5, 5, size=(200, 3))
        full = c.indicator(pts)
        prod = np.ones(200, dtype=np.uint8)
        for sub, subset in ss.groups:
            idx = [c.vars.index(v) for v in subset]
            prod &= sub.indicator(pts[:, idx])
        assert np.array_equal(full, prod)


# -- parse/print round trip ---------------------------------------------------

_names = st.sampled_from(["x", "y", "z"])
_consts = st.floats(min_value=0.0, max_value=1e6, allow_nan=False).map(Const)


def _exprs(depth: int):
    if depth == 0:
        return st.one_of(_consts, _names.map(Var))
    sub = _exprs(depth - 1)
    return st.one_of(
        _consts,
        _names.map(Var),
        sub.map(Neg),
        sub.map(Sqrt),
        st.tuples(sub, st.integers(0, 4)).map(lambda t: Pow(*t)),
        st.tuples(st.sampled_from("+-*/"), sub, sub).map(lambda t: BinOp(*t)),
    )


_atoms = st.tuples(_exprs(3), st.sampled_from(["<=", "<", ">=", ">", "=="]), _exprs(3)).map(
    lambda t: Atom(*t)
)


@settings(max_examples=150, deadline=None)
@given(st.lists(_atoms, min_size=1, max_size=4))
def test_parse_print_round_trip(atoms):
    from paisc.boxes import Box, Interval

    ast = ConstraintAst(
        atoms=tuple(atoms),
        vars=("x", "y", "z"),
        domain=Box(tuple(Interval(-5.0, 5.0) for _ in range(3))),
    )
    reparsed = parse_constraint(format_constraint(ast), format_domain(ast))
    assert reparsed.atoms == ast.atoms
    assert reparsed.vars == ast.vars
    assert reparsed.domain == ast.domain
