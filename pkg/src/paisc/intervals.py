"""Interval engine: sound expression enclosures, HC4 contraction, paving.

Forward evaluation uses plain double arithmetic; every primitive is a
correctly rounded monotone map, so computed point evaluations stay within the
computed hulls, which makes the inner/outer certificates reliable for points
evaluated by the same kernels. Backward (HC4-revise) bounds are inflated by a
relative 1e-12 instead of using directed rounding; this is the documented
soundness caveat, exercised by statistical fuzz tests rather than proofs.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

from paisc.boxes import Box, Interval
from paisc.constraints import (
    Atom,
    BinOp,
    Const,
    ConstraintAst,
    Expr,
    Neg,
    Pow,
    Sqrt,
    Var,
    eval_indicator,
)

_INF = math.inf
_EPS = 1e-12

# Node expansion cap for the depth-first feasible-box search.
DFS_MAX_EXPANSIONS = 20000

# Default accuracies (max normalized width): coarse for MCMC seeding,
# fine for qCoral-style paving; paving box budget.
SEED_ACCURACY = 0.1
PAVING_ACCURACY = 1e-2
PAVING_MAX_BOXES = 1024


def _inflate(lo: float, hi: float) -> tuple[float, float]:
    return (lo - _EPS * max(1.0, abs(lo)), hi + _EPS * max(1.0, abs(hi)))


def _prod(a: float, b: float) -> float:
    # interval convention: 0 * inf = 0
    if a == 0.0 or b == 0.0:
        return 0.0
    return a * b


def _mul(a: tuple, b: tuple) -> tuple:
    ps = (_prod(a[0], b[0]), _prod(a[0], b[1]), _prod(a[1], b[0]), _prod(a[1], b[1]))
    return (min(ps), max(ps))


def _recip(b: tuple) -> tuple | None:
    # None means the reciprocal is the whole line (denominator spans 0)
    if b[0] <= 0.0 <= b[1]:
        return None
    return (1.0 / b[1], 1.0 / b[0])


def _pow_bound(v: float, k: int) -> float:
    acc = 1.0
    for _ in range(k):
        acc = acc * v
    return acc


def _pow_range(a: tuple, k: int) -> tuple:
    if k == 0:
        return (1.0, 1.0)
    if k % 2 == 1:
        return (_pow_bound(a[0], k), _pow_bound(a[1], k))
    if a[0] >= 0.0:
        return (_pow_bound(a[0], k), _pow_bound(a[1], k))
    if a[1] <= 0.0:
        return (_pow_bound(a[1], k), _pow_bound(a[0], k))
    return (0.0, max(_pow_bound(a[0], k), _pow_bound(a[1], k)))


def _root(v: float, k: int) -> float:
    if v < 0:
        return -((-v) ** (1.0 / k))
    return v ** (1.0 / k)


class _Ranges:
    """Per-node forward ranges (keyed by object identity) plus definedness."""

    def __init__(self) -> None:
        self.ranges: dict[int, tuple] = {}
        self.defined = True
        self.empty = False


def _forward(e: Expr, box: Box, var_index: dict[str, int], st: _Ranges) -> tuple | None:
    if isinstance(e, Const):
        r = (e.value, e.value)
    elif isinstance(e, Var):
        iv = box.intervals[var_index[e.name]]
        r = (iv.lo, iv.hi)
    elif isinstance(e, Neg):
        c = _forward(e.arg, box, var_index, st)
        if c is None:
            return None
        r = (-c[1], -c[0])
    elif isinstance(e, Sqrt):
        c = _forward(e.arg, box, var_index, st)
        if c is None:
            return None
        if c[1] < 0.0:
            st.empty = True
            return None
        if c[0] < 0.0:
            st.defined = False
        r = (math.sqrt(max(c[0], 0.0)), math.sqrt(c[1]))
    elif isinstance(e, Pow):
        c = _forward(e.arg, box, var_index, st)
        if c is None:
            return None
        r = _pow_range(c, e.exponent)
    else:
        lc = _forward(e.left, box, var_index, st)
        if lc is None:
            return None
        rc = _forward(e.right, box, var_index, st)
        if rc is None:
            return None
        if e.op == "+":
            r = (lc[0] + rc[0], lc[1] + rc[1])
        elif e.op == "-":
            r = (lc[0] - rc[1], lc[1] - rc[0])
        elif e.op == "*":
            r = _mul(lc, rc)
        else:
            inv = _recip(rc)
            if inv is None:
                st.defined = False
                r = (-_INF, _INF)
            else:
                r = _mul(lc, inv)
    if math.isnan(r[0]) or math.isnan(r[1]):
        st.defined = False
        r = (-_INF, _INF)
    st.ranges[id(e)] = r
    return r


def interval_eval(e: Expr, b: Box, var_names: tuple[str, ...] | None = None) -> Interval | None:
    """Sound enclosure of e over the box; None when e is undefined everywhere."""
    names = var_names if var_names is not None else tuple(f"x{i}" for i in range(b.dim))
    st = _Ranges()
    r = _forward(e, b, {n: i for i, n in enumerate(names)}, st)
    if r is None:
        return None
    return Interval(r[0], r[1])


def _intersect(a: tuple, b: tuple) -> tuple | None:
    lo = max(a[0], b[0])
    hi = min(a[1], b[1])
    if lo > hi:
        return None
    return (lo, hi)


def _backward(
    e: Expr,
    target: tuple,
    st: _Ranges,
    box_vars: list[tuple],
    var_index: dict[str, int],
) -> bool:
    """Narrow descendants of e so that e's value can stay within target.

    Returns False iff the constraint is provably infeasible on the box.
    """
    current = st.ranges.get(id(e))
    if current is None:
        return True
    target = _intersect(current, _inflate(*target))
    if target is None:
        return False
    st.ranges[id(e)] = target

    if isinstance(e, Const):
        return True
    if isinstance(e, Var):
        i = var_index[e.name]
        narrowed = _intersect(box_vars[i], target)
        if narrowed is None:
            return False
        box_vars[i] = narrowed
        return True
    if isinstance(e, Neg):
        return _backward(e.arg, (-target[1], -target[0]), st, box_vars, var_index)
    if isinstance(e, Sqrt):
        t = _intersect(target, (0.0, _INF))
        if t is None:
            return False
        return _backward(e.arg, (t[0] * t[0], t[1] * t[1]), st, box_vars, var_index)
    if isinstance(e, Pow):
        k = e.exponent
        if k == 0:
            return _intersect(target, (1.0, 1.0)) is not None
        child = st.ranges.get(id(e.arg))
        if child is None:
            return True
        if k % 2 == 1:
            return _backward(e.arg, (_root(target[0], k), _root(target[1], k)),
                             st, box_vars, var_index)
        t = _intersect(target, (0.0, _INF))
        if t is None:
            return False
        r_hi = _root(t[1], k)
        r_lo = _root(t[0], k)
        pos = _intersect(child, _inflate(r_lo, r_hi))
        neg = _intersect(child, _inflate(-r_hi, -r_lo))
        if pos is None and neg is None:
            return False
        hull = pos if neg is None else neg if pos is None else (neg[0], pos[1])
        return _backward(e.arg, hull, st, box_vars, var_index)

    lc = st.ranges.get(id(e.left))
    rc = st.ranges.get(id(e.right))
    if lc is None or rc is None:
        return True
    if e.op == "+":
        if not _backward(e.left, (target[0] - rc[1], target[1] - rc[0]), st, box_vars, var_index):
            return False
        lc = st.ranges[id(e.left)]
        return _backward(e.right, (target[0] - lc[1], target[1] - lc[0]), st, box_vars, var_index)
    if e.op == "-":
        if not _backward(e.left, (target[0] + rc[0], target[1] + rc[1]), st, box_vars, var_index):
            return False
        lc = st.ranges[id(e.left)]
        return _backward(e.right, (lc[0] - target[1], lc[1] - target[0]), st, box_vars, var_index)
    if e.op == "*":
        inv_r = _recip(rc)
        if inv_r is not None and not _backward(
            e.left, _mul(target, inv_r), st, box_vars, var_index
        ):
            return False
        lc = st.ranges[id(e.left)]
        inv_l = _recip(lc)
        if inv_l is not None:
            return _backward(e.right, _mul(target, inv_l), st, box_vars, var_index)
        return True
    # division: left / right = target
    if not _backward(e.left, _mul(target, rc), st, box_vars, var_index):
        return False
    lc = st.ranges[id(e.left)]
    inv_t = _recip(target)
    if inv_t is not None:
        return _backward(e.right, _mul(lc, inv_t), st, box_vars, var_index)
    return True


_REL_TARGET = {
    "<=": (-_INF, 0.0),
    "<": (-_INF, 0.0),
    ">=": (0.0, _INF),
    ">": (0.0, _INF),
    "==": (0.0, 0.0),
}


def _atom_diff(atom: Atom) -> Expr:
    return BinOp("-", atom.lhs, atom.rhs)


def _hc4_revise(diff: Expr, rel: str, box: Box, var_index: dict[str, int]) -> Box | None:
    st = _Ranges()
    root = _forward(diff, box, var_index, st)
    if root is None or st.empty:
        return None
    target = _intersect(root, _REL_TARGET[rel])
    if target is None:
        return None
    box_vars = [(iv.lo, iv.hi) for iv in box.intervals]
    if not _backward(diff, target, st, box_vars, var_index):
        return None
    # clip the inflation back to the original bounds: contraction never grows
    out = []
    for iv, (lo, hi) in zip(box.intervals, box_vars):
        lo, hi = max(lo, iv.lo), min(hi, iv.hi)
        if lo > hi:
            return None
        out.append(Interval(lo, hi))
    return Box(tuple(out))


def hc4_contract(c: ConstraintAst, b: Box, max_rounds: int = 60) -> Box | None:
    """Fixpoint of per-atom HC4-revise; None iff no solutions can exist in b.

    Iteration stops when a full round improves total width by less than 1%.
    """
    var_index = {n: i for i, n in enumerate(c.vars)}
    diffs = [_atom_diff(a) for a in c.atoms]
    box = b
    for _ in range(max_rounds):
        before = sum(iv.width for iv in box.intervals)
        for diff, atom in zip(diffs, c.atoms):
            narrowed = _hc4_revise(diff, atom.rel, box, var_index)
            if narrowed is None:
                return None
            box = narrowed
        after = sum(iv.width for iv in box.intervals)
        if before <= 0.0 or (before - after) / before < 0.01:
            break
    return box


def bounding_box(c: ConstraintAst) -> Box | None:
    """Smallest box the contractor can certify to contain all solutions."""
    return hc4_contract(c, c.domain)


CERT_TRUE = 1
CERT_FALSE = -1
CERT_UNKNOWN = 0


def _atom_certificate(diff: Expr, rel: str, box: Box, var_index: dict[str, int]) -> int:
    st = _Ranges()
    r = _forward(diff, box, var_index, st)
    if r is None or st.empty:
        return CERT_FALSE
    lo, hi = r
    if rel == "<=":
        if hi <= 0.0 and st.defined:
            return CERT_TRUE
        if lo > 0.0:
            return CERT_FALSE
    elif rel == "<":
        if hi < 0.0 and st.defined:
            return CERT_TRUE
        if lo >= 0.0:
            return CERT_FALSE
    elif rel == ">=":
        if lo >= 0.0 and st.defined:
            return CERT_TRUE
        if hi < 0.0:
            return CERT_FALSE
    elif rel == ">":
        if lo > 0.0 and st.defined:
            return CERT_TRUE
        if hi <= 0.0:
            return CERT_FALSE
    else:  # ==
        if lo == 0.0 == hi and st.defined:
            return CERT_TRUE
        if lo > 0.0 or hi < 0.0:
            return CERT_FALSE
    return CERT_UNKNOWN


def classify_box(c: ConstraintAst, box: Box) -> int:
    """Certificate over the whole conjunction: inner / infeasible / unknown."""
    var_index = {n: i for i, n in enumerate(c.vars)}
    verdict = CERT_TRUE
    for atom in c.atoms:
        cert = _atom_certificate(_atom_diff(atom), atom.rel, box, var_index)
        if cert == CERT_FALSE:
            return CERT_FALSE
        if cert == CERT_UNKNOWN:
            verdict = CERT_UNKNOWN
    return verdict


@dataclass
class Paving:
    """Disjoint inner (certified all-solutions) and outer (undecided) boxes."""

    inner: list[Box] = field(default_factory=list)
    outer: list[Box] = field(default_factory=list)
    accuracy: float = PAVING_ACCURACY
    exhausted: bool = True

    def to_json_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "exhausted": self.exhausted,
            "inner": [b.to_bounds() for b in self.inner],
            "outer": [b.to_bounds() for b in self.outer],
        }

    @staticmethod
    def from_json_dict(d: dict) -> "Paving":
        return Paving(
            inner=[Box.from_bounds(b) for b in d["inner"]],
            outer=[Box.from_bounds(b) for b in d["outer"]],
            accuracy=float(d["accuracy"]),
            exhausted=bool(d["exhausted"]),
        )


def _norm_widths(box: Box, scale: list[float]) -> float:
    return max(
        (iv.width / s if s > 0.0 else 0.0)
        for iv, s in zip(box.intervals, scale)
    )


def _widest_dim(box: Box, scale: list[float]) -> int:
    best, best_w = 0, -1.0
    for i, iv in enumerate(box.intervals):
        w = iv.width / scale[i] if scale[i] > 0.0 else 0.0
        if w > best_w:
            best, best_w = i, w
    return best


def pave(c: ConstraintAst, accuracy: float = PAVING_ACCURACY,
         max_boxes: int = PAVING_MAX_BOXES, contract: bool = True) -> Paving:
    """Branch-and-prune paving of the constraint over its domain.

    Boxes are contracted, certified inner or infeasible, or split on the
    widest (domain-normalized) dimension until they reach the accuracy or the
    box budget runs out; leftover undecided boxes become outer boxes.

    With contract=False boxes are never shrunk, only split and certified, so
    the result is a tiling of subdivision cells (the shape interval paving
    tools produce in their plain paving mode); pruning then relies solely on
    infeasibility certificates and is considerably weaker in high dimensions.
    """
    if accuracy <= 0.0:
        raise ValueError("accuracy must be positive")
    if max_boxes < 1:
        raise ValueError("max_boxes must be at least 1")
    scale = [iv.width for iv in c.domain.intervals]
    paving = Paving(accuracy=accuracy, exhausted=True)
    first = hc4_contract(c, c.domain) if contract else c.domain
    if first is None:
        return paving
    frontier: deque[Box] = deque([first])
    processed = 0  # the box budget counts every box the solver works on
    while frontier:
        box = frontier.popleft()
        processed += 1
        verdict = classify_box(c, box)
        if verdict == CERT_FALSE:
            continue
        if verdict == CERT_TRUE:
            paving.inner.append(box)
            continue
        if _norm_widths(box, scale) <= accuracy:
            paving.outer.append(box)
            continue
        if processed >= max_boxes:
            paving.outer.append(box)
            paving.exhausted = False
            continue
        for half in box.split(_widest_dim(box, scale)):
            if contract:
                narrowed = hc4_contract(c, half)
                if narrowed is not None:
                    frontier.append(narrowed)
            elif classify_box(c, half) != CERT_FALSE:
                frontier.append(half)
    return paving


def dfs_feasible_boxes(
    c: ConstraintAst,
    accuracy: float = SEED_ACCURACY,
    max_solutions: int = 256,
    max_expansions: int = DFS_MAX_EXPANSIONS,
) -> list[Box]:
    """Depth-first hunt for boxes that certainly or plausibly contain solutions.

    Collects inner boxes and accuracy-sized undecided boxes whose center
    satisfies the constraint; unlike pave() the result need not enclose all
    solutions, it only has to surface feasible regions quickly.
    """
    if accuracy <= 0.0:
        raise ValueError("accuracy must be positive")
    scale = [iv.width for iv in c.domain.intervals]
    found: list[Box] = []
    stack: list[Box] = []
    first = hc4_contract(c, c.domain)
    if first is None:
        return found
    stack.append(first)
    expansions = 0
    while stack and len(found) < max_solutions and expansions < max_expansions:
        box = stack.pop()
        expansions += 1
        verdict = classify_box(c, box)
        if verdict == CERT_FALSE:
            continue
        if verdict == CERT_TRUE:
            found.append(box)
            continue
        if _norm_widths(box, scale) <= accuracy:
            if eval_indicator(c, box.midpoint()) == 1:
                found.append(box)
            continue
        a, b = box.split(_widest_dim(box, scale))
        for half in (b, a):  # left half explored first
            narrowed = hc4_contract(c, half)
            if narrowed is not None:
                stack.append(narrowed)
    return found
