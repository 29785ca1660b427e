"""Numeric path-condition constraints: AST, parser, evaluation, slicing.

A constraint is a conjunction of inequality atoms over real variables, each
variable bounded by a declared interval domain. Atoms are expression trees
built from constants, variables, +, -, *, /, unary minus, sqrt() and integer
powers. Evaluation semantics are exact IEEE comparisons with inclusive
boundaries for <=, >= and ==; any atom evaluating to NaN (sqrt of a negative,
zero denominator) counts as unsatisfied and bumps a diagnostic counter.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

from paisc.boxes import Box, Interval

# ---------------------------------------------------------------------------
# Expression trees


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class Sqrt:
    arg: "Expr"


@dataclass(frozen=True)
class Pow:
    arg: "Expr"
    exponent: int

    def __post_init__(self):
        if not isinstance(self.exponent, int) or self.exponent < 0:
            raise ValueError("power exponent must be a non-negative integer")


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Expr"
    right: "Expr"


Expr = Union[Const, Var, Neg, Sqrt, Pow, BinOp]

RELATIONS = ("<=", "<", ">=", ">", "==")


@dataclass(frozen=True)
class Atom:
    lhs: Expr
    rel: str
    rhs: Expr


class ParseError(ValueError):
    """Syntax or resolution error, carrying the source position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position
        self.message = message


def expr_vars(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Const):
        return set()
    if isinstance(e, (Neg, Sqrt, Pow)):
        return expr_vars(e.arg)
    return expr_vars(e.left) | expr_vars(e.right)


# ---------------------------------------------------------------------------
# Diagnostics

class _Diagnostics:
    """Process-wide counters for numerically degenerate evaluations."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self.nan_points = 0

    def count_nan(self, n: int) -> None:
        if n:
            with self._lock:
                self.nan_points += int(n)

    def reset(self) -> None:
        with self._lock:
            self.nan_points = 0


diagnostics = _Diagnostics()


# ---------------------------------------------------------------------------
# Compiled form: each atom becomes a postfix program computing lhs - rhs.

OP_CONST = 0
OP_VAR = 1
OP_NEG = 2
OP_SQRT = 3
OP_ADD = 4
OP_SUB = 5
OP_MUL = 6
OP_DIV = 7
OP_POW = 8

REL_LE = 0
REL_LT = 1
REL_GE = 2
REL_GT = 3
REL_EQ = 4

_REL_CODE = {"<=": REL_LE, "<": REL_LT, ">=": REL_GE, ">": REL_GT, "==": REL_EQ}


@dataclass
class CompiledConstraint:
    """Flattened postfix programs, one per atom, shared by both eval backends."""

    ops: np.ndarray  # int32 opcodes
    args: np.ndarray  # int32 operand (const index / var index / exponent)
    consts: np.ndarray  # float64 constant pool
    atom_starts: np.ndarray  # int32, len n_atoms+1
    rels: np.ndarray  # int8 relation codes
    stack_depth: int
    n_vars: int


def _emit(e: Expr, var_index: dict[str, int], ops: list, args: list, consts: list) -> int:
    """Append postfix code for e; returns the stack depth it needs."""
    if isinstance(e, Const):
        ops.append(OP_CONST)
        args.append(len(consts))
        consts.append(float(e.value))
        return 1
    if isinstance(e, Var):
        ops.append(OP_VAR)
        args.append(var_index[e.name])
        return 1
    if isinstance(e, Neg):
        d = _emit(e.arg, var_index, ops, args, consts)
        ops.append(OP_NEG)
        args.append(0)
        return d
    if isinstance(e, Sqrt):
        d = _emit(e.arg, var_index, ops, args, consts)
        ops.append(OP_SQRT)
        args.append(0)
        return d
    if isinstance(e, Pow):
        d = _emit(e.arg, var_index, ops, args, consts)
        ops.append(OP_POW)
        args.append(int(e.exponent))
        return d
    dl = _emit(e.left, var_index, ops, args, consts)
    dr = _emit(e.right, var_index, ops, args, consts)
    ops.append({"+": OP_ADD, "-": OP_SUB, "*": OP_MUL, "/": OP_DIV}[e.op])
    args.append(0)
    return max(dl, 1 + dr)


def compile_constraint(atoms: Sequence[Atom], var_names: Sequence[str]) -> CompiledConstraint:
    var_index = {name: i for i, name in enumerate(var_names)}
    ops: list[int] = []
    args: list[int] = []
    consts: list[float] = []
    starts = [0]
    rels = []
    depth = 1
    for atom in atoms:
        dl = _emit(atom.lhs, var_index, ops, args, consts)
        dr = _emit(atom.rhs, var_index, ops, args, consts)
        ops.append(OP_SUB)
        args.append(0)
        depth = max(depth, dl, 1 + dr)
        starts.append(len(ops))
        rels.append(_REL_CODE[atom.rel])
    return CompiledConstraint(
        ops=np.asarray(ops, dtype=np.int32),
        args=np.asarray(args, dtype=np.int32),
        consts=np.asarray(consts, dtype=np.float64),
        atom_starts=np.asarray(starts, dtype=np.int32),
        rels=np.asarray(rels, dtype=np.int8),
        stack_depth=depth,
        n_vars=len(var_names),
    )


# ---------------------------------------------------------------------------
# Constraint AST


@dataclass(frozen=True)
class ConstraintAst:
    """Conjunction of atoms over an ordered, box-bounded variable list.

    Immutable after construction; safe to share across threads. The compiled
    postfix form is built lazily and cached.
    """

    atoms: tuple[Atom, ...]
    vars: tuple[str, ...]
    domain: Box
    _compiled_cache: list = field(
        default_factory=list, compare=False, repr=False, hash=False
    )

    def __post_init__(self):
        if not self.atoms:
            raise ValueError("constraint needs at least one atom")
        if self.domain.dim != len(self.vars):
            raise ValueError("domain dimension does not match variable count")
        declared = set(self.vars)
        for atom in self.atoms:
            for name in expr_vars(atom.lhs) | expr_vars(atom.rhs):
                if name not in declared:
                    raise ValueError(f"atom references undeclared variable {name!r}")

    @property
    def dim(self) -> int:
        return len(self.vars)

    def compiled(self) -> CompiledConstraint:
        if not self._compiled_cache:
            self._compiled_cache.append(compile_constraint(self.atoms, self.vars))
        return self._compiled_cache[0]

    def indicator(self, points: np.ndarray) -> np.ndarray:
        """Vectorized indicator over an (n, dim) array; returns uint8 of len n."""
        from paisc import kernels

        points = np.ascontiguousarray(points, dtype=np.float64)
        if points.ndim == 1:
            points = points[None, :]
        if points.shape[1] != self.dim:
            raise ValueError("point dimension mismatch")
        sat, nan_count = kernels.indicator_batch(self.compiled(), points)
        diagnostics.count_nan(nan_count)
        return sat

    def restrict(self, subset: Sequence[str]) -> "ConstraintAst":
        """Sub-constraint over `subset`, keeping atoms fully inside it."""
        subset_set = set(subset)
        kept = tuple(
            a for a in self.atoms
            if (expr_vars(a.lhs) | expr_vars(a.rhs)) <= subset_set
        )
        names = tuple(v for v in self.vars if v in subset_set)
        idx = [self.vars.index(v) for v in names]
        return ConstraintAst(
            atoms=kept,
            vars=names,
            domain=Box(tuple(self.domain.intervals[i] for i in idx)),
        )


def eval_indicator(c: ConstraintAst, point: Sequence[float]) -> int:
    """1 iff every atom holds at the point; NaN anywhere makes an atom false."""
    return int(c.indicator(np.asarray(point, dtype=np.float64))[0])


# ---------------------------------------------------------------------------
# Parsing

_TWO_CHAR = ("<=", ">=", "==", "&&")
_SINGLE = "+-*/^()<>"


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        two = text[i : i + 2]
        if two in _TWO_CHAR:
            tokens.append(("op", two, i))
            i += 2
            continue
        if ch in _SINGLE:
            tokens.append(("op", ch, i))
            i += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            tokens.append(("num", text[i:j], i))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("name", text[i:j], i))
            i = j
            continue
        raise ParseError(f"unexpected character {ch!r}", i)
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def next(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, value: str):
        kind, val, at = self.next()
        if val != value:
            raise ParseError(f"expected {value!r}, found {val or 'end of input'!r}", at)

    def parse_constraint(self) -> list[Atom]:
        atoms = [self.parse_atom()]
        while self.peek()[1] == "&&":
            self.next()
            atoms.append(self.parse_atom())
        kind, val, at = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected trailing input {val!r}", at)
        return atoms

    def parse_atom(self) -> Atom:
        lhs = self.parse_expr()
        kind, val, at = self.next()
        if val not in RELATIONS:
            raise ParseError(f"expected a relation (<=, <, >=, >, ==), found {val!r}", at)
        rhs = self.parse_expr()
        return Atom(lhs, val, rhs)

    def parse_expr(self) -> Expr:
        e = self.parse_term()
        while self.peek()[1] in ("+", "-"):
            op = self.next()[1]
            e = BinOp(op, e, self.parse_term())
        return e

    def parse_term(self) -> Expr:
        e = self.parse_unary()
        while self.peek()[1] in ("*", "/"):
            op = self.next()[1]
            e = BinOp(op, e, self.parse_unary())
        return e

    def parse_unary(self) -> Expr:
        if self.peek()[1] == "-":
            self.next()
            return Neg(self.parse_unary())
        if self.peek()[1] == "+":
            self.next()
            return self.parse_unary()
        return self.parse_power()

    def parse_power(self) -> Expr:
        e = self.parse_primary()
        while self.peek()[1] == "^":
            self.next()
            kind, val, at = self.next()
            if kind != "num" or not val.isdigit():
                raise ParseError("power exponent must be a non-negative integer literal", at)
            e = Pow(e, int(val))
        return e

    def parse_primary(self) -> Expr:
        kind, val, at = self.next()
        if val == "(":
            e = self.parse_expr()
            self.expect(")")
            return e
        if kind == "num":
            try:
                return Const(float(val))
            except ValueError:
                raise ParseError(f"bad number literal {val!r}", at) from None
        if kind == "name":
            if val == "sqrt":
                self.expect("(")
                e = self.parse_expr()
                self.expect(")")
                return Sqrt(e)
            return Var(val)
        raise ParseError(f"expected an expression, found {val or 'end of input'!r}", at)


def parse_domain(decls: str) -> list[tuple[str, float, float]]:
    """Parse domain declarations, one `name lo hi` per line (or ;-separated)."""
    out = []
    seen = set()
    for raw in decls.replace(";", "\n").splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"bad domain declaration {line!r}: expected 'name lo hi'")
        name, lo_s, hi_s = parts
        lo, hi = float(lo_s), float(hi_s)
        if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
            raise ValueError(f"variable {name!r} needs a bounded domain with lo <= hi")
        if name in seen:
            raise ValueError(f"variable {name!r} declared twice")
        seen.add(name)
        out.append((name, lo, hi))
    if not out:
        raise ValueError("no domain declarations found")
    return out


def parse_constraint(text: str, domain_decls: str) -> ConstraintAst:
    """Parse a conjunction of inequalities against domain declarations.

    Variable order follows the declaration order. Raises ParseError with the
    source position for syntax errors, ValueError for unresolved variables.
    """
    decls = parse_domain(domain_decls)
    names = tuple(name for name, _, _ in decls)
    atoms = tuple(_Parser(text).parse_constraint())
    declared = set(names)
    for atom in atoms:
        for v in sorted(expr_vars(atom.lhs) | expr_vars(atom.rhs)):
            if v not in declared:
                raise ValueError(f"undeclared variable {v!r} in constraint")
    domain = Box(tuple(Interval(lo, hi) for _, lo, hi in decls))
    return ConstraintAst(atoms=atoms, vars=names, domain=domain)


# ---------------------------------------------------------------------------
# Printing (round-trips through parse_constraint)

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "pow": 4, "atom": 5}


def _format_expr(e: Expr, parent_prec: int = 0, right_side: bool = False) -> str:
    if isinstance(e, Const):
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Sqrt):
        return f"sqrt({_format_expr(e.arg)})"
    if isinstance(e, Neg):
        inner = _format_expr(e.arg, _PREC["neg"])
        s = f"-{inner}"
        return f"({s})" if parent_prec > _PREC["neg"] else s
    if isinstance(e, Pow):
        base = _format_expr(e.arg, _PREC["pow"] + 1)
        return f"{base}^{e.exponent}"
    prec = _PREC[e.op]
    left = _format_expr(e.left, prec)
    # - and / are left-associative: parenthesize an equal-precedence RHS
    right = _format_expr(e.right, prec + 1)
    s = f"{left} {e.op} {right}"
    return f"({s})" if prec < parent_prec else s


def format_expr(e: Expr) -> str:
    return _format_expr(e)


def format_constraint(c: ConstraintAst) -> str:
    return " && ".join(
        f"{_format_expr(a.lhs)} {a.rel} {_format_expr(a.rhs)}" for a in c.atoms
    )


def format_domain(c: ConstraintAst) -> str:
    return "\n".join(
        f"{name} {repr(iv.lo)} {repr(iv.hi)}"
        for name, iv in zip(c.vars, c.domain.intervals)
    )


# ---------------------------------------------------------------------------
# Constraint slicing


@dataclass(frozen=True)
class SliceSet:
    """Partition of a constraint into independently quantifiable groups."""

    groups: tuple[tuple[ConstraintAst, tuple[str, ...]], ...]


class _UnionFind:
    def __init__(self, items: Iterable[str]):
        self.parent = {x: x for x in items}

    def find(self, x: str) -> str:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: str, b: str) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def slice_constraint(
    c: ConstraintAst, correlation_groups: Sequence[Iterable[str]] = ()
) -> SliceSet:
    """Group atoms whose variables are (transitively) dependent.

    Two variables depend on each other if they share an atom or sit in the
    same correlation group; the groups partition the variables appearing in
    atoms (plus any correlated companions) and each group's sub-constraint can
    be quantified independently.
    """
    uf = _UnionFind(c.vars)
    atom_vars = []
    for atom in c.atoms:
        vs = sorted(expr_vars(atom.lhs) | expr_vars(atom.rhs))
        atom_vars.append(vs)
        for other in vs[1:]:
            uf.union(vs[0], other)
    for group in correlation_groups:
        members = sorted(group)
        for name in members:
            if name not in uf.parent:
                raise ValueError(f"correlation group references unknown variable {name!r}")
        for other in members[1:]:
            uf.union(members[0], other)

    relevant: set[str] = set()
    for vs in atom_vars:
        relevant.update(vs)
    for group in correlation_groups:
        members = set(group)
        if members & relevant:
            relevant.update(members)

    roots: dict[str, list[str]] = {}
    for name in c.vars:
        if name in relevant:
            roots.setdefault(uf.find(name), []).append(name)

    groups = []
    for root in sorted(roots, key=lambda r: c.vars.index(roots[r][0])):
        subset = tuple(v for v in c.vars if v in set(roots[root]))
        groups.append((c.restrict(subset), subset))
    return SliceSet(groups=tuple(groups))
