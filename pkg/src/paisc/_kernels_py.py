"""Pure-numpy fallback for the hot evaluation kernels.

Semantics are identical to the compiled backend in paisc._native: same opcode
set, same NaN rules (sqrt of a negative and any zero denominator produce NaN,
integer powers are naive left-fold products), same relation codes. Elementwise
results are bit-identical across backends; reductions (mixture log-density)
agree to rounding.
"""

from __future__ import annotations

import numpy as np

from paisc.constraints import (
    OP_ADD,
    OP_CONST,
    OP_DIV,
    OP_MUL,
    OP_NEG,
    OP_POW,
    OP_SQRT,
    OP_SUB,
    OP_VAR,
    REL_EQ,
    REL_GE,
    REL_GT,
    REL_LE,
    REL_LT,
    CompiledConstraint,
)

BACKEND_NAME = "python"


def _eval_atom(cc: CompiledConstraint, atom: int, points: np.ndarray) -> np.ndarray:
    n = points.shape[0]
    stack: list[np.ndarray] = [None] * cc.stack_depth  # type: ignore[list-item]
    sp = 0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for i in range(cc.atom_starts[atom], cc.atom_starts[atom + 1]):
            op = cc.ops[i]
            arg = cc.args[i]
            if op == OP_CONST:
                stack[sp] = np.full(n, cc.consts[arg])
                sp += 1
            elif op == OP_VAR:
                stack[sp] = points[:, arg]
                sp += 1
            elif op == OP_NEG:
                stack[sp - 1] = -stack[sp - 1]
            elif op == OP_SQRT:
                stack[sp - 1] = np.sqrt(stack[sp - 1])
            elif op == OP_POW:
                x = stack[sp - 1]
                acc = np.ones(n)
                for _ in range(arg):
                    acc = acc * x
                stack[sp - 1] = acc
            else:
                b = stack[sp - 1]
                a = stack[sp - 2]
                sp -= 1
                if op == OP_ADD:
                    stack[sp - 1] = a + b
                elif op == OP_SUB:
                    stack[sp - 1] = a - b
                elif op == OP_MUL:
                    stack[sp - 1] = a * b
                else:
                    q = a / b
                    stack[sp - 1] = np.where(b == 0.0, np.nan, q)
    return stack[0]


def eval_expr_batch(cc: CompiledConstraint, atom: int, points: np.ndarray) -> np.ndarray:
    """Evaluate atom program `atom` (computing lhs - rhs) at each point."""
    return np.asarray(_eval_atom(cc, atom, points))


def indicator_batch(cc: CompiledConstraint, points: np.ndarray) -> tuple[np.ndarray, int]:
    """Conjunction indicator over points; returns (uint8 array, NaN point count)."""
    n = points.shape[0]
    sat = np.ones(n, dtype=bool)
    nan_seen = np.zeros(n, dtype=bool)
    for atom in range(len(cc.rels)):
        diff = _eval_atom(cc, atom, points)
        nan_seen |= np.isnan(diff)
        rel = cc.rels[atom]
        if rel == REL_LE:
            ok = diff <= 0.0
        elif rel == REL_LT:
            ok = diff < 0.0
        elif rel == REL_GE:
            ok = diff >= 0.0
        elif rel == REL_GT:
            ok = diff > 0.0
        else:
            ok = diff == 0.0
        sat &= ok
    return sat.astype(np.uint8), int(nan_seen.sum())


def mixture_logpdf(
    points: np.ndarray, means: np.ndarray, linv: np.ndarray, log_norm: float
) -> np.ndarray:
    """Log-density of an equally weighted Gaussian mixture with shared covariance.

    linv is the inverse of the lower Cholesky factor of the covariance;
    log_norm is the per-component normalizer -d/2*log(2pi) - sum(log(diag L)).
    """
    diff = points[:, None, :] - means[None, :, :]
    y = diff @ linv.T
    sq = np.einsum("knd,knd->kn", y, y)
    m = sq.min(axis=1)
    lse = np.log(np.exp(-0.5 * (sq - m[:, None])).sum(axis=1)) - 0.5 * m
    return log_norm - np.log(means.shape[0]) + lse
