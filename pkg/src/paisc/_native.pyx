# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled evaluation kernels: constraint indicators and mixture log-density.

Mirrors paisc._kernels_py exactly (same opcodes, NaN rules and relation
codes); the pure backend is the import-time fallback when this extension is
unavailable. Expression programs are evaluated slab-wise: one opcode dispatch
per instruction with a tight inner loop over a chunk of points, which keeps
the interpreter overhead negligible and lets the compiler vectorize.
"""

from libc.math cimport INFINITY, NAN, exp, isnan, log, sqrt

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND_NAME = "cython"

DEF OP_CONST = 0
DEF OP_VAR = 1
DEF OP_NEG = 2
DEF OP_SQRT = 3
DEF OP_ADD = 4
DEF OP_SUB = 5
DEF OP_MUL = 6
DEF OP_DIV = 7
DEF OP_POW = 8

DEF REL_LE = 0
DEF REL_LT = 1
DEF REL_GE = 2
DEF REL_GT = 3
DEF REL_EQ = 4

DEF CHUNK = 8192


cdef void _run_program_slab(
    const int* ops, const int* args, const double* consts,
    int start, int end,
    const double* pts, Py_ssize_t n_pts, Py_ssize_t dim, Py_ssize_t offset,
    Py_ssize_t n, double* stack, double* out,
) noexcept nogil:
    """Evaluate one postfix program on points [offset, offset+n); result in out."""
    cdef int i, op, arg, k
    cdef Py_ssize_t j, sp = 0
    cdef double v, b
    cdef double* top
    cdef double* below
    for i in range(start, end):
        op = ops[i]
        arg = args[i]
        if op == OP_CONST:
            top = stack + sp * n
            v = consts[arg]
            for j in range(n):
                top[j] = v
            sp += 1
        elif op == OP_VAR:
            top = stack + sp * n
            for j in range(n):
                top[j] = pts[(offset + j) * dim + arg]
            sp += 1
        elif op == OP_NEG:
            top = stack + (sp - 1) * n
            for j in range(n):
                top[j] = -top[j]
        elif op == OP_SQRT:
            top = stack + (sp - 1) * n
            for j in range(n):
                top[j] = sqrt(top[j]) if top[j] >= 0.0 else NAN
        elif op == OP_POW:
            top = stack + (sp - 1) * n
            for j in range(n):
                v = 1.0
                for k in range(arg):
                    v = v * top[j]
                top[j] = v
        else:
            top = stack + (sp - 1) * n
            below = stack + (sp - 2) * n
            sp -= 1
            if op == OP_ADD:
                for j in range(n):
                    below[j] = below[j] + top[j]
            elif op == OP_SUB:
                for j in range(n):
                    below[j] = below[j] - top[j]
            elif op == OP_MUL:
                for j in range(n):
                    below[j] = below[j] * top[j]
            else:
                for j in range(n):
                    b = top[j]
                    below[j] = below[j] / b if b != 0.0 else NAN
    for j in range(n):
        out[j] = stack[j]


cdef class _Program:
    cdef cnp.ndarray ops, args, consts, starts, rels
    cdef int depth, n_atoms

    def __init__(self, cc):
        self.ops = np.ascontiguousarray(cc.ops, dtype=np.int32)
        self.args = np.ascontiguousarray(cc.args, dtype=np.int32)
        self.consts = np.ascontiguousarray(cc.consts, dtype=np.float64)
        self.starts = np.ascontiguousarray(cc.atom_starts, dtype=np.int32)
        self.rels = np.ascontiguousarray(cc.rels, dtype=np.int8)
        self.depth = int(cc.stack_depth)
        self.n_atoms = len(cc.rels)


def eval_expr_batch(cc, int atom, cnp.ndarray[cnp.float64_t, ndim=2] points not None):
    """Evaluate atom program `atom` (computing lhs - rhs) at each point."""
    prog = _Program(cc)
    cdef const int[::1] ops = prog.ops
    cdef const int[::1] args = prog.args
    cdef const double[::1] consts = prog.consts
    cdef const int[::1] starts = prog.starts
    cdef cnp.ndarray[cnp.float64_t, ndim=2] pts = np.ascontiguousarray(points)
    cdef Py_ssize_t n_pts = pts.shape[0], dim = pts.shape[1], done = 0, n
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n_pts, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] stack = np.empty(prog.depth * CHUNK, dtype=np.float64)
    cdef const double* c0 = NULL
    if prog.consts.shape[0] > 0:
        c0 = &consts[0]
    cdef int start = starts[atom], end = starts[atom + 1]
    with nogil:
        while done < n_pts:
            n = n_pts - done
            if n > CHUNK:
                n = CHUNK
            _run_program_slab(&ops[0], &args[0], c0, start, end,
                              &pts[0, 0], n_pts, dim, done, n,
                              <double*> stack.data, <double*> out.data + done)
            done += n
    return out


def indicator_batch(cc, cnp.ndarray[cnp.float64_t, ndim=2] points not None):
    """Conjunction indicator over points; returns (uint8 array, NaN point count)."""
    prog = _Program(cc)
    cdef const int[::1] ops = prog.ops
    cdef const int[::1] args = prog.args
    cdef const double[::1] consts = prog.consts
    cdef const int[::1] starts = prog.starts
    cdef const signed char[::1] rels = prog.rels
    cdef cnp.ndarray[cnp.float64_t, ndim=2] pts = np.ascontiguousarray(points)
    cdef Py_ssize_t n_pts = pts.shape[0], dim = pts.shape[1], done = 0, n, j
    cdef int n_atoms = prog.n_atoms, atom, rel, ok
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] sat = np.empty(n_pts, dtype=np.uint8)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] stack = np.empty(prog.depth * CHUNK, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] diff = np.empty(CHUNK, dtype=np.float64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] nan_row = np.empty(CHUNK, dtype=np.uint8)
    cdef double* dptr = <double*> diff.data
    cdef unsigned char* nptr = <unsigned char*> nan_row.data
    cdef unsigned char* sptr
    cdef long nan_count = 0
    cdef double v
    cdef const double* c0 = NULL
    if prog.consts.shape[0] > 0:
        c0 = &consts[0]
    with nogil:
        while done < n_pts:
            n = n_pts - done
            if n > CHUNK:
                n = CHUNK
            sptr = <unsigned char*> sat.data + done
            for j in range(n):
                sptr[j] = 1
                nptr[j] = 0
            for atom in range(n_atoms):
                _run_program_slab(&ops[0], &args[0], c0,
                                  starts[atom], starts[atom + 1],
                                  &pts[0, 0], n_pts, dim, done, n,
                                  <double*> stack.data, dptr)
                rel = rels[atom]
                for j in range(n):
                    v = dptr[j]
                    if isnan(v):
                        nptr[j] = 1
                    if rel == REL_LE:
                        ok = v <= 0.0
                    elif rel == REL_LT:
                        ok = v < 0.0
                    elif rel == REL_GE:
                        ok = v >= 0.0
                    elif rel == REL_GT:
                        ok = v > 0.0
                    else:
                        ok = v == 0.0
                    if not ok:
                        sptr[j] = 0
            for j in range(n):
                if nptr[j]:
                    nan_count += 1
            done += n
    return sat, nan_count


def mixture_logpdf(
    cnp.ndarray[cnp.float64_t, ndim=2] points not None,
    cnp.ndarray[cnp.float64_t, ndim=2] means not None,
    cnp.ndarray[cnp.float64_t, ndim=2] linv not None,
    double log_norm,
):
    """Log-density of an equally weighted Gaussian mixture with shared covariance.

    linv is the inverse of the lower Cholesky factor of the covariance;
    log_norm is the per-component normalizer -d/2*log(2pi) - sum(log(diag L)).
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=2] pts = np.ascontiguousarray(points)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] mus = np.ascontiguousarray(means)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] li = np.ascontiguousarray(linv)
    cdef Py_ssize_t k = pts.shape[0], nc = mus.shape[0], d = pts.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(k, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] sqbuf = np.empty(nc, dtype=np.float64)
    cdef double* sq = <double*> sqbuf.data
    cdef Py_ssize_t i, n, r, c
    cdef double acc, y, m, s
    cdef double log_n = log(<double> nc)
    with nogil:
        for i in range(k):
            m = INFINITY
            for n in range(nc):
                acc = 0.0
                for r in range(d):
                    y = 0.0
                    for c in range(r + 1):
                        y += li[r, c] * (pts[i, c] - mus[n, c])
                    acc += y * y
                sq[n] = acc
                if acc < m:
                    m = acc
            s = 0.0
            for n in range(nc):
                s += exp(-0.5 * (sq[n] - m))
            out[i] = log_norm - log_n + log(s) - 0.5 * m
    return out
