# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot state-transform kernels.

Semantics match :mod:`pirm._kernels_py` bit for bit; equivalence is
enforced by tests/test_kernels.py.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def span_counts(cnp.uint8_t[:, ::1] tape, int lo, int hi):
    """Per-wire ones-count over tape rows ``lo..hi`` inclusive."""
    cdef Py_ssize_t x = tape.shape[1]
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] out = np.zeros(x, dtype=np.uint8)
    cdef cnp.uint8_t[::1] ov = out
    cdef Py_ssize_t r, w
    cdef int acc
    for w in range(x):
        acc = 0
        for r in range(lo, hi + 1):
            acc += tape[r, w]
        ov[w] = <cnp.uint8_t> acc
    return out


def add_walk(cnp.uint8_t[:, ::1] tape, int span_lo, int trd,
             cnp.int64_t[::1] bases, int stride, int n_steps):
    """Carry-chain walk of the multi-operand addition (see the numpy twin)."""
    cdef Py_ssize_t x = tape.shape[1]
    cdef Py_ssize_t nf = bases.shape[0]
    cdef int s_row = span_lo
    cdef int c_row = span_lo + trd - 1
    cdef Py_ssize_t f, w
    cdef int k, r, count
    for k in range(n_steps):
        for f in range(nf):
            w = bases[f] + k
            if w >= x:
                continue
            count = 0
            for r in range(span_lo, span_lo + trd):
                count += tape[r, w]
            tape[s_row, w] = <cnp.uint8_t> (count & 1)
            if k + 1 < stride and w + 1 < x:
                tape[c_row, w + 1] = <cnp.uint8_t> ((count >> 1) & 1)
            if k + 2 < stride and w + 2 < x:
                tape[s_row, w + 2] = <cnp.uint8_t> ((count >> 2) & 1)


def tw_rotate(cnp.uint8_t[:, ::1] tape, int lo, int hi, cnp.uint8_t[::1] write_bits):
    """Transverse write across all wires; returns the evicted row."""
    cdef Py_ssize_t x = tape.shape[1]
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] evicted = np.empty(x, dtype=np.uint8)
    cdef cnp.uint8_t[::1] ev = evicted
    cdef Py_ssize_t w
    cdef int r
    for w in range(x):
        ev[w] = tape[hi, w]
        for r in range(hi, lo, -1):
            tape[r, w] = tape[r - 1, w]
        tape[lo, w] = write_bits[w]
    return evicted
