"""Pure-numpy implementations of the hot state-transform kernels.

These mirror :mod:`pirm._kernels_cy` exactly; the compiled module is
preferred at import time when available (see :mod:`pirm.kernels`).  The
tape is the cluster's (rows x wires) uint8 matrix.
"""

import numpy as np


def span_counts(tape: np.ndarray, lo: int, hi: int) -> np.ndarray:
    """Per-wire ones-count over tape rows ``lo..hi`` inclusive."""
    return tape[lo : hi + 1].sum(axis=0, dtype=np.uint8)


def add_walk(
    tape: np.ndarray,
    span_lo: int,
    trd: int,
    bases: np.ndarray,
    stride: int,
    n_steps: int,
) -> None:
    """Carry-chain walk of the multi-operand addition, all fields in lock-step.

    Step ``k`` senses the span column of wire ``base+k`` in every field,
    writes the count's low bit to the span's first row of that wire, the
    carry bit to the span's last row of wire ``base+k+1``, and the
    super-carry bit to the first row of wire ``base+k+2``.  Writes that
    would land at or beyond the field stride are suppressed (they are
    provably zero when the field has adequate gap, and implement the
    modulo-field semantics otherwise).
    """
    x = tape.shape[1]
    hi = span_lo + trd
    s_row = span_lo
    c_row = span_lo + trd - 1
    bases = np.asarray(bases, dtype=np.int64)
    for k in range(n_steps):
        wires = bases + k
        wires = wires[wires < x]
        counts = tape[span_lo:hi, :].take(wires, axis=1).sum(axis=0)
        tape[s_row, wires] = counts & 1
        if k + 1 < stride:
            w1 = bases + k + 1
            w1 = w1[w1 < x]
            tape[c_row, w1] = ((counts >> 1) & 1)[: w1.shape[0]]
        if k + 2 < stride:
            w2 = bases + k + 2
            w2 = w2[w2 < x]
            tape[s_row, w2] = ((counts >> 2) & 1)[: w2.shape[0]]


def tw_rotate(tape: np.ndarray, lo: int, hi: int, write_bits: np.ndarray) -> np.ndarray:
    """Transverse write across all wires: shift span rows ``lo..hi`` down one.

    Row ``lo`` takes ``write_bits``; the prior contents of row ``hi`` are
    returned (they exit to ground).
    """
    evicted = tape[hi].copy()
    tape[lo + 1 : hi + 1] = tape[lo:hi]
    tape[lo] = write_bits
    return evicted
