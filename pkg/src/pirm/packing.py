"""Host-side marshalling between integers and packed bit rows.

A row is a vector of one bit per wire.  Words are packed least-significant
bit first at fixed field strides, so wire ``f*stride + k`` holds bit ``k``
of word ``f``.  Multi-operand addition stacks such rows at adjacent row
addresses, which places bit ``k`` of every operand on the same wire.
"""

import numpy as np


def pack_words(values, stride: int, width: int, x: int) -> np.ndarray:
    """Pack ``values`` as ``width``-bit words at ``stride``-wire fields."""
    values = list(values)
    if len(values) * stride > x:
        raise ValueError(f"{len(values)} fields of stride {stride} exceed {x} wires")
    if width > stride:
        raise ValueError(f"width {width} exceeds stride {stride}")
    row = np.zeros(x, dtype=np.uint8)
    for f, v in enumerate(values):
        v = int(v)
        if v < 0 or v >> width:
            raise ValueError(f"value {v} does not fit {width} bits")
        base = f * stride
        for k in range(width):
            row[base + k] = (v >> k) & 1
    return row


def unpack_words(row: np.ndarray, stride: int, width: int, count: int) -> list[int]:
    """Read ``count`` ``width``-bit words back out of a packed row."""
    out = []
    for f in range(count):
        base = f * stride
        bits = row[base : base + width]
        out.append(int(sum(int(b) << k for k, b in enumerate(bits))))
    return out


def broadcast_word(value: int, stride: int, width: int, x: int, fields: int) -> np.ndarray:
    """A row with the same word in every one of ``fields`` fields."""
    return pack_words([value] * fields, stride, width, x)


def row_as_int(row: np.ndarray) -> int:
    """Whole row as one integer, wire 0 least significant."""
    return int(sum(int(b) << k for k, b in enumerate(row)))


def int_as_row(value: int, x: int) -> np.ndarray:
    """Inverse of :func:`row_as_int`."""
    if value < 0 or value >> x:
        raise ValueError(f"value does not fit {x} wires")
    row = np.zeros(x, dtype=np.uint8)
    for k in range(x):
        row[k] = (value >> k) & 1
    return row
