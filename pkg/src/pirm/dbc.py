"""Domain-block cluster: parallel nanowires behind two shared TR ports.

The cluster holds ``x`` nanowires of ``y`` data domains each.  A row is the
bit at the same domain position across every wire; all wires shift in
lock-step, so one signed offset tracks the displacement of every wire at
once and the (rows x wires) tape matrix never moves.  The window of
``trd`` consecutive rows currently between the two ports is the PIM span:
transverse reads sense its per-wire ones-counts, and the multi-operand add
walks it wire by wire, chaining carries to the next wires.

State mutations are reported through an optional event sink (see
:mod:`pirm.microops`); without a sink the cluster is a free-standing
functional model.
"""

from dataclasses import dataclass

import numpy as np

from pirm import device, kernels
from pirm.errors import (
    AddressOutOfRange,
    BufferInvalid,
    EdgeColumnsNotZero,
    OperandsNotInSpan,
    ShiftOverflow,
    TooManyOperands,
    WidthOverflow,
)
from pirm.microops import Event, MicroOpKind

DEFAULT_X = 512
DEFAULT_Y = 32

BULK_OPS = ("OR", "NOR", "AND", "NAND", "XOR", "XNOR", "NOT")


@dataclass
class RowBuffer:
    bits: np.ndarray
    valid: bool = False


@dataclass(frozen=True)
class AddLayout:
    """Operand placement for one multi-operand addition.

    ``k_operands`` rows of packed ``n_bits``-wide words sit at the span's
    interior positions; the span's first and last rows are the reserved
    sum/super-carry and carry columns and must start zeroed.  ``stride``
    is the wire pitch between packed words (``None`` packs a single word
    using the whole row).  With ``wrap_field`` the walk covers every field
    position and truncates carries at the field boundary, yielding sums
    modulo ``2**stride``; otherwise the field must leave at least three
    zeroed gap columns so that carries die before the next word.
    """

    k_operands: int
    n_bits: int
    stride: int | None = None
    wrap_field: bool = False


class DBC:
    """One domain-block cluster with PIM-capable sensing."""

    def __init__(self, x: int = DEFAULT_X, y: int = DEFAULT_Y,
                 trd: int = device.DEFAULT_TRD, sink=None):
        if trd > y:
            raise ValueError("span cannot exceed the addressable rows")
        self.x = x
        self.y = y
        self.trd = trd
        self.port_left, self.port_right = device.default_port_positions(y, trd)
        self.offset = 0
        # Overhead domains are implied by the port placement: the data can
        # shift right until row 0 reaches the left port and left until the
        # last row reaches the right port.
        self.max_offset = self.port_left
        self.min_offset = -(y - 1 - self.port_right)
        self.tape = np.zeros((y, x), dtype=np.uint8)
        self.row_buffer = RowBuffer(bits=np.zeros(x, dtype=np.uint8))
        self.sink = sink

    # -- event plumbing --------------------------------------------------

    def _emit(self, kind: MicroOpKind, count: int = 1, row: int | None = None,
              **detail) -> None:
        if self.sink is not None and count > 0:
            self.sink(Event(kind=kind, count=count, row=row, detail=detail))

    # -- alignment ---------------------------------------------------------

    def _check_addr(self, addr: int) -> None:
        if not 0 <= addr < self.y:
            raise AddressOutOfRange(f"row {addr} outside 0..{self.y - 1}")

    def _shift_to(self, target_offset: int) -> None:
        if not self.min_offset <= target_offset <= self.max_offset:
            raise ShiftOverflow(
                f"offset {target_offset} outside [{self.min_offset}, {self.max_offset}]"
            )
        delta = abs(target_offset - self.offset)
        if delta:
            self._emit(MicroOpKind.DW_SHIFT, count=delta)
            self.offset = target_offset

    def _align_to_nearest_port(self, addr: int) -> None:
        """Shift lock-step until ``addr`` sits under the closest usable port."""
        candidates = [
            p - addr
            for p in (self.port_left, self.port_right)
            if self.min_offset <= p - addr <= self.max_offset
        ]
        self._shift_to(min(candidates, key=lambda t: abs(t - self.offset)))

    def align_span(self, base: int) -> None:
        """Place rows ``base .. base+trd-1`` between the ports."""
        if not 0 <= base <= self.y - self.trd:
            raise AddressOutOfRange(f"span base {base} outside 0..{self.y - self.trd}")
        self._shift_to(self.port_left - base)

    @property
    def span_base(self) -> int:
        """Row currently aligned with the left port."""
        return self.port_left - self.offset

    # -- row access --------------------------------------------------------

    def read_row(self, addr: int) -> np.ndarray:
        """Read one row (aligning it to the nearest port) into the row buffer."""
        self._check_addr(addr)
        self._align_to_nearest_port(addr)
        self._emit(MicroOpKind.READ_ROW, row=addr)
        bits = self.tape[addr].copy()
        self.row_buffer.bits[:] = bits
        self.row_buffer.valid = True
        return bits

    def write_row(self, addr: int, bits) -> None:
        """Write one row (aligning it to the nearest port)."""
        self._check_addr(addr)
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.shape != (self.x,):
            raise ValueError(f"row must have exactly {self.x} bits")
        self._align_to_nearest_port(addr)
        self._emit(MicroOpKind.WRITE_ROW, row=addr)
        self.tape[addr] = bits

    def load_row(self, addr: int, bits) -> None:
        """Deposit a row arriving from another cluster (one copy event)."""
        self._check_addr(addr)
        bits = np.asarray(bits, dtype=np.uint8)
        self._emit(MicroOpKind.INTER_BANK_COPY, row=addr)
        self.tape[addr] = bits

    def load_buffer(self, bits) -> None:
        """Deposit arriving data directly in the row buffer (one copy event)."""
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.shape != (self.x,):
            raise ValueError(f"row must have exactly {self.x} bits")
        self._emit(MicroOpKind.INTER_BANK_COPY)
        self.row_buffer.bits[:] = bits
        self.row_buffer.valid = True

    # -- transverse access ---------------------------------------------------

    def tr_counts(self, base: int) -> np.ndarray:
        """Per-wire ones-counts over span rows ``base .. base+trd-1``."""
        self.align_span(base)
        self._emit(MicroOpKind.TR, row=base)
        return kernels.span_counts(self.tape, base, base + self.trd - 1)

    def bulk_bitwise(self, op: str, operand_addrs, dst: int | None = None) -> np.ndarray:
        """Multi-operand bitwise logic over rows staged inside one span.

        The decoded result lands in the row buffer and is returned; pass
        ``dst`` to also write it back over a row.  Non-operand rows inside
        the sensed span must be zero-filled by the caller.
        """
        op = op.upper()
        if op not in BULK_OPS:
            raise ValueError(f"op must be one of {BULK_OPS}")
        addrs = list(operand_addrs)
        k = len(addrs)
        if k == 0 or (op == "NOT" and k != 1):
            raise TooManyOperands("NOT takes exactly one operand; others at least one")
        if k > self.trd:
            raise TooManyOperands(f"{k} operands exceed the {self.trd}-domain span")
        for a in addrs:
            self._check_addr(a)
        lo, hi = min(addrs), max(addrs)
        if hi - lo > self.trd - 1:
            raise OperandsNotInSpan(
                f"rows {lo}..{hi} do not fit a {self.trd}-row span"
            )
        base = min(lo, self.y - self.trd)
        counts = self.tr_counts(base).astype(np.int64)
        self._emit(MicroOpKind.BULK_OP, row=base, op=op, operands=k)
        if op == "OR":
            result = (counts >= 1).astype(np.uint8)
        elif op == "NOR" or op == "NOT":
            result = (counts < 1).astype(np.uint8)
        elif op == "AND":
            result = (counts >= k).astype(np.uint8)
        elif op == "NAND":
            result = (counts < k).astype(np.uint8)
        elif op == "XOR":
            result = (counts & 1).astype(np.uint8)
        else:  # XNOR
            result = (1 - (counts & 1)).astype(np.uint8)
        self.row_buffer.bits[:] = result
        self.row_buffer.valid = True
        if dst is not None:
            self.write_row(dst, result)
        return result

    def add_multi(self, layout: AddLayout, base: int = 0) -> np.ndarray:
        """Sum ``k_operands`` rows staged at span interior positions.

        Operands occupy rows ``base+1 .. base+k``; rows ``base`` and
        ``base+trd-1`` are the carry columns and must be zero.  The walk
        leaves bit ``k`` of each field's sum on wire ``field*stride + k``
        of row ``base``, which is returned.
        """
        k = layout.k_operands
        if not 2 <= k <= self.trd - 2:
            raise TooManyOperands(
                f"operand count {k} outside 2..{self.trd - 2}"
            )
        stride = layout.stride if layout.stride is not None else self.x
        if stride > self.x:
            raise WidthOverflow(f"field stride {stride} exceeds {self.x} wires")
        if layout.wrap_field:
            n_steps = stride
        else:
            n_steps = layout.n_bits + 3
            if stride - layout.n_bits < 3:
                raise WidthOverflow(
                    f"{stride}-wire fields leave a {stride - layout.n_bits}-column "
                    "gap; carries need at least 3"
                )
        if n_steps > self.x:
            raise WidthOverflow(f"result needs {n_steps} wires, only {self.x} exist")
        self.align_span(base)
        top = base + self.trd - 1
        if self.tape[base].any() or self.tape[top].any():
            raise EdgeColumnsNotZero(
                f"carry columns (rows {base} and {top}) must start zeroed"
            )
        bases = np.arange(0, self.x - stride + 1, stride, dtype=np.int64)
        kernels.add_walk(self.tape, base, self.trd, bases, stride, n_steps)
        # Each step is one transverse read plus one simultaneous write of
        # the sum/carry/super-carry bits.
        self._emit(MicroOpKind.TR, count=n_steps, row=base)
        self._emit(MicroOpKind.WRITE_ROW, count=n_steps, row=base)
        return self.tape[base].copy()

    # -- inter-wire movement ---------------------------------------------

    def logical_shift_write(self, src_addr: int, dst_addr: int,
                            field_stride: int | None = None) -> None:
        """Write ``dst = src << 1`` (wire ``i`` forwarded to wire ``i+1``).

        With ``field_stride`` the bit crossing each field boundary is
        dropped, confining every packed word to its own field.
        """
        self._check_addr(src_addr)
        self._check_addr(dst_addr)
        self._align_to_nearest_port(src_addr)
        shifted = np.zeros(self.x, dtype=np.uint8)
        shifted[1:] = self.tape[src_addr][:-1]
        if field_stride is not None:
            shifted[np.arange(0, self.x, field_stride)] = 0
        self._align_to_nearest_port(dst_addr)
        self._emit(MicroOpKind.LOGICAL_SHIFT_WRITE, row=dst_addr)
        self.tape[dst_addr] = shifted

    # -- predication and segmented shifting --------------------------------

    def predicated_row_reset(self, condition: int) -> None:
        """Zero the row buffer iff ``condition`` (uniform command stream)."""
        if not self.row_buffer.valid:
            raise BufferInvalid("row buffer holds no valid contents")
        self._emit(MicroOpKind.PRED_RESET)
        if condition:
            self.row_buffer.bits[:] = 0

    def predicated_row_reset_fields(self, field_mask, stride: int) -> None:
        """Zero individual word fields of the row buffer.

        Same uniform reset command as :meth:`predicated_row_reset`; the
        per-field predicate bits are evaluated locally at each field's
        write driver.
        """
        if not self.row_buffer.valid:
            raise BufferInvalid("row buffer holds no valid contents")
        self._emit(MicroOpKind.PRED_RESET)
        for f, fire in enumerate(field_mask):
            if fire:
                self.row_buffer.bits[f * stride : (f + 1) * stride] = 0

    def tw_rotate_step(self, write_bits) -> np.ndarray:
        """Transverse-write ``write_bits`` at the left port on every wire.

        The span segment shifts one position toward the right port; the
        row previously under the right port is returned (it exits to
        ground).  Rows outside the span and the shift offset are untouched,
        so ``trd`` applications cycle the span contents completely.
        """
        bits = np.asarray(write_bits, dtype=np.uint8)
        if bits.shape != (self.x,):
            raise ValueError(f"row must have exactly {self.x} bits")
        base = self.span_base
        self._emit(MicroOpKind.TW, row=base)
        return kernels.tw_rotate(self.tape, base, base + self.trd - 1, bits)

    # -- inspection ------------------------------------------------------

    def wire_snapshot(self, i: int) -> device.Nanowire:
        """Single-wire view as a standalone nanowire (copy, for checking)."""
        nw = device.Nanowire(
            data_len=self.y,
            port_positions=(self.port_left, self.port_right),
            trd=self.trd,
            values=self.tape[:, i],
        )
        nw.offset = self.offset
        return nw
