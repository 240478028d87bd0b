"""Bit-accurate model of a single domain-wall memory nanowire.

The wire is a fixed tape of binary domains plus a tracked shift offset:
instead of physically moving domain contents on every shift, the model
keeps the tape array in place and records how far the data has been
displaced relative to the fixed access ports.  Overhead domains at the
extremities absorb shifts; pushing a data domain past an extremity is a
hard :class:`~pirm.errors.ShiftOverflow`, never silent truncation.

Port positions are given in data-domain coordinates (the position a port
aligns with at offset zero).  A transverse read between two ports senses
the ones-count of every domain currently between them, endpoints included.
"""

from dataclasses import dataclass

import numpy as np

from pirm.errors import (
    InvalidPort,
    OverlappingSegments,
    ShiftOverflow,
    SpanTooWide,
)

#: Default maximum transverse-read distance (domains per span).
DEFAULT_TRD = 7

#: Extremity markers usable as span endpoints in place of a port index.
LEFT_END = "left_end"
RIGHT_END = "right_end"

LEFT = "left"
RIGHT = "right"


def default_port_positions(data_len: int, trd: int = DEFAULT_TRD) -> tuple[int, int]:
    """Two ports spaced ``trd`` domains apart, roughly centred on the data.

    For the stock 32-domain wire at trd=7 this yields data positions
    13 and 19 (14 and 20 when counting from one).
    """
    left = (data_len - trd + 1) // 2
    return (left, left + trd - 1)


@dataclass(frozen=True)
class TrSpan:
    """One transverse-read span between two ports or a port and an extremity.

    Endpoints are port indices, or :data:`LEFT_END` / :data:`RIGHT_END`.
    """

    low: int | str
    high: int | str


class Nanowire:
    """A nanowire: binary domains, access ports, shift bookkeeping."""

    def __init__(
        self,
        data_len: int,
        port_positions: tuple[int, ...] | None = None,
        overhead_left: int | None = None,
        overhead_right: int | None = None,
        trd: int = DEFAULT_TRD,
        values=None,
    ):
        if not 2 <= trd <= 15:
            raise ValueError(f"trd {trd} outside supported range 2..15")
        if port_positions is None:
            port_positions = default_port_positions(data_len, trd)
        ports = tuple(port_positions)
        if list(ports) != sorted(set(ports)):
            raise InvalidPort("port positions must be strictly increasing")
        if any(not 0 <= p < data_len for p in ports):
            raise InvalidPort(f"port positions {ports} outside data range")
        # Overheads default to exactly what full-range alignment needs:
        # the leftmost domain must reach the first port and the rightmost
        # the last port.
        if overhead_right is None:
            overhead_right = ports[0]
        if overhead_left is None:
            overhead_left = data_len - 1 - ports[-1]
        self.data_len = data_len
        self.port_positions = ports
        self.trd = trd
        self.overhead_left = overhead_left
        self.overhead_right = overhead_right
        self.offset = 0
        total = data_len + overhead_left + overhead_right
        self.tape = np.zeros(total, dtype=np.uint8)
        if values is not None:
            values = np.asarray(values, dtype=np.uint8)
            if values.shape != (data_len,):
                raise ValueError("values must match data_len")
            if not np.all(values <= 1):
                raise ValueError("domains hold binary values only")
            self.tape[overhead_left : overhead_left + data_len] = values

    # -- geometry helpers ----------------------------------------------------

    @property
    def total_len(self) -> int:
        return self.tape.shape[0]

    def data(self) -> np.ndarray:
        """Copy of the data-domain contents (offset-independent)."""
        lo = self.overhead_left
        return self.tape[lo : lo + self.data_len].copy()

    def _port_data_pos(self, port: int) -> int:
        if not 0 <= port < len(self.port_positions):
            raise InvalidPort(f"port {port} does not exist")
        return self.port_positions[port]

    def _tape_index(self, port: int) -> int:
        """Tape index of the domain currently aligned with ``port``."""
        idx = self.overhead_left + self._port_data_pos(port) - self.offset
        if not 0 <= idx < self.total_len:
            raise InvalidPort(
                f"port {port} aligned beyond the modeled tape (offset {self.offset})"
            )
        return idx

    # -- operations ------------------------------------------------------

    def shift(self, direction: str, count: int) -> None:
        """Displace every domain ``count`` positions toward ``direction``."""
        if count < 0:
            raise ValueError("shift count must be non-negative")
        if direction not in (LEFT, RIGHT):
            raise ValueError(f"direction must be {LEFT!r} or {RIGHT!r}")
        delta = count if direction == RIGHT else -count
        new_offset = self.offset + delta
        if new_offset > self.overhead_right:
            raise ShiftOverflow(
                f"shift right to offset {new_offset} exceeds the "
                f"{self.overhead_right} overhead domains on the right"
            )
        if new_offset < -self.overhead_left:
            raise ShiftOverflow(
                f"shift left to offset {new_offset} exceeds the "
                f"{self.overhead_left} overhead domains on the left"
            )
        self.offset = new_offset

    def read_at(self, port: int) -> int:
        """Value of the domain currently aligned with ``port``."""
        return int(self.tape[self._tape_index(port)])

    def write_at(self, port: int, value: int) -> None:
        """Write one bit at the domain aligned with ``port``."""
        if value not in (0, 1):
            raise ValueError("domains hold binary values only")
        self.tape[self._tape_index(port)] = value

    def _span_tape_range(self, span: TrSpan) -> tuple[int, int]:
        """Inclusive tape-index range a span currently covers."""
        if span.low == LEFT_END:
            lo = 0
        else:
            lo = self._tape_index(span.low)
        if span.high == RIGHT_END:
            hi = self.total_len - 1
        else:
            hi = self._tape_index(span.high)
        if hi < lo:
            raise InvalidPort("span endpoints out of order")
        return lo, hi

    def span_width(self, span: TrSpan) -> int:
        lo, hi = self._span_tape_range(span)
        return hi - lo + 1

    def transverse_read(self, span: TrSpan) -> int:
        """Exact ones-count of the domains in ``span`` (non-destructive)."""
        lo, hi = self._span_tape_range(span)
        width = hi - lo + 1
        if width > self.trd:
            raise SpanTooWide(f"span width {width} exceeds trd {self.trd}")
        return int(self.tape[lo : hi + 1].sum())

    def segmented_transverse_read(self, segments: list[TrSpan]) -> list[int]:
        """Ones-counts of several disjoint spans.

        Non-adjacent segments can be sensed simultaneously; overlap is an
        error because the shared current path would merge the readings.
        """
        ranges = [self._span_tape_range(s) for s in segments]
        for i, (lo_i, hi_i) in enumerate(ranges):
            if hi_i - lo_i + 1 > self.trd:
                raise SpanTooWide(
                    f"segment {i} width {hi_i - lo_i + 1} exceeds trd {self.trd}"
                )
            for lo_j, hi_j in ranges[i + 1 :]:
                if lo_i <= hi_j and lo_j <= hi_i:
                    raise OverlappingSegments("segments must be pairwise disjoint")
        return [self.transverse_read(s) for s in segments]

    def transverse_write(self, left_port: int, right_port: int, value: int) -> int:
        """Write at the left port while shifting only the spanned segment.

        Every domain strictly between the ports (and the one under the
        right port) takes its left neighbour's prior value; the bit that
        was under the right port exits to ground and is returned.  Domains
        outside the span, and the shift offset, are untouched.
        """
        if value not in (0, 1):
            raise ValueError("domains hold binary values only")
        lo = self._tape_index(left_port)
        hi = self._tape_index(right_port)
        if hi <= lo:
            raise InvalidPort("left_port must precede right_port")
        if hi - lo + 1 > self.trd:
            raise SpanTooWide(f"span width {hi - lo + 1} exceeds trd {self.trd}")
        evicted = int(self.tape[hi])
        self.tape[lo + 1 : hi + 1] = self.tape[lo:hi]
        self.tape[lo] = value
        return evicted
