"""Combinational semantics of the PIM block behind a transverse read.

A transverse read reports how many of the spanned domains hold `1`.  The
sense amplifier turns that count into seven thermometer-coded level bits,
and a small decode block derives the bulk-bitwise outputs plus the sum /
carry / super-carry triple used by multi-operand addition.  Everything in
this module is a pure function of the ones-count; nothing here touches
memory state.
"""

from dataclasses import dataclass

from pirm.errors import CountOutOfRange

#: Largest ones-count the standard seven-level sense amplifier resolves.
MAX_SENSE_COUNT = 7


@dataclass(frozen=True)
class SenseLevels:
    """Thermometer-coded level bits: ``s(j)`` is true iff count >= j."""

    levels: tuple[bool, ...]  # levels[j-1] == (count >= j), j = 1..7

    def s(self, j: int) -> bool:
        if not 1 <= j <= MAX_SENSE_COUNT:
            raise CountOutOfRange(f"level index {j} outside 1..{MAX_SENSE_COUNT}")
        return self.levels[j - 1]

    @property
    def count(self) -> int:
        """Ones-count recovered from the thermometer code."""
        return sum(self.levels)


@dataclass(frozen=True)
class LogicOutputs:
    """Decoded outputs of one PIM block for a single ones-count.

    ``sum_``/``carry``/``super_carry`` are the binary expansion of the
    count: count == sum_ + 2*carry + 4*super_carry.
    """

    or_: int
    nor: int
    and_: int
    nand: int
    xor: int
    xnor: int
    not_: int
    sum_: int
    carry: int
    super_carry: int


def sense(ones_count: int) -> SenseLevels:
    """Convert a ones-count into the seven thermometer level bits."""
    if not 0 <= ones_count <= MAX_SENSE_COUNT:
        raise CountOutOfRange(
            f"ones_count {ones_count} outside 0..{MAX_SENSE_COUNT}"
        )
    return SenseLevels(tuple(ones_count >= j for j in range(1, MAX_SENSE_COUNT + 1)))


def decode(levels: SenseLevels, n_operands: int) -> LogicOutputs:
    """Decode sense levels into bulk-bitwise and add outputs.

    ``n_operands`` is the number of live operand positions; the remaining
    span positions are assumed zero-filled, which is why the AND threshold
    is the n-th level rather than a fixed seventh level.
    """
    if not 1 <= n_operands <= MAX_SENSE_COUNT:
        raise CountOutOfRange(f"n_operands {n_operands} outside 1..{MAX_SENSE_COUNT}")
    count = levels.count
    or_ = int(count >= 1)
    and_ = int(count >= n_operands)
    xor = count & 1
    carry = (count >> 1) & 1
    super_carry = (count >> 2) & 1
    return LogicOutputs(
        or_=or_,
        nor=1 - or_,
        and_=and_,
        nand=1 - and_,
        xor=xor,
        xnor=1 - xor,
        not_=1 - or_,
        sum_=xor,
        carry=carry,
        super_carry=super_carry,
    )


def decode_wide(ones_count: int, n_operands: int) -> tuple[int, int, int, int]:
    """Experimental decode for sense circuits resolving counts up to 15.

    Returns ``(sum, carry, super_carry, hyper_carry)`` -- the four-bit
    binary expansion of the count, where the fourth bit would be driven
    three bitlines ahead.  Only the decode is modeled; the standard
    seven-level datapath does not use it.
    """
    if not 0 <= ones_count <= 15:
        raise CountOutOfRange(f"ones_count {ones_count} outside 0..15")
    if not 1 <= n_operands <= 15:
        raise CountOutOfRange(f"n_operands {n_operands} outside 1..15")
    return (
        ones_count & 1,
        (ones_count >> 1) & 1,
        (ones_count >> 2) & 1,
        (ones_count >> 3) & 1,
    )
