"""Word-level algorithms composed from cluster primitives.

Multiplication comes in three flavours: constant multipliers are recoded
into signed digits and scheduled as a handful of shift-and-add steps;
arbitrary multipliers sum shifted copies selected by their set bits; and
the optimized path builds all shifted copies, predicates them away with
the multiplier bits, then collapses them with carry-save style 7-to-3
reductions before one final multi-operand add.  Max, ReLU, convolution,
pooling and fully-connected layers are built on the same walk, rotate and
predication primitives.

Packed words use ``stride = 2*width`` wire fields so products have room;
sums inside a field are modulo ``2**stride``, which is also how negative
terms are realized (complement plus an injected correction).
"""

from dataclasses import dataclass

import numpy as np

from pirm import packing
from pirm.dbc import DBC, AddLayout
from pirm.errors import (
    ScratchUnavailable,
    TooManyOperands,
    WidthOverflow,
)

# Fixed scratch-row map used by the schedule executor (y >= 20).
_ADD_BASE = 0      # add span: rows 0..6, operands at 1..5
_NOT_BASE = 8      # complement span: rows 8..14, operand staged at 9
_NOT_ROW = 9
_CHAIN_A = 16      # alternating rows for logical-shift chains
_CHAIN_B = 17
_T_ROW = 18        # running result between schedule steps


# -- constant-multiplier recoding ------------------------------------------


@dataclass(frozen=True)
class SignedDigitString:
    """Canonical signed-digit form: digits in {-1, 0, +1}, MSB first."""

    digits: tuple[int, ...]

    def value(self) -> int:
        v = 0
        for d in self.digits:
            v = (v << 1) + d
        return v

    def nonzeros(self) -> list[tuple[int, int]]:
        """(bit position, sign) pairs, ascending by position."""
        n = len(self.digits)
        return [
            (n - 1 - i, d)
            for i, d in reversed(list(enumerate(self.digits)))
            if d != 0
        ]

    def __str__(self) -> str:
        if not self.digits:
            return "0"
        return "".join("P" if d > 0 else "N" if d < 0 else "0" for d in self.digits)


def recode_csd(constant: int) -> SignedDigitString:
    """Canonical signed-digit (non-adjacent) form of a non-negative constant."""
    if constant < 0:
        raise ValueError("constant must be non-negative")
    n = constant
    digits = []  # LSB first
    while n:
        if n & 1:
            d = 2 - (n & 3)  # +1 when n % 4 == 1, else -1
            n -= d
        else:
            d = 0
        digits.append(d)
        n >>= 1
    return SignedDigitString(tuple(reversed(digits)))


# -- multiplication schedules ------------------------------------------------


@dataclass(frozen=True)
class MulTerm:
    """One addend: a shifted copy of the input or of the prior step's result."""

    source: str  # "input" or "prior"
    shift: int
    negate: bool = False


@dataclass(frozen=True)
class MulStep:
    terms: tuple[MulTerm, ...]

    @property
    def operand_count(self) -> int:
        """Span slots used: one per term plus one shared correction row."""
        return len(self.terms) + (1 if any(t.negate for t in self.terms) else 0)


@dataclass(frozen=True)
class MulSchedule:
    """Addition steps realizing ``constant * A``; empty steps = pure shift."""

    constant: int
    steps: tuple[MulStep, ...]
    shift: int = 0  # applied when steps is empty and constant != 0

    def evaluate(self, a: int) -> int:
        """Run the schedule over plain integers (negation as subtraction)."""
        if self.constant == 0:
            return 0
        if not self.steps:
            return a << self.shift
        prior = 0
        for step in self.steps:
            acc = 0
            for t in step.terms:
                src = a if t.source == "input" else prior
                term = src << t.shift
                acc += -term if t.negate else term
            prior = acc
        return prior


def _fits_budget(terms, budget: int) -> bool:
    return len(terms) + (1 if any(t.negate for t in terms) else 0) <= budget


def plan_partial_products(multiplier: int, budget: int) -> MulSchedule:
    """Shift-and-add plan from the multiplier's set bits, grouped by budget.

    The first group sums up to ``budget`` shifted copies; each later group
    carries the running total as one of its operands.
    """
    if multiplier < 0:
        raise ValueError("multiplier must be non-negative")
    bits = [i for i in range(multiplier.bit_length()) if (multiplier >> i) & 1]
    if not bits:
        return MulSchedule(constant=multiplier, steps=())
    if len(bits) == 1:
        return MulSchedule(constant=multiplier, steps=(), shift=bits[0])
    steps = []
    first, rest = bits[:budget], bits[budget:]
    steps.append(MulStep(tuple(MulTerm("input", s) for s in first)))
    while rest:
        chunk, rest = rest[: budget - 1], rest[budget - 1 :]
        terms = [MulTerm("prior", 0)] + [MulTerm("input", s) for s in chunk]
        steps.append(MulStep(tuple(terms)))
    return MulSchedule(constant=multiplier, steps=tuple(steps))


def _find_pattern_plan(constant: int, nz, budget: int) -> MulSchedule | None:
    """Two-step plan reusing one repeated signed-digit pattern, if any fits.

    A pattern is a subset of the digit string, normalized so its lowest
    digit is positive; occurrences may appear sign-flipped at other
    shifts.  Greedy: prefer patterns saving the most addition slots.
    """
    import itertools

    nz_set = {pos: sign for pos, sign in nz}
    positions = [p for p, _ in nz]
    best = None  # (savings, -len, plan)
    for size in (4, 3, 2):
        if len(nz) < 2 * size - 1:
            continue
        for subset in itertools.combinations(range(len(nz)), size):
            base_pos, base_sign = nz[subset[0]]
            rel = tuple(
                (nz[i][0] - base_pos, nz[i][1] * base_sign) for i in subset
            )
            # Occurrences anchored at any digit, allowing a global sign flip.
            occs = []
            used: set[int] = set()
            for anchor, sigma in nz:
                covered = []
                ok = True
                for dp, ds in rel:
                    p = anchor + dp
                    if nz_set.get(p) != ds * sigma or p in used:
                        ok = False
                        break
                    covered.append(p)
                if ok:
                    occs.append((anchor, sigma))
                    used.update(covered)
            if len(occs) < 2:
                continue
            pattern_value = sum(s << p for p, s in rel)
            v_sign = 1 if pattern_value > 0 else -1
            v_abs = abs(pattern_value)
            step1 = _best_single_step(v_abs, budget)
            if step1 is None:
                continue
            leftovers = [(p, s) for p, s in nz if p not in used]
            terms2 = [
                MulTerm("prior", shift, (sigma * v_sign) < 0)
                for shift, sigma in occs
            ] + [MulTerm("input", p, s < 0) for p, s in leftovers]
            if not _fits_budget(terms2, budget):
                continue
            savings = (len(occs) - 1) * (size - 1)
            cand = (savings, size, MulSchedule(
                constant=constant,
                steps=(step1, MulStep(tuple(terms2))),
            ))
            if best is None or (cand[0], cand[1]) > (best[0], best[1]):
                best = cand
    return best[2] if best else None


def _best_single_step(value: int, budget: int) -> MulStep | None:
    """Cheapest one-step realization of ``value * A``: binary or signed digits."""
    bits = [i for i in range(value.bit_length()) if (value >> i) & 1]
    binary = [MulTerm("input", s) for s in bits]
    csd_terms = [MulTerm("input", p, s < 0) for p, s in recode_csd(value).nonzeros()]
    candidates = [t for t in (binary, csd_terms) if _fits_budget(t, budget)]
    if not candidates:
        return None
    chosen = min(
        candidates,
        key=lambda t: len(t) + (1 if any(x.negate for x in t) else 0),
    )
    return MulStep(tuple(chosen))


def plan_const_mul(constant: int, trd: int = 7) -> MulSchedule:
    """Schedule for multiplying by a compile-time constant.

    Canonical signed-digit recoding, then greedy reuse of one repeated
    digit pattern (two levels); falls back to plain partial-product
    grouping when the pattern plan busts the operand budget.
    """
    if constant < 0:
        raise ValueError("constant must be non-negative")
    budget = trd - 2
    if constant == 0:
        return MulSchedule(constant=0, steps=())
    csd = recode_csd(constant)
    nz = csd.nonzeros()
    if len(nz) == 1:
        return MulSchedule(constant=constant, steps=(), shift=nz[0][0])
    step = _best_single_step(constant, budget)
    if step is not None:
        return MulSchedule(constant=constant, steps=(step,))
    plan = _find_pattern_plan(constant, nz, budget)
    if plan is not None:
        return plan
    return plan_partial_products(constant, budget)


# -- row utilities -----------------------------------------------------------


def shift_row_bits(bits: np.ndarray, k: int, field_stride: int | None = None) -> np.ndarray:
    """Row shifted ``k`` wires up; field boundaries drop crossing bits."""
    out = np.zeros_like(bits)
    if k == 0:
        out[:] = bits
    else:
        out[k:] = bits[:-k]
    if field_stride is not None and k > 0:
        out[np.arange(out.shape[0]) % field_stride < k] = 0
    return out


def _zero_row(dbc: DBC) -> np.ndarray:
    return np.zeros(dbc.x, dtype=np.uint8)


def _complement_row(dbc: DBC, value_row: np.ndarray) -> np.ndarray:
    """Bitwise complement via the NOR output over a clean span window."""
    dbc.write_row(_NOT_ROW, value_row)
    result = dbc.bulk_bitwise("NOT", [_NOT_ROW])
    dbc.write_row(_NOT_ROW, _zero_row(dbc))
    return result


def _staged_add(dbc: DBC, rows: list[np.ndarray], stride: int) -> np.ndarray:
    """Stage rows at the span interior and run one wrapped add walk."""
    k = len(rows)
    for i in range(1, dbc.trd - 1):
        bits = rows[i - 1] if i <= k else _zero_row(dbc)
        dbc.write_row(_ADD_BASE + i, bits)
    dbc.write_row(_ADD_BASE, _zero_row(dbc))
    dbc.write_row(_ADD_BASE + dbc.trd - 1, _zero_row(dbc))
    layout = AddLayout(k_operands=k, n_bits=stride, stride=stride, wrap_field=True)
    return dbc.add_multi(layout, base=_ADD_BASE)


def signed_accumulate(dbc: DBC, terms, stride: int, n_fields: int) -> np.ndarray:
    """Sum (row, negate) terms modulo ``2**stride`` per field.

    Negated rows are complemented through the NOR path and their +1
    corrections merged into a single injected constant row, which costs
    one additional operand slot per addition step.  Terms beyond one
    step's budget are chained through the running total.
    """
    budget = dbc.trd - 2
    pending = list(terms)
    total: np.ndarray | None = None
    while pending or total is None:
        group: list[tuple[np.ndarray, bool]] = []
        if total is not None:
            group.append((total, False))
        while pending:
            trial = group + [pending[0]]
            slots = len(trial) + (1 if any(n for _, n in trial) else 0)
            if slots > budget:
                break
            group.append(pending.pop(0))
        rows = []
        corrections = 0
        for bits, neg in group:
            if neg:
                rows.append(_complement_row(dbc, bits))
                corrections += 1
            else:
                rows.append(np.asarray(bits, dtype=np.uint8))
        if corrections:
            rows.append(
                packing.pack_words([corrections] * n_fields, stride, stride, dbc.x)
            )
        if len(rows) == 1:
            total = rows[0].copy()
        else:
            total = _staged_add(dbc, rows, stride)
    return total


# -- constant / arbitrary multiplication ------------------------------------


def _stage_shifted(dbc: DBC, src_addr: int, shifts: list[int], stride: int) -> dict[int, np.ndarray]:
    """Build the needed shifted copies of a row through the inter-wire path.

    Copies are produced incrementally (one logical shift per position, as
    the hardware forwards bit ``i`` to ``i+1``), so ``max(shifts)`` shift
    writes cover every requested amount.
    """
    out: dict[int, np.ndarray] = {}
    if not shifts:
        return out
    if 0 in shifts:
        out[0] = dbc.read_row(src_addr)
    chain = [_CHAIN_A, _CHAIN_B]
    cur_addr = src_addr
    for s in range(1, max(shifts) + 1):
        dst = chain[s % 2]
        dbc.logical_shift_write(cur_addr, dst, field_stride=stride)
        cur_addr = dst
        if s in shifts:
            out[s] = dbc.read_row(dst)
    return out


def execute_mul_schedule(dbc: DBC, a_addr: int, schedule: MulSchedule,
                         width: int, n_fields: int | None = None) -> np.ndarray:
    """Run a multiplication schedule against packed words in a cluster.

    The multiplicand sits at ``a_addr`` as ``width``-bit words in
    ``2*width``-wire fields; each field of the returned row holds
    ``constant * word mod 2**(2*width)``.
    """
    stride = 2 * width
    fields = n_fields if n_fields is not None else dbc.x // stride
    if schedule.constant == 0:
        return _zero_row(dbc)
    if not schedule.steps:
        copies = _stage_shifted(dbc, a_addr, [schedule.shift], stride)
        return copies[schedule.shift]
    result: np.ndarray | None = None
    for step in schedule.steps:
        input_shifts = sorted({t.shift for t in step.terms if t.source == "input"})
        prior_shifts = sorted({t.shift for t in step.terms if t.source == "prior"})
        staged = _stage_shifted(dbc, a_addr, input_shifts, stride)
        if prior_shifts:
            dbc.write_row(_T_ROW, result)
            staged_prior = _stage_shifted(dbc, _T_ROW, prior_shifts, stride)
        terms = []
        for t in step.terms:
            bits = staged[t.shift] if t.source == "input" else staged_prior[t.shift]
            terms.append((bits, t.negate))
        result = signed_accumulate(dbc, terms, stride, fields)
    return result


def mul_const(dbc: DBC, a_addr: int, constant: int, width: int) -> np.ndarray:
    """Multiply packed words by a constant via its recoded schedule."""
    schedule = plan_const_mul(constant, dbc.trd)
    return execute_mul_schedule(dbc, a_addr, schedule, width)


def mul_arbitrary(dbc: DBC, a_addr: int, multiplier: int, width: int) -> np.ndarray:
    """Multiply packed words by a runtime value via its set bits."""
    if multiplier < 0:
        raise ValueError("multiplier must be non-negative")
    schedule = plan_partial_products(multiplier, dbc.trd - 2)
    return execute_mul_schedule(dbc, a_addr, schedule, width)


# -- carry-save reduction and optimized multiplication -----------------------


def reduce_7_3(dbc: DBC, operand_addrs) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Collapse up to ``trd`` rows into sum, carry and super-carry rows.

    One transverse read per wire yields the column ones-count whose binary
    expansion is returned: total is preserved as S + 2C + 4C'.  The carry
    rows come back unshifted; consumers apply the weight-2 and weight-4
    alignment when storing them.
    """
    addrs = sorted(operand_addrs)
    if len(addrs) > dbc.trd:
        raise TooManyOperands(f"{len(addrs)} rows exceed the {dbc.trd}-domain span")
    base = min(addrs[0], dbc.y - dbc.trd)
    counts = dbc.tr_counts(base)
    s = (counts & 1).astype(np.uint8)
    c = ((counts >> 1) & 1).astype(np.uint8)
    cp = ((counts >> 2) & 1).astype(np.uint8)
    return s, c, cp


def _store_reduction(dbc: DBC, base_addr: int, s, c, cp, stride: int) -> None:
    """Write an S/C/C' triple weight-aligned, as one simultaneous write."""
    from pirm.microops import MicroOpKind

    dbc._check_addr(base_addr + 2)
    dbc._emit(MicroOpKind.WRITE_ROW, row=base_addr)
    dbc.tape[base_addr] = s
    dbc.tape[base_addr + 1] = shift_row_bits(c, 1, stride)
    dbc.tape[base_addr + 2] = shift_row_bits(cp, 2, stride)


def mul_optimized(dbc: DBC, scratch: DBC, a_row, b_row, width: int,
                  n: int | None = None) -> np.ndarray:
    """Parallel multiplication of packed word pairs, one product per field.

    Builds the ``width`` shifted copies of the multiplicand row, zeroes
    copy ``i`` in field ``j`` wherever multiplier bit ``i`` of word ``j``
    is clear (predicated writes of the precharged zero driver), reduces
    the surviving partial products 7-to-3 between the two clusters until
    at most ``trd - 2`` rows remain, and finishes with a single
    multi-operand add.  Each field of the result holds
    ``a_j * b_j mod 2**(2*width)``.
    """
    if scratch is None:
        raise ScratchUnavailable("optimized multiply needs a scratch cluster")
    stride = 2 * width
    x = dbc.x
    n = n if n is not None else x
    if n > x or stride > n:
        raise WidthOverflow(f"{n} wires of {stride}-wire fields exceed {x}")
    fields = n // stride
    a_row = np.asarray(a_row, dtype=np.uint8)
    b_row = np.asarray(b_row, dtype=np.uint8)
    budget = dbc.trd - 2

    # Shifted copies of A at successive row addresses.
    dbc.load_row(0, a_row)
    for i in range(1, width):
        dbc.logical_shift_write(i - 1, i, field_stride=stride)

    # Multiplier-predicated zeroing, walking back across the copies.
    dbc.load_buffer(b_row)
    from pirm.microops import MicroOpKind

    for i in range(width - 1, -1, -1):
        dbc._align_to_nearest_port(i)
        dbc._emit(MicroOpKind.WRITE_ROW, row=i)
        for f in range(fields):
            if b_row[f * stride + i] == 0:
                dbc.tape[i, f * stride : (f + 1) * stride] = 0

    # Carry-save reduction, ping-ponging between the clusters.
    src, dst = dbc, scratch
    rows = list(range(width))
    while len(rows) > budget:
        remaining = len(rows) - (len(rows) // src.trd) * src.trd
        n_groups = len(rows) // src.trd
        final_pass = (3 * n_groups + remaining) <= budget
        next_row = 1 if final_pass else 0
        i = 0
        while len(rows) - i >= src.trd:
            group = rows[i : i + src.trd]
            i += src.trd
            s, c, cp = reduce_7_3(src, group)
            _store_reduction(dst, next_row, s, c, cp, stride)
            next_row += 3
        for r in rows[i:]:
            dst.load_row(next_row, src.tape[r])
            next_row += 1
        start = 1 if final_pass else 0
        src, dst = dst, src
        rows = list(range(start, next_row))

    # Stage the survivors at the span interior of the spare cluster.
    if rows != list(range(1, len(rows) + 1)):
        for j, r in enumerate(rows):
            dst.load_row(1 + j, src.tape[r])
        final, k = dst, len(rows)
    else:
        final, k = src, len(rows)
    zero = np.zeros(x, dtype=np.uint8)
    final.write_row(_ADD_BASE, zero)
    for unused in range(1 + k, final.trd - 1):
        final.write_row(unused, zero)
    final.write_row(final.trd - 1, zero)
    layout = AddLayout(k_operands=k, n_bits=stride, stride=stride, wrap_field=True)
    return final.add_multi(layout, base=_ADD_BASE)


# -- max, ReLU, pooling, layers ----------------------------------------------


def max_reduce(dbc: DBC, k_words: int, width: int, base: int = 0,
               stride: int | None = None) -> np.ndarray:
    """Maximum of words staged at span interior rows, MSB to LSB.

    Per bit: one transverse read tells each field whether any candidate
    has the bit set; the span is then cycled once through the ports,
    rewriting each word via transverse write and zeroing it (predicated
    row-buffer reset) when it lacks a bit some competitor has.  The
    command stream is identical regardless of data; only the local
    predicates diverge.  Survivors all equal the max, which is read out
    as per-wire TR > 0.
    """
    if k_words > dbc.trd - 2:
        raise TooManyOperands(f"{k_words} words exceed the {dbc.trd - 2} span slots")
    stride = stride if stride is not None else dbc.x
    fields = dbc.x // stride
    dbc.align_span(base)
    for b in range(width - 1, -1, -1):
        counts = dbc.tr_counts(base)
        any_set = counts[np.arange(fields) * stride + b] > 0
        for _ in range(dbc.trd):
            buf = dbc.read_row(base + dbc.trd - 1)
            word_bits = buf[np.arange(fields) * stride + b]
            fire = any_set & (word_bits == 0)
            dbc.predicated_row_reset_fields(fire, stride)
            dbc.tw_rotate_step(dbc.row_buffer.bits)
    counts = dbc.tr_counts(base)
    return (counts > 0).astype(np.uint8)


def relu_row(dbc: DBC, addr: int, width: int, stride: int | None = None) -> np.ndarray:
    """Zero every packed two's-complement word whose sign bit is set."""
    stride = stride if stride is not None else width
    fields = dbc.x // stride
    buf = dbc.read_row(addr)
    fire = buf[np.arange(fields) * stride + width - 1] == 1
    dbc.predicated_row_reset_fields(fire, stride)
    dbc.write_row(addr, dbc.row_buffer.bits)
    return dbc.tape[addr].copy()


class ClusterPool:
    """A compute cluster pair handed to the layer-level operations."""

    def __init__(self, x: int = 512, y: int = 32, trd: int = 7,
                 sink=None, scratch_sink=None):
        self.main = DBC(x=x, y=y, trd=trd, sink=sink)
        self.scratch = DBC(x=x, y=y, trd=trd, sink=scratch_sink or sink)

    def pair(self) -> tuple[DBC, DBC]:
        return self.main, self.scratch


def _field_residue(value: int, field_bits: int) -> int:
    return value & ((1 << field_bits) - 1)


def _signed_from_residue(value: int, field_bits: int) -> int:
    return value - (1 << field_bits) if value >> (field_bits - 1) else value


def _batched_products(pool: ClusterPool, scalar: int, values, width: int) -> list[int]:
    """``|scalar| * v`` per packed value via the optimized multiplier."""
    main, scratch = pool.pair()
    stride = 2 * width
    per_call = main.x // stride
    out: list[int] = []
    for chunk_start in range(0, len(values), per_call):
        chunk = values[chunk_start : chunk_start + per_call]
        a = packing.pack_words([abs(scalar)] * len(chunk), stride, width, main.x)
        b = packing.pack_words(chunk, stride, width, main.x)
        row = mul_optimized(main, scratch, a, b, width)
        out.extend(packing.unpack_words(row, stride, stride, len(chunk)))
    return out


def _accumulate_signed_values(pool: ClusterPool, term_lists, width: int) -> list[int]:
    """Per-field signed accumulation of value lists through the add walk.

    ``term_lists`` is a list of (values, negate) pairs, each values list
    one entry per output field.
    """
    main, _ = pool.pair()
    stride = 2 * width
    per_call = main.x // stride
    n_out = len(term_lists[0][0])
    sums: list[int] = []
    for chunk_start in range(0, n_out, per_call):
        chunk_slice = slice(chunk_start, min(chunk_start + per_call, n_out))
        n_fields = chunk_slice.stop - chunk_slice.start
        terms = []
        for values, neg in term_lists:
            residues = [_field_residue(v, stride) for v in values[chunk_slice]]
            terms.append(
                (packing.pack_words(residues, stride, stride, main.x), neg)
            )
        total = signed_accumulate(main, terms, stride, n_fields)
        sums.extend(packing.unpack_words(total, stride, stride, n_fields))
    return sums


def convolve(pool: ClusterPool, image, kernel, width: int = 8) -> np.ndarray:
    """2-D valid convolution over integer inputs through the PIM path.

    Point-wise products run through the optimized multiplier; per-column
    sums and then cross-column sums run through the multi-operand add.
    Kernel entries may be negative (handled at accumulation); image
    entries must be non-negative ``width``-bit values.
    """
    image = np.asarray(image, dtype=np.int64)
    kernel = np.asarray(kernel, dtype=np.int64)
    if image.min() < 0:
        raise ValueError("image values must be non-negative")
    if image.max() >> width:
        raise WidthOverflow(f"image values exceed {width} bits")
    kh, kw = kernel.shape
    oh = image.shape[0] - kh + 1
    ow = image.shape[1] - kw + 1
    if oh <= 0 or ow <= 0:
        raise ValueError("kernel larger than image")
    bound = int(np.abs(kernel).sum()) * int(image.max(initial=0))
    if bound >= 1 << (2 * width - 1):
        raise WidthOverflow(
            f"accumulated magnitude {bound} exceeds the signed field range"
        )
    windows = [
        [int(image[m + j, p + t]) for m in range(oh) for p in range(ow)]
        for j in range(kh)
        for t in range(kw)
    ]
    col_sums = []
    for t in range(kw):
        terms = []
        for j in range(kh):
            k_el = int(kernel[j, t])
            prods = _batched_products(pool, k_el, windows[j * kw + t], width)
            terms.append((prods, k_el < 0))
        col_sums.append((_accumulate_signed_values(pool, terms, width), False))
    flat = _accumulate_signed_values(pool, col_sums, width)
    out = np.array(
        [_signed_from_residue(v, 2 * width) for v in flat], dtype=np.int64
    )
    return out.reshape(oh, ow)


def maxpool(pool: ClusterPool, matrix, window: int, width: int = 8) -> np.ndarray:
    """Window-wise maximum via the transverse-write max walk."""
    matrix = np.asarray(matrix, dtype=np.int64)
    if matrix.min() < 0:
        raise ValueError("pooling inputs must be non-negative")
    if matrix.max(initial=0) >> width:
        raise WidthOverflow(f"values exceed {width} bits")
    main, _ = pool.pair()
    oh, ow = matrix.shape[0] // window, matrix.shape[1] // window
    stride = 2 * width
    per_call = main.x // stride
    budget = main.trd - 2
    cells = [
        [
            int(matrix[m * window + dj, p * window + dt])
            for m in range(oh)
            for p in range(ow)
        ]
        for dj in range(window)
        for dt in range(window)
    ]
    while len(cells) > 1:
        group, cells = cells[:budget], cells[budget:]
        if len(group) == 1:
            cells.append(group[0])
            continue
        maxes: list[int] = []
        for chunk_start in range(0, oh * ow, per_call):
            sl = slice(chunk_start, min(chunk_start + per_call, oh * ow))
            for i, values in enumerate(group):
                main.write_row(
                    _ADD_BASE + 1 + i,
                    packing.pack_words(values[sl], stride, width, main.x),
                )
            for unused in range(1 + len(group), main.trd - 1):
                main.write_row(unused, _zero_row(main))
            main.write_row(_ADD_BASE, _zero_row(main))
            main.write_row(main.trd - 1, _zero_row(main))
            row = max_reduce(main, len(group), width, base=_ADD_BASE, stride=stride)
            maxes.extend(packing.unpack_words(row, stride, width, sl.stop - sl.start))
        cells.append(maxes)
    return np.array(cells[0], dtype=np.int64).reshape(oh, ow)


def avgpool(pool: ClusterPool, matrix, window: int, width: int = 8) -> np.ndarray:
    """Window-wise average: in-memory sums, host divide by the window count."""
    matrix = np.asarray(matrix, dtype=np.int64)
    if matrix.min() < 0:
        raise ValueError("pooling inputs must be non-negative")
    oh, ow = matrix.shape[0] // window, matrix.shape[1] // window
    cells = [
        (
            [
                int(matrix[m * window + dj, p * window + dt])
                for m in range(oh)
                for p in range(ow)
            ],
            False,
        )
        for dj in range(window)
        for dt in range(window)
    ]
    sums = _accumulate_signed_values(pool, cells, width)
    out = np.array(sums, dtype=np.int64) // (window * window)
    return out.reshape(oh, ow)


def fully_connected(pool: ClusterPool, weights, x_vec, bias, width: int = 8) -> np.ndarray:
    """ReLU(W x + b) over integers through multiply, add and predication.

    Weights and bias may be negative; they are split into positive and
    negative parts so each accumulated row carries a uniform sign.  Input
    activations must be non-negative.
    """
    weights = np.asarray(weights, dtype=np.int64)
    x_vec = np.asarray(x_vec, dtype=np.int64)
    bias = np.asarray(bias, dtype=np.int64)
    if x_vec.min(initial=0) < 0:
        raise ValueError("input activations must be non-negative")
    if x_vec.max(initial=0) >> width or np.abs(weights).max(initial=0) >> width:
        raise WidthOverflow(f"values exceed {width} bits")
    bound = int(np.abs(weights).sum(axis=1).max(initial=0)) * int(
        x_vec.max(initial=0)
    ) + int(np.abs(bias).max(initial=0))
    if bound >= 1 << (2 * width - 1):
        raise WidthOverflow(
            f"accumulated magnitude {bound} exceeds the signed field range"
        )
    main, _ = pool.pair()
    stride = 2 * width
    n_out = weights.shape[0]
    terms = []
    for i in range(x_vec.shape[0]):
        xi = int(x_vec[i])
        pos = [max(int(wv), 0) for wv in weights[:, i]]
        neg = [max(-int(wv), 0) for wv in weights[:, i]]
        if any(pos):
            prods = _batched_products_vector(pool, pos, xi, width)
            terms.append((prods, False))
        if any(neg):
            prods = _batched_products_vector(pool, neg, xi, width)
            terms.append((prods, True))
    b_pos = [max(int(v), 0) for v in bias]
    b_neg = [max(-int(v), 0) for v in bias]
    if any(b_pos):
        terms.append((b_pos, False))
    if any(b_neg):
        terms.append((b_neg, True))
    if not terms:
        terms.append(([0] * n_out, False))
    sums = _accumulate_signed_values(pool, terms, width)
    # Predicated ReLU over the packed result row, then read back.
    per_call = main.x // stride
    out: list[int] = []
    for chunk_start in range(0, n_out, per_call):
        sl = slice(chunk_start, min(chunk_start + per_call, n_out))
        row = packing.pack_words(
            [_field_residue(v, stride) for v in sums[sl]], stride, stride, main.x
        )
        main.write_row(_T_ROW, row)
        rect = relu_row(main, _T_ROW, stride, stride)
        out.extend(packing.unpack_words(rect, stride, stride, sl.stop - sl.start))
    return np.array(out, dtype=np.int64)


def _batched_products_vector(pool: ClusterPool, scalars, value: int, width: int) -> list[int]:
    """``scalars[j] * value`` per field via the optimized multiplier."""
    main, scratch = pool.pair()
    stride = 2 * width
    per_call = main.x // stride
    out: list[int] = []
    for chunk_start in range(0, len(scalars), per_call):
        chunk = scalars[chunk_start : chunk_start + per_call]
        a = packing.pack_words(chunk, stride, width, main.x)
        b = packing.pack_words([value] * len(chunk), stride, width, main.x)
        row = mul_optimized(main, scratch, a, b, width)
        out.extend(packing.unpack_words(row, stride, stride, len(chunk)))
    return out
