"""Desk-scale benchmark kernels with independent software oracles.

Every workload computes its result twice: once through the in-memory
compute path and once with a direct reference implementation; reports
carry the oracle-match flag alongside cycle and energy totals.  Scales
are deliberately small (tens of thousands of records, single-digit
matrix sizes) -- they exercise every code path without aspiring to
reproduce published full-scale speedups.
"""

import hashlib
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from pirm import arithmetic, packing
from pirm.cost import baseline_compare
from pirm.errors import UnknownColumn, WidthOverflow
from pirm.hierarchy import Engine

BITMAP_MAGIC = b"PIRMBM1"


# -- datasets ------------------------------------------------------------


@dataclass
class BitmapDataset:
    """Named one-bit-per-record columns (bitmap index criteria)."""

    num_records: int
    columns: dict[str, np.ndarray]

    def __post_init__(self):
        for name, col in self.columns.items():
            if col.shape != (self.num_records,):
                raise ValueError(f"column {name!r} length != num_records")

    @classmethod
    def random(cls, num_records: int, num_columns: int, density: float = 0.5,
               seed: int = 0) -> "BitmapDataset":
        rng = np.random.default_rng(seed)
        cols = {
            f"c{i}": (rng.random(num_records) < density).astype(np.uint8)
            for i in range(num_columns)
        }
        return cls(num_records, cols)

    @classmethod
    def from_csv(cls, path) -> "BitmapDataset":
        """One record per line, one 0/1 field per criterion.

        A first line holding non-numeric tokens is taken as the header of
        column names; otherwise columns are auto-named c0, c1, ...
        """
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
        if not lines:
            return cls(0, {})
        first = [tok.strip() for tok in lines[0].split(",")]
        if all(tok in ("0", "1") for tok in first):
            names = [f"c{i}" for i in range(len(first))]
            data_lines = lines
        else:
            names = first
            data_lines = lines[1:]
        rows = [
            [int(tok.strip()) for tok in ln.split(",")] for ln in data_lines
        ]
        mat = np.array(rows, dtype=np.uint8)
        if mat.size and (mat > 1).any():
            raise ValueError("bitmap fields must be 0 or 1")
        cols = {name: mat[:, i].copy() for i, name in enumerate(names)}
        return cls(len(rows), cols)

    @classmethod
    def from_binary(cls, path) -> "BitmapDataset":
        """Bit-packed form: magic, record count (u64 LE), column count
        (u32 LE), then the record-major bit matrix via packbits."""
        with open(path, "rb") as fh:
            blob = fh.read()
        if blob[: len(BITMAP_MAGIC)] != BITMAP_MAGIC:
            raise ValueError("not a bitmap dataset (bad magic)")
        off = len(BITMAP_MAGIC)
        records = int.from_bytes(blob[off : off + 8], "little")
        ncols = int.from_bytes(blob[off + 8 : off + 12], "little")
        bits = np.unpackbits(
            np.frombuffer(blob[off + 12 :], dtype=np.uint8),
            count=records * ncols,
        ).reshape(records, ncols)
        cols = {f"c{i}": bits[:, i].copy() for i in range(ncols)}
        return cls(records, cols)

    def to_binary(self, path) -> None:
        names = list(self.columns)
        mat = np.stack([self.columns[n] for n in names], axis=1) if names else \
            np.zeros((self.num_records, 0), dtype=np.uint8)
        payload = np.packbits(mat.reshape(-1))
        with open(path, "wb") as fh:
            fh.write(BITMAP_MAGIC)
            fh.write(self.num_records.to_bytes(8, "little"))
            fh.write(len(names).to_bytes(4, "little"))
            fh.write(payload.tobytes())


# -- reports -------------------------------------------------------------


@dataclass
class RunReport:
    workload: str
    params: dict
    seed: int | None
    result_digest: str
    oracle_match: bool
    cycles: float
    energy_pj: float
    baseline: dict | None = None
    extra: dict = field(default_factory=dict)
    trace_path: str | None = None
    timestamp: float = field(default_factory=time.time)

    def as_dict(self) -> dict:
        return {
            "workload": self.workload,
            "params": self.params,
            "seed": self.seed,
            "result_digest": self.result_digest,
            "oracle_match": self.oracle_match,
            "cycles": self.cycles,
            "energy_pj": self.energy_pj,
            "baseline": self.baseline,
            "extra": self.extra,
            "trace_path": self.trace_path,
            "timestamp": self.timestamp,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)


def _digest(obj) -> str:
    return hashlib.sha256(repr(obj).encode()).hexdigest()[:16]


# -- bitmap index query ---------------------------------------------------


def multi_operand_passes(k: int, span: int = 7) -> int:
    """Bulk-bitwise passes to fold k columns, chaining 1 result + span-1 new."""
    if k <= 1:
        return 0
    return math.ceil((k - 1) / (span - 1))


def bitmap_query(engine: Engine, dataset: BitmapDataset, criteria,
                 op: str = "AND") -> tuple[int, RunReport]:
    """Count records satisfying the conjunction of the named criteria.

    Records stripe across wires (one group of ``x`` records per pass) and
    criteria columns stack at span rows, so one transverse read folds up
    to seven criteria at once; groups run as one SIMD batch across the
    PIM tiles.  A two-operand-per-pass emulation runs on a twin engine
    for the pass-count and cost comparison.
    """
    for name in criteria:
        if name not in dataset.columns:
            raise UnknownColumn(f"column {name!r} not in dataset")
    k = len(criteria)
    x = engine.geometry.x
    groups = math.ceil(dataset.num_records / x) if dataset.num_records else 0
    cols = [dataset.columns[name] for name in criteria]

    def group_bits(col: np.ndarray, g: int) -> np.ndarray:
        chunk = col[g * x : (g + 1) * x]
        if chunk.shape[0] < x:
            chunk = np.pad(chunk, (0, x - chunk.shape[0]))
        return chunk.astype(np.uint8)

    def pim_targets(n: int):
        g = engine.geometry
        coords = []
        for bank in range(g.banks):
            for sub in range(g.subarrays_per_bank):
                for d in range(g.dbcs_per_tile):
                    coords.append((bank, sub, 0, d))
                    if len(coords) == n:
                        return coords
        return coords

    span = engine.geometry.trd

    def fold_group(dbc, chunks) -> tuple[np.ndarray, int]:
        """AND-fold the staged chunks, chaining passes beyond one span."""
        passes = 0
        acc: np.ndarray | None = None
        todo = list(chunks)
        while todo or acc is None:
            batch = todo[: span - 1] if acc is not None else todo[:span]
            todo = todo[len(batch):]
            rows = ([acc] if acc is not None else []) + batch
            for i, bits in enumerate(rows):
                dbc.write_row(i, bits)
            for i in range(len(rows), span):
                dbc.write_row(i, np.zeros(x, dtype=np.uint8))
            acc = dbc.bulk_bitwise(op, list(range(len(rows))))
            passes += 1
        return acc, passes

    count = 0
    passes_per_group = None
    if groups:
        targets = pim_targets(groups)

        def run_one(idx_coord):
            g, coords = idx_coord
            dbc = engine.pim_dbc(coords[0], coords[1], coords[3], coords[2])
            chunks = [group_bits(c, g) for c in cols]
            return fold_group(dbc, chunks)

        outcomes = engine.run_simd(run_one, list(enumerate(targets)))
        passes_per_group = outcomes[0][1]
        tail = dataset.num_records - (groups - 1) * x
        for g, (row, _) in enumerate(outcomes):
            limit = x if g < groups - 1 else tail
            count += int(row[:limit].sum())

    # Two-operand emulation on a twin engine for the comparison numbers.
    emu = Engine(geometry=engine.geometry, table=engine.table)
    emu_passes = None
    if groups:
        def run_two_op(idx_coord):
            g, coords = idx_coord
            dbc = emu.pim_dbc(coords[0], coords[1], coords[3], coords[2])
            chunks = [group_bits(c, g) for c in cols]
            acc = chunks[0]
            passes = 0
            for nxt in chunks[1:]:
                dbc.write_row(0, acc)
                dbc.write_row(1, nxt)
                for i in range(2, span):
                    dbc.write_row(i, np.zeros(x, dtype=np.uint8))
                acc = dbc.bulk_bitwise(op, [0, 1])
                passes += 1
            return acc, passes

        emu_out = emu.run_simd(run_two_op, list(enumerate(pim_targets(groups))))
        emu_passes = emu_out[0][1]

    # Independent oracle: direct bit-fold on the host.
    if k:
        stack = np.stack(cols).astype(bool)
        oracle = int(np.logical_and.reduce(stack, axis=0).sum())
    else:
        oracle = 0

    report = RunReport(
        workload="bitmap",
        params={"records": dataset.num_records, "criteria": list(criteria), "op": op},
        seed=None,
        result_digest=_digest(count),
        oracle_match=(count == oracle),
        cycles=engine.counters.cycles,
        energy_pj=engine.counters.energy_pj,
        extra={
            "oracle_count": oracle,
            "groups": groups,
            "passes_multi_per_group": passes_per_group,
            "passes_two_op_per_group": emu_passes,
            "two_op_cycles": emu.counters.cycles,
            "two_op_energy_pj": emu.counters.energy_pj,
        },
    )
    return count, report


# -- matrix kernels --------------------------------------------------------


@dataclass(frozen=True)
class KernelSpec:
    kernel: str            # madd | gemm | conv | maxpool | fc
    dims: dict
    width: int = 8


def _engine_pool(engine: Engine) -> arithmetic.ClusterPool:
    """A compute pair on the first PIM tile: cluster 0 plus scratch 1."""
    pool = arithmetic.ClusterPool.__new__(arithmetic.ClusterPool)
    pool.main = engine.pim_dbc(0, 0, 0)
    pool.scratch = engine.pim_dbc(0, 0, 1)
    return pool


def _values_digest(arr) -> str:
    return _digest(np.asarray(arr).tolist())


def _madd(engine: Engine, rng, dims, width):
    n = dims.get("n", 8)
    m = dims.get("m", n)
    hi = 1 << width
    a = rng.integers(0, hi, size=(m, n), dtype=np.int64)
    b = rng.integers(0, hi, size=(m, n), dtype=np.int64)
    pool = _engine_pool(engine)
    flat = arithmetic._accumulate_signed_values(
        pool, [(a.reshape(-1).tolist(), False), (b.reshape(-1).tolist(), False)],
        width,
    )
    got = np.array(flat, dtype=np.int64).reshape(m, n)
    want = a + b
    ops = {"adds": m * n, "muls": 0}
    bytes_moved = (a.size + b.size + got.size) * (width // 8 or 1)
    return got, want, ops, bytes_moved


def _gemm(engine: Engine, rng, dims, width):
    m, n, k = dims.get("m", 8), dims.get("n", 8), dims.get("k", 8)
    alpha, beta = dims.get("alpha", 1), dims.get("beta", 1)
    hi = 1 << (width // 2)  # keep alpha*A*B + beta*C inside the field
    a = rng.integers(0, hi, size=(m, k), dtype=np.int64)
    b = rng.integers(0, hi, size=(k, n), dtype=np.int64)
    c = rng.integers(0, hi, size=(m, n), dtype=np.int64)
    bound = alpha * k * (hi - 1) ** 2 + beta * (hi - 1)
    if bound >= 1 << (2 * width - 1):
        raise WidthOverflow(f"gemm bound {bound} exceeds the signed field range")
    pool = _engine_pool(engine)
    out = np.zeros((m, n), dtype=np.int64)
    for i in range(m):
        terms = []
        for kk in range(k):
            prods = arithmetic._batched_products(
                pool, int(a[i, kk]), b[kk, :].tolist(), width
            )
            terms.append((prods, False))
        row_sum = arithmetic._accumulate_signed_values(pool, terms, width)
        if alpha != 1:
            row_sum = _scale_values(pool, row_sum, alpha, width)
        beta_c = (
            _scale_values(pool, c[i, :].tolist(), beta, width)
            if beta != 1 else c[i, :].tolist()
        )
        final = arithmetic._accumulate_signed_values(
            pool, [(row_sum, False), (beta_c, False)], width
        )
        out[i, :] = final
    want = alpha * (a @ b) + beta * c
    ops = {"adds": m * n * k, "muls": m * n * k}
    bytes_moved = (a.size + b.size + 2 * c.size) * (width // 8 or 1)
    return out, want, ops, bytes_moved


def _scale_values(pool, values, constant, width):
    """Constant-multiply a value list through the schedule executor."""
    main, _ = pool.pair()
    stride = 2 * width
    per_call = main.x // stride
    schedule = arithmetic.plan_const_mul(constant, main.trd)
    out = []
    mask = (1 << stride) - 1
    for start in range(0, len(values), per_call):
        chunk = [int(v) & mask for v in values[start : start + per_call]]
        row = packing.pack_words(chunk, stride, stride, main.x)
        main.write_row(20, row)
        res = arithmetic.execute_mul_schedule(main, 20, schedule, width, len(chunk))
        out.extend(packing.unpack_words(res, stride, stride, len(chunk)))
    return out


def _conv(engine: Engine, rng, dims, width):
    n = dims.get("n", 8)
    kdim = dims.get("k", 3)
    image = rng.integers(0, 16, size=(n, n), dtype=np.int64)
    kernel = rng.integers(-7, 8, size=(kdim, kdim), dtype=np.int64)
    pool = _engine_pool(engine)
    got = arithmetic.convolve(pool, image, kernel, width)
    want = _reference_convolve(image, kernel)
    oh = n - kdim + 1
    ops = {"adds": oh * oh * (kdim * kdim - 1), "muls": oh * oh * kdim * kdim}
    bytes_moved = (image.size + kernel.size + got.size) * (width // 8 or 1)
    return got, want, ops, bytes_moved


def _maxpool(engine: Engine, rng, dims, width):
    n = dims.get("n", 8)
    win = dims.get("window", 2)
    mat = rng.integers(0, 1 << width, size=(n, n), dtype=np.int64)
    pool = _engine_pool(engine)
    got = arithmetic.maxpool(pool, mat, win, width)
    want = _reference_maxpool(mat, win)
    ops = {"adds": got.size * (win * win - 1), "muls": 0}
    bytes_moved = (mat.size + got.size) * (width // 8 or 1)
    return got, want, ops, bytes_moved


def _fc(engine: Engine, rng, dims, width):
    n_in, n_out = dims.get("n_in", 4), dims.get("n_out", 4)
    w = rng.integers(-7, 8, size=(n_out, n_in), dtype=np.int64)
    x = rng.integers(0, 16, size=n_in, dtype=np.int64)
    b = rng.integers(-64, 64, size=n_out, dtype=np.int64)
    pool = _engine_pool(engine)
    got = arithmetic.fully_connected(pool, w, x, b, width)
    want = np.maximum(w @ x + b, 0)
    ops = {"adds": n_out * n_in, "muls": n_out * n_in}
    bytes_moved = (w.size + x.size + b.size + got.size) * (width // 8 or 1)
    return got, want, ops, bytes_moved


_KERNELS = {
    "madd": _madd,
    "gemm": _gemm,
    "conv": _conv,
    "maxpool": _maxpool,
    "fc": _fc,
}


def run_kernel(engine: Engine, spec: KernelSpec, seed: int = 0) -> RunReport:
    """Execute one matrix kernel and verify it against its reference oracle."""
    if spec.kernel not in _KERNELS:
        raise ValueError(f"unknown kernel {spec.kernel!r}; "
                         f"expected one of {sorted(_KERNELS)}")
    rng = np.random.default_rng(seed)
    got, want, ops, bytes_moved = _KERNELS[spec.kernel](
        engine, rng, spec.dims, spec.width
    )
    match = bool(np.array_equal(np.asarray(got), np.asarray(want)))
    return RunReport(
        workload=spec.kernel,
        params={"dims": dict(spec.dims), "width": spec.width},
        seed=seed,
        result_digest=_values_digest(got),
        oracle_match=match,
        cycles=engine.counters.cycles,
        energy_pj=engine.counters.energy_pj,
        baseline=baseline_compare(engine.counters, bytes_moved, ops),
    )


# -- reference oracles -------------------------------------------------------


def _reference_convolve(image: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    kh, kw = kernel.shape
    oh = image.shape[0] - kh + 1
    ow = image.shape[1] - kw + 1
    out = np.zeros((oh, ow), dtype=np.int64)
    for m in range(oh):
        for p in range(ow):
            out[m, p] = int((image[m : m + kh, p : p + kw] * kernel).sum())
    return out


def _reference_maxpool(mat: np.ndarray, win: int) -> np.ndarray:
    oh, ow = mat.shape[0] // win, mat.shape[1] // win
    out = np.zeros((oh, ow), dtype=np.int64)
    for m in range(oh):
        for p in range(ow):
            out[m, p] = mat[m * win : (m + 1) * win, p * win : (p + 1) * win].max()
    return out


# -- tiny CNN forward pass -----------------------------------------------


@dataclass(frozen=True)
class CnnSpec:
    """conv -> ReLU -> maxpool -> fully-connected, all integer."""

    conv_kernel: tuple    # 2-D integer kernel
    pool_window: int
    fc_weights: tuple     # (n_out, n_features)
    fc_bias: tuple
    width: int = 8


def _relu_values(pool: arithmetic.ClusterPool, values, width: int) -> list[int]:
    """Predicated sign-based zeroing of packed signed residues."""
    main, _ = pool.pair()
    stride = 2 * width
    per_call = main.x // stride
    out: list[int] = []
    vals = list(values)
    for start in range(0, len(vals), per_call):
        chunk = [arithmetic._field_residue(int(v), stride)
                 for v in vals[start : start + per_call]]
        row = packing.pack_words(chunk, stride, stride, main.x)
        main.write_row(arithmetic._T_ROW, row)
        rect = arithmetic.relu_row(main, arithmetic._T_ROW, stride, stride)
        out.extend(packing.unpack_words(rect, stride, stride, len(chunk)))
    return out


def run_cnn_forward(engine: Engine, spec: CnnSpec, image) -> tuple[np.ndarray, RunReport]:
    """Forward pass of the toy CNN; logits checked against the reference."""
    image = np.asarray(image, dtype=np.int64)
    kernel = np.asarray(spec.conv_kernel, dtype=np.int64)
    weights = np.asarray(spec.fc_weights, dtype=np.int64)
    bias = np.asarray(spec.fc_bias, dtype=np.int64)
    width = spec.width
    pool = _engine_pool(engine)

    conv_out = arithmetic.convolve(pool, image, kernel, width)
    rect = np.array(
        [arithmetic._signed_from_residue(
            arithmetic._field_residue(v, 2 * width), 2 * width)
         for v in _relu_values(pool, conv_out.reshape(-1).tolist(), width)],
        dtype=np.int64,
    ).reshape(conv_out.shape)
    pooled = arithmetic.maxpool(pool, rect, spec.pool_window, width)
    logits = arithmetic.fully_connected(
        pool, weights, pooled.reshape(-1), bias, width
    )

    # Reference integer inference.
    ref_conv = _reference_convolve(image, kernel)
    ref_rect = np.maximum(ref_conv, 0)
    ref_pool = _reference_maxpool(ref_rect, spec.pool_window)
    ref_logits = np.maximum(weights @ ref_pool.reshape(-1) + bias, 0)

    match = bool(np.array_equal(logits, ref_logits))
    mac_ops = (
        conv_out.size * kernel.size + weights.size
    )
    cycles = engine.counters.cycles
    energy = engine.counters.energy_pj
    report = RunReport(
        workload="cnn",
        params={
            "image": list(image.shape),
            "kernel": list(kernel.shape),
            "pool_window": spec.pool_window,
            "fc_out": int(weights.shape[0]),
            "width": width,
        },
        seed=None,
        result_digest=_values_digest(logits),
        oracle_match=match,
        cycles=cycles,
        energy_pj=energy,
        extra={
            "ops": mac_ops,
            "ops_per_cycle": (mac_ops / cycles) if cycles else 0.0,
            "ops_per_nj": (mac_ops / (energy / 1000.0)) if energy else 0.0,
        },
    )
    return logits, report
