"""Bank/subarray/tile/cluster geometry, the engine, and the micro-op layer.

The engine owns all memory state, executes micro-ops sequentially in
program order, charges every event against its cost table, and (when
tracing) appends exactly one record per primitive event.  Clusters are
materialized lazily -- at the default 8 GB geometry only the touched
clusters exist.  SIMD dispatch applies one identical command stream to
many PIM tiles: latency is charged once, energy per target.
"""

import json
from dataclasses import dataclass, field
from typing import Any, Callable

from pirm import cost as cost_mod
from pirm.dbc import DBC
from pirm.errors import NonPimTarget, OutOfRange
from pirm.microops import Event, MicroOp, MicroOpKind


@dataclass(frozen=True)
class Geometry:
    """Memory organization; defaults model an 8 GB module.

    ``devices_per_rank`` chips supply a rank in lock-step (the usual
    multi-chip module organization); addressing below is per device.
    """

    banks: int = 32
    subarrays_per_bank: int = 64
    tiles_per_subarray: int = 16
    dbcs_per_tile: int = 16
    pim_tiles_per_subarray: int = 1
    x: int = 512
    y: int = 32
    trd: int = 7
    devices_per_rank: int = 8
    memory_bytes: int = 8 * 2**30

    def __post_init__(self):
        counts = (
            self.banks, self.subarrays_per_bank, self.tiles_per_subarray,
            self.dbcs_per_tile, self.x, self.y, self.devices_per_rank,
        )
        if any(c < 1 for c in counts):
            raise ValueError("all geometry counts must be >= 1")
        if not 0 <= self.pim_tiles_per_subarray <= self.tiles_per_subarray:
            raise ValueError("pim_tiles_per_subarray outside tile count")
        if self.capacity_bytes != self.memory_bytes:
            raise ValueError(
                f"geometry capacity {self.capacity_bytes} bytes does not match "
                f"configured memory size {self.memory_bytes}"
            )

    @property
    def device_capacity_bits(self) -> int:
        return (
            self.banks * self.subarrays_per_bank * self.tiles_per_subarray
            * self.dbcs_per_tile * self.x * self.y
        )

    @property
    def capacity_bytes(self) -> int:
        return self.device_capacity_bits * self.devices_per_rank // 8


@dataclass(frozen=True)
class Address:
    """Coordinates of one bit (or the row containing it) within a device."""

    bank: int
    subarray: int
    tile: int
    dbc: int
    row: int
    column: int = 0

    def label(self) -> str:
        return f"{self.bank}.{self.subarray}.{self.tile}.{self.dbc}.{self.row}"


def decode_address(geometry: Geometry, flat: int) -> Address:
    """Flat bit address -> coordinates, row-major down the hierarchy."""
    if not 0 <= flat < geometry.device_capacity_bits:
        raise OutOfRange(f"address {flat} outside capacity "
                         f"{geometry.device_capacity_bits}")
    flat, column = divmod(flat, geometry.x)
    flat, row = divmod(flat, geometry.y)
    flat, dbc = divmod(flat, geometry.dbcs_per_tile)
    flat, tile = divmod(flat, geometry.tiles_per_subarray)
    bank, subarray = divmod(flat, geometry.subarrays_per_bank)
    return Address(bank, subarray, tile, dbc, row, column)


def encode_address(geometry: Geometry, addr: Address) -> int:
    """Inverse of :func:`decode_address`."""
    dims = (
        (addr.bank, geometry.banks),
        (addr.subarray, geometry.subarrays_per_bank),
        (addr.tile, geometry.tiles_per_subarray),
        (addr.dbc, geometry.dbcs_per_tile),
        (addr.row, geometry.y),
        (addr.column, geometry.x),
    )
    flat = 0
    for value, size in dims:
        if not 0 <= value < size:
            raise OutOfRange(f"coordinate {value} outside 0..{size - 1}")
        flat = flat * size + value
    return flat


@dataclass
class TraceRecord:
    cycle: float
    kind: str
    address: str
    energy_pj: float


class Trace:
    """Ordered per-event records, exportable as text lines or JSON."""

    def __init__(self):
        self.records: list[TraceRecord] = []

    def append(self, record: TraceRecord) -> None:
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    def to_text(self) -> str:
        lines = ["# cycle, kind, bank.subarray.tile.dbc.row, energy_pj"]
        lines += [
            f"{r.cycle:g}, {r.kind}, {r.address}, {r.energy_pj:g}"
            for r in self.records
        ]
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(
            [
                {
                    "cycle": r.cycle,
                    "kind": r.kind,
                    "address": r.address,
                    "energy_pj": r.energy_pj,
                }
                for r in self.records
            ],
            indent=2,
        )


class Engine:
    """Owns memory state, counters and trace; executes micro-ops in order."""

    def __init__(self, geometry: Geometry | None = None,
                 table: cost_mod.CostTable | None = None,
                 trace: bool = False):
        self.geometry = geometry if geometry is not None else Geometry()
        self.table = table if table is not None else cost_mod.CostTable.default()
        self.counters = cost_mod.Counters()
        self.trace = Trace() if trace else None
        self._dbcs: dict[tuple[int, int, int, int], DBC] = {}
        self._energy_only = False

    # -- state access -------------------------------------------------------

    def _check_coords(self, bank: int, subarray: int, tile: int, dbc: int) -> None:
        g = self.geometry
        ok = (
            0 <= bank < g.banks
            and 0 <= subarray < g.subarrays_per_bank
            and 0 <= tile < g.tiles_per_subarray
            and 0 <= dbc < g.dbcs_per_tile
        )
        if not ok:
            raise OutOfRange(f"no cluster at {bank}.{subarray}.{tile}.{dbc}")

    def is_pim_tile(self, tile: int) -> bool:
        return tile < self.geometry.pim_tiles_per_subarray

    def dbc(self, bank: int, subarray: int, tile: int, dbc: int) -> DBC:
        """The cluster at these coordinates, materialized on first touch."""
        self._check_coords(bank, subarray, tile, dbc)
        key = (bank, subarray, tile, dbc)
        if key not in self._dbcs:
            g = self.geometry
            label = f"{bank}.{subarray}.{tile}.{dbc}"
            self._dbcs[key] = DBC(
                x=g.x, y=g.y, trd=g.trd, sink=self._sink_for(label)
            )
        return self._dbcs[key]

    def pim_dbc(self, bank: int, subarray: int, dbc: int = 0, tile: int = 0) -> DBC:
        """A PIM-enabled cluster; raises for tiles without PIM capability."""
        if not self.is_pim_tile(tile):
            raise NonPimTarget(f"tile {tile} has no PIM capability")
        return self.dbc(bank, subarray, tile, dbc)

    def _sink_for(self, label: str) -> Callable[[Event], None]:
        def sink(event: Event) -> None:
            self._charge_event(event, label)

        return sink

    def _charge_event(self, event: Event, label: str) -> None:
        start_entry = cost_mod.COST_ENTRY_FOR_KIND[event.kind]
        entry = self.table.entry(start_entry)
        if self.trace is not None:
            for _ in range(event.count):
                cycle = self.counters.cycles
                if not self._energy_only:
                    self.counters.cycles += entry.latency
                self.counters.energy_pj += entry.energy
                row = event.row if event.row is not None else 0
                self.trace.append(TraceRecord(
                    cycle=cycle,
                    kind=event.kind.value,
                    address=f"{label}.{row}",
                    energy_pj=entry.energy,
                ))
            self.counters.events[start_entry] = (
                self.counters.events.get(start_entry, 0) + event.count
            )
        else:
            self.counters.add(
                start_entry, self.table, count=event.count,
                energy_only=self._energy_only,
            )

    # -- micro-op execution ---------------------------------------------------

    def issue(self, op: MicroOp) -> Any:
        """Execute one micro-op; state mutates and the trace grows as charged.

        Invalid targets raise before any state change or trace append.
        """
        a = op.target
        if not isinstance(a, Address):
            raise OutOfRange("micro-op target must be an Address")
        if not 0 <= a.row < self.geometry.y:
            raise OutOfRange(f"row {a.row} outside 0..{self.geometry.y - 1}")
        d = self.dbc(a.bank, a.subarray, a.tile, a.dbc)
        k = op.kind
        p = op.payload
        if k == MicroOpKind.READ_ROW:
            return d.read_row(a.row)
        if k == MicroOpKind.WRITE_ROW:
            return d.write_row(a.row, p["bits"])
        if k == MicroOpKind.ACTIVATE:
            return d.read_row(a.row)
        if k == MicroOpKind.DW_SHIFT:
            direction = 1 if p.get("direction", "right") == "right" else -1
            d._shift_to(d.offset + direction * p.get("count", 1))
            return None
        if k == MicroOpKind.TR:
            return d.tr_counts(a.row)
        if k == MicroOpKind.TW:
            return d.tw_rotate_step(p["bits"])
        if k == MicroOpKind.BULK_OP:
            return d.bulk_bitwise(p["op"], p["operand_addrs"], p.get("dst"))
        if k == MicroOpKind.PRED_RESET:
            return d.predicated_row_reset(p["condition"])
        if k == MicroOpKind.LOGICAL_SHIFT_WRITE:
            return d.logical_shift_write(p["src"], a.row, p.get("field_stride"))
        if k == MicroOpKind.INTER_BANK_COPY:
            return self.inter_bank_copy(p["src"], a)
        raise OutOfRange(f"unhandled micro-op kind {k}")

    def inter_bank_copy(self, src: Address, dst: Address) -> None:
        """Copy one row between clusters, charged as a single copy event."""
        sd = self.dbc(src.bank, src.subarray, src.tile, src.dbc)
        if not 0 <= src.row < self.geometry.y or not 0 <= dst.row < self.geometry.y:
            raise OutOfRange("row outside the cluster")
        dd = self.dbc(dst.bank, dst.subarray, dst.tile, dst.dbc)
        dd.load_row(dst.row, sd.tape[src.row])

    def simd_dispatch(self, op: MicroOp, targets) -> list[Any]:
        """One command, many PIM tiles: latency once, energy per target."""
        targets = list(targets)
        for t in targets:
            if not self.is_pim_tile(t.tile):
                raise NonPimTarget(f"tile {t.tile} has no PIM capability")
        results = []
        for i, t in enumerate(targets):
            import dataclasses

            per_target = dataclasses.replace(op, target=t)
            if i > 0:
                self._energy_only = True
            try:
                results.append(self.issue(per_target))
            finally:
                self._energy_only = False
        return results

    def run_simd(self, fn: Callable[[Any], Any], targets) -> list[Any]:
        """Apply one identical operation sequence to each target cluster.

        ``fn`` receives each target; the first execution charges latency
        and energy, the rest energy only (the streams are identical, so
        they complete in the first stream's shadow).
        """
        results = []
        for i, t in enumerate(targets):
            if i > 0:
                self._energy_only = True
            try:
                results.append(fn(t))
            finally:
                self._energy_only = False
        return results
