"""Controller-level micro-op vocabulary shared by the cluster and engine.

Every mutation of memory state is reported as one of these events.  The
cluster emits events through an optional sink callback; the engine's sink
charges the cost table and appends trace records.  Events carry a
``count`` so tight loops can report a run of identical primitives without
per-step callback overhead.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any


class MicroOpKind(str, Enum):
    ACTIVATE = "Activate"
    READ_ROW = "ReadRow"
    WRITE_ROW = "WriteRow"
    DW_SHIFT = "DwShift"
    TR = "Tr"
    TW = "Tw"
    BULK_OP = "BulkOp"
    PRED_RESET = "PredReset"
    INTER_BANK_COPY = "InterBankCopy"
    LOGICAL_SHIFT_WRITE = "LogicalShiftWrite"


#: Cost-table entry charged for each event kind.
COST_ENTRY_FOR_KIND = {
    MicroOpKind.ACTIVATE: "activate",
    MicroOpKind.READ_ROW: "port_read",
    MicroOpKind.WRITE_ROW: "port_write",
    MicroOpKind.DW_SHIFT: "dw_shift_per_domain",
    MicroOpKind.TR: "tr",
    MicroOpKind.TW: "tw",
    MicroOpKind.BULK_OP: "bulk_decode",
    MicroOpKind.PRED_RESET: "pred_reset",
    MicroOpKind.INTER_BANK_COPY: "inter_bank_copy_per_row",
    MicroOpKind.LOGICAL_SHIFT_WRITE: "logical_shift_write",
}


@dataclass
class Event:
    """One primitive event (or a run of ``count`` identical ones)."""

    kind: MicroOpKind
    count: int = 1
    row: int | None = None
    detail: dict[str, Any] = field(default_factory=dict)


@dataclass
class MicroOp:
    """A controller instruction: kind, target address, payload.

    ``target`` is a :class:`pirm.hierarchy.Address` (or a tuple of them for
    copies); ``payload`` is kind-specific.
    """

    kind: MicroOpKind
    target: Any = None
    payload: dict[str, Any] = field(default_factory=dict)
