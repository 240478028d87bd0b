"""Exception types shared across the simulator.

Precondition violations raise typed errors rather than silently corrupting
state; a shift that would push data off a nanowire is a hard error, not a
truncation.
"""


class PirmError(Exception):
    """Base class for all simulator errors."""


# -- device ------------------------------------------------------------------

class ShiftOverflow(PirmError):
    """A shift would push data domains past a nanowire extremity."""


class InvalidPort(PirmError):
    """Access port index does not exist on this nanowire."""


class SpanTooWide(PirmError):
    """A transverse-read span exceeds the configured maximum distance."""


class OverlappingSegments(PirmError):
    """Segments of a segmented transverse read are not pairwise disjoint."""


# -- pim_logic ---------------------------------------------------------------

class CountOutOfRange(PirmError):
    """Ones-count outside the range the sense circuit can represent."""


# -- dbc ---------------------------------------------------------------------

class AddressOutOfRange(PirmError):
    """Row address outside the cluster's addressable range."""


class TooManyOperands(PirmError):
    """Operand count exceeds what one transverse-read span supports."""


class OperandsNotInSpan(PirmError):
    """Operand rows do not fit inside a single transverse-read window."""


class EdgeColumnsNotZero(PirmError):
    """Span edge rows reserved for carry columns are not zeroed."""


class WidthOverflow(PirmError):
    """Result width exceeds the wires (or field width) available."""


class BufferInvalid(PirmError):
    """Row buffer holds no valid contents."""


# -- arithmetic --------------------------------------------------------------

class ScratchUnavailable(PirmError):
    """An operation requiring a scratch cluster was not given one."""


# -- hierarchy ---------------------------------------------------------------

class OutOfRange(PirmError):
    """Address outside the configured memory geometry."""


class NonPimTarget(PirmError):
    """SIMD dispatch targeted a tile without PIM capability."""


# -- cost --------------------------------------------------------------------

class MissingCostEntry(PirmError):
    """Cost table has no entry for the charged primitive."""


class MissingAreaEntry(PirmError):
    """Cost table has no area entry for the requested component."""


class CalibrationMismatch(PirmError):
    """Replayed canonical schedule does not reproduce the locked totals."""


# -- workloads / cli ---------------------------------------------------------

class UnknownColumn(PirmError):
    """Query referenced a bitmap column that does not exist."""


class ConfigError(PirmError):
    """Invalid configuration file or option value."""
