"""Exception types shared across the simulator."""


class AffordanceSimError(Exception):
    """Base class for all simulator errors."""


class OutOfBounds(AffordanceSimError):
    """A world-space point or voxel index lies outside the grid."""


class SchemaError(AffordanceSimError):
    """A document does not parse against its schema (wrong/missing/unknown fields)."""


class ValidationError(AffordanceSimError):
    """A document parses but violates a semantic rule (duplicate ids, bad placement...)."""


class DimensionMismatch(AffordanceSimError):
    """A joint vector does not match the chain's joint count."""


class JointLimitError(AffordanceSimError):
    """A joint value lies outside its [min, max] range."""


class EmptyLattice(AffordanceSimError):
    """Capability-map precompute was given no base poses."""


class InvalidStart(AffordanceSimError):
    """Planner start pose is blocked or outside the navigation grid."""


class UnknownQueryRef(AffordanceSimError):
    """An assistance response references no outstanding query."""


class MalformedLog(AffordanceSimError):
    """An event log is truncated or structurally invalid."""


class CommandRejected(AffordanceSimError):
    """A human command cannot be executed (out of reach, hands full...); not fatal."""


class ProtocolError(AffordanceSimError):
    """A wire message violates the bridge protocol."""
