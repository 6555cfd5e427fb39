"""Exception types shared across the package."""


class FogAllocError(Exception):
    """Base class for all fogalloc errors."""


class InfeasibleAllocation(FogAllocError):
    """A grant of zero blocks or zero units can never finish a task."""


class EmptyInstance(FogAllocError):
    """An operation that needs at least one task received none."""


class InvalidDistance(FogAllocError):
    """Path loss is undefined for non-positive distances."""


class InvalidCapacity(FogAllocError):
    """Capacity inputs that floor to zero blocks or units."""


class ProtocolViolation(FogAllocError):
    """An allocator returned an action outside the system's action space."""


class InstanceTooLarge(FogAllocError):
    """Exhaustive search guard tripped."""


class ShapeError(FogAllocError):
    """Network input/gradient shape does not match the layer layout."""


class EmptySupport(FogAllocError):
    """A categorical head was asked to normalize over zero allowed entries."""


class DimensionMismatch(FogAllocError):
    """A checkpoint's head sizes do not match the target system capacity."""


class CheckpointError(FogAllocError):
    """Unreadable, corrupt, or wrong-version checkpoint file."""


class ConfigError(FogAllocError):
    """Invalid experiment or scenario configuration."""
