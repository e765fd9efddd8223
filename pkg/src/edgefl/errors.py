"""Exception hierarchy shared by all edgefl modules."""


class EdgeFLError(Exception):
    """Base class for every error raised by edgefl."""


# weights / format errors
class EmptyInput(EdgeFLError, ValueError):
    pass


class ShapeMismatch(EdgeFLError, ValueError):
    pass


class BadWeights(EdgeFLError, ValueError):
    pass


class NonFiniteInput(EdgeFLError, ValueError):
    pass


class DuplicateEntry(EdgeFLError, ValueError):
    pass


class FormatError(EdgeFLError, ValueError):
    """Malformed binary input (model file or IDX file)."""


class BadMagic(FormatError):
    pass


class Truncated(FormatError):
    def __init__(self, offset: int, needed: int, available: int):
        self.offset = offset
        self.needed = needed
        self.available = available
        super().__init__(
            f"truncated at byte offset {offset}: needed {needed} bytes, {available} available"
        )


class ShapeDataMismatch(FormatError):
    def __init__(self, name: str, detail: str):
        self.name = name
        super().__init__(f"entry {name!r}: {detail}")


class TrailingData(FormatError):
    pass


class CountMismatch(FormatError):
    pass


# data errors
class EmptyDataset(EdgeFLError, ValueError):
    pass


class BadLabel(EdgeFLError, ValueError):
    pass


class InsufficientSamples(EdgeFLError, ValueError):
    pass


# network / lifecycle errors
class BadRequest(EdgeFLError, ValueError):
    pass


class NoRegistryReachable(EdgeFLError, ConnectionError):
    pass


class PortInUse(EdgeFLError, OSError):
    pass


class NotStarted(EdgeFLError, RuntimeError):
    pass


class NoModelYet(EdgeFLError, LookupError):
    pass


class NoPeersAvailable(EdgeFLError, RuntimeError):
    pass


# metrics errors
class NoPairs(EdgeFLError, ValueError):
    pass


class InsufficientDeploys(EdgeFLError, ValueError):
    pass


# orchestration errors
class LaunchFailure(EdgeFLError, RuntimeError):
    def __init__(self, node: str, reason: str):
        self.node = node
        self.reason = reason
        super().__init__(f"failed to launch {node}: {reason}")


class ExperimentTimeout(EdgeFLError, TimeoutError):
    pass
