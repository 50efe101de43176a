"""Exception hierarchy shared by every layer of the runtime."""


class MDMPError(Exception):
    """Base class for all runtime errors."""


class ConfigError(MDMPError, ValueError):
    """A benchmark or runtime configuration is invalid."""


# region / iteration lifecycle

class NestedRegion(MDMPError):
    """region_begin called while another region is active."""


class InactiveRegion(MDMPError):
    """An operation needs an active region and there is none."""


class OpenIteration(MDMPError):
    """region_end called with an iteration still open."""


class Unbalanced(MDMPError):
    """iteration_begin / iteration_end did not alternate."""


class PendingCommunication(MDMPError):
    """region_end called while a directive is still incomplete."""


# buffers and directives

class IndexOutOfBounds(MDMPError, IndexError):
    pass


class RangeError(MDMPError, ValueError):
    """A directive or tracked range does not fit its buffer."""


class OverlapConflict(MDMPError, ValueError):
    """A send range overlaps a receive range, or tracked ranges partially overlap."""


class CounterOverflow(MDMPError, OverflowError):
    """An access counter would exceed its 32-bit capacity."""


# transport

class TransportFailure(MDMPError):
    """The transport shut down or a peer failed while communication was pending."""


class PeerUnreachable(TransportFailure):
    """A socket peer could not be reached."""


class LengthMismatch(TransportFailure):
    """A delivered payload did not have the expected length."""


# metrics

class MismatchedKernels(MDMPError, ValueError):
    """Two STREAM results do not cover the same kernel set."""
