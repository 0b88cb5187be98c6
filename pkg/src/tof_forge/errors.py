"""Shared exception types for the tof_forge package."""


class TofForgeError(Exception):
    """Base class for all package errors."""


class ZeroAmplitude(TofForgeError):
    """Both quadrature differences are exactly zero; no phase exists."""


class DegenerateScene(TofForgeError):
    """Camera placed inside a primitive or scene otherwise unrenderable."""


class ShapeMismatch(TofForgeError):
    """Tensor shapes incompatible with the requested operation."""


class EmptyMask(TofForgeError):
    """A masked reduction was requested with zero valid pixels."""


class EmptyDataset(TofForgeError):
    """Training or evaluation requested on an empty sample set."""


class OutOfRange(TofForgeError):
    """Value outside the contractual input range."""


class CropTooLarge(TofForgeError):
    """Requested crop exceeds the source image dimensions."""


class FormatError(TofForgeError):
    """Malformed binary file: bad magic, version, or truncation."""


class TooSmall(TofForgeError):
    """Input smaller than the metric's minimum window size."""
