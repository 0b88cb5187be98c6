"""AMCW time-of-flight signal model.

Forward model from (amplitude, phase, offset) to the four correlation
samples taken at 0/90/180/270 degrees, and the inverse demodulation back
to phase, amplitude and metric depth. All functions are pure and accept
scalars or numpy arrays elementwise.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ZeroAmplitude

LIGHT_SPEED_M_S = 299_792_458.0

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class ModulationConfig:
    mod_freq_hz: float
    light_speed_m_s: float = LIGHT_SPEED_M_S

    def __post_init__(self):
        if self.mod_freq_hz <= 0:
            raise ValueError("modulation frequency must be positive")

    @property
    def angular_freq(self) -> float:
        return TWO_PI * self.mod_freq_hz


@dataclass(frozen=True)
class PixelTruth:
    """Ground-truth signal parameters for one pixel."""

    alpha: float
    phase: float
    offset: float = 0.0

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("amplitude must be non-negative")
        if self.offset < 0:
            raise ValueError("offset must be non-negative")
        if not (0.0 <= self.phase < TWO_PI):
            raise ValueError("phase must be wrapped to [0, 2pi)")


@dataclass(frozen=True)
class FourPhaseSamples:
    c0: float
    c1: float
    c2: float
    c3: float

    def as_array(self) -> np.ndarray:
        return np.array([self.c0, self.c1, self.c2, self.c3])


def sample_correlation(truth: PixelTruth) -> FourPhaseSamples:
    """Ideal correlation samples c_i = (alpha/2) cos(phase + i*pi/2) + offset."""
    half = 0.5 * truth.alpha
    c = [half * np.cos(truth.phase + i * np.pi / 2.0) + truth.offset for i in range(4)]
    return FourPhaseSamples(*c)


def sample_correlation_arrays(alpha, phase, offset):
    """Vectorized forward model; returns an array with a trailing axis of 4."""
    alpha = np.asarray(alpha, dtype=np.float64)
    phase = np.asarray(phase, dtype=np.float64)
    offset = np.asarray(offset, dtype=np.float64)
    steps = np.arange(4) * (np.pi / 2.0)
    return 0.5 * alpha[..., None] * np.cos(phase[..., None] + steps) + offset[..., None]


def phase_from_samples(s: FourPhaseSamples) -> float:
    """Demodulated phase in [0, 2pi). Raises ZeroAmplitude when both
    quadrature differences vanish exactly (no signal)."""
    num = s.c3 - s.c1
    den = s.c0 - s.c2
    if num == 0.0 and den == 0.0:
        raise ZeroAmplitude("both quadrature differences are zero")
    return wrap_phase(np.arctan2(num, den))


def amplitude_from_samples(s: FourPhaseSamples) -> float:
    """Demodulated amplitude alpha/2; offset-invariant, always >= 0."""
    return float(np.hypot(s.c3 - s.c1, s.c0 - s.c2) / 2.0)


def phase_map(samples: np.ndarray):
    """Vectorized demodulation of an (..., 4) sample array.

    Returns (phase, signal_present) where pixels with both differences
    exactly zero carry phase 0 and signal_present False.
    """
    num = samples[..., 3] - samples[..., 1]
    den = samples[..., 0] - samples[..., 2]
    present = (num != 0.0) | (den != 0.0)
    phase = wrap_phase(np.arctan2(num, den))
    return np.where(present, phase, 0.0), present


def amplitude_map_from_samples(samples: np.ndarray) -> np.ndarray:
    """Vectorized amplitude alpha/2 of an (..., 4) sample array."""
    num = samples[..., 3] - samples[..., 1]
    den = samples[..., 0] - samples[..., 2]
    return np.hypot(num, den) / 2.0


def wrap_phase(phi):
    """Wrap to [0, 2pi)."""
    wrapped = np.mod(phi, TWO_PI)
    # mod can return 2pi for tiny negative inputs due to rounding
    return np.where(wrapped >= TWO_PI, 0.0, wrapped) if np.ndim(wrapped) else (
        0.0 if wrapped >= TWO_PI else float(wrapped)
    )


def unambiguous_range(cfg: ModulationConfig) -> float:
    """Maximum distance before phase roll-over: c / (2 f)."""
    return cfg.light_speed_m_s / (2.0 * cfg.mod_freq_hz)


def depth_from_phase(phase, cfg: ModulationConfig):
    """d = c * phi / (2 omega); result in [0, unambiguous_range)."""
    return cfg.light_speed_m_s * phase / (2.0 * cfg.angular_freq)


def phase_from_depth(depth, cfg: ModulationConfig):
    """Inverse of depth_from_phase with roll-over wrapping beyond range."""
    return wrap_phase(2.0 * cfg.angular_freq * np.asarray(depth, dtype=np.float64)
                      / cfg.light_speed_m_s)
