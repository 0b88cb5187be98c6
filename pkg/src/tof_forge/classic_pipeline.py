"""Classical ToF reconstruction: per-pixel demodulation plus amplitude and
ambient-ratio (AMR) confidence masking."""

from dataclasses import dataclass

import numpy as np

from . import tof_signal
from .types import DepthMap, RawFrame, SensorConfig

AMR_EPS = 1e-12


@dataclass
class AmplitudeMap:
    amp: np.ndarray  # (H, W), sensor units, >= 0


@dataclass(frozen=True)
class MaskConfig:
    amp_threshold_ratio: float = 0.024
    amr_threshold: float = 16.0
    combine_weight: float = 0.5

    def __post_init__(self):
        if not (0.0 < self.amp_threshold_ratio < 1.0):
            raise ValueError("amp_threshold_ratio must be in (0, 1)")
        if self.amr_threshold <= 0:
            raise ValueError("amr_threshold must be positive")
        if not (0.0 <= self.combine_weight <= 1.0):
            raise ValueError("combine_weight must be in [0, 1]")


def amplitude_map(raw: RawFrame) -> AmplitudeMap:
    samples = raw.samples.astype(np.float64)
    return AmplitudeMap(amp=tof_signal.amplitude_map_from_samples(samples))


def confidence_mask(amp: AmplitudeMap, ambient: np.ndarray, cfg: MaskConfig,
                    sensor: SensorConfig):
    """Validity mask plus a scalar [0, 1] quality map.

    A pixel is invalid iff amp < ratio * a_max (strict, so the boundary
    value itself is valid) or the ambient-to-modulated ratio exceeds the
    AMR threshold.
    """
    a = amp.amp
    ambient = np.asarray(ambient, dtype=np.float64)
    amp_thresh = cfg.amp_threshold_ratio * sensor.amplitude_ceiling
    amr = ambient / np.maximum(a, AMR_EPS)
    valid = (a >= amp_thresh) & (amr <= cfg.amr_threshold)
    amp_score = np.clip(a / sensor.amplitude_ceiling, 0.0, 1.0)
    amr_score = np.clip(1.0 - amr / cfg.amr_threshold, 0.0, 1.0)
    quality = cfg.combine_weight * amp_score + (1.0 - cfg.combine_weight) * amr_score
    return valid, quality


def reconstruct(raw: RawFrame, cfg: MaskConfig = MaskConfig()) -> DepthMap:
    """Demodulate a raw frame to metric depth with confidence masking.

    Invalid pixels (mask failure, zero signal, or any non-finite
    intermediate) carry depth 0 and valid=False.
    """
    samples = raw.samples.astype(np.float64)
    amp = amplitude_map(raw)
    valid, _ = confidence_mask(amp, raw.ambient, cfg, raw.sensor)
    phase, present = tof_signal.phase_map(samples)
    depth = tof_signal.depth_from_phase(phase, raw.sensor.modulation)
    valid = valid & present & np.isfinite(depth)
    depth = np.where(valid, depth, 0.0)
    return DepthMap(depth=depth, valid=valid)


def hole_fraction(d: DepthMap) -> float:
    return float(np.count_nonzero(~d.valid) / d.valid.size)
