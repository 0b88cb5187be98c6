"""Shared data carriers: sensor configuration, raw frames, depth maps."""

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .tof_signal import ModulationConfig, unambiguous_range


@dataclass(frozen=True)
class SensorConfig:
    width: int = 320
    height: int = 240
    mod_freq_hz: float = 6e6
    exposure_us: float = 200.0
    adc_full_scale: float = 4096.0
    a_max: Optional[float] = None  # defaults to adc_full_scale / 2
    read_noise_sigma: float = 2.0
    photon_noise_gain: float = 0.1
    source_power: float = 12.0
    fov_deg: float = 60.0
    quantize: bool = True

    def __post_init__(self):
        if self.exposure_us <= 0:
            raise ValueError("exposure must be positive")
        if self.read_noise_sigma < 0 or self.photon_noise_gain < 0:
            raise ValueError("noise parameters must be non-negative")
        if self.amplitude_ceiling > self.adc_full_scale:
            raise ValueError("a_max must not exceed adc_full_scale")

    @property
    def amplitude_ceiling(self) -> float:
        return self.adc_full_scale / 2.0 if self.a_max is None else self.a_max

    @property
    def modulation(self) -> ModulationConfig:
        return ModulationConfig(self.mod_freq_hz)

    @property
    def max_range_m(self) -> float:
        return unambiguous_range(self.modulation)

    def with_exposure(self, exposure_us: float) -> "SensorConfig":
        return replace(self, exposure_us=exposure_us)


@dataclass
class RawFrame:
    """Four correlation sample planes plus the ambient plane for one capture."""

    samples: np.ndarray  # (H, W, 4) float32, sensor units
    ambient: np.ndarray  # (H, W) float32, E_BW plane
    sensor: SensorConfig

    def __post_init__(self):
        h, w = self.ambient.shape
        if self.samples.shape != (h, w, 4):
            raise ValueError("samples plane must be (H, W, 4)")
        if (h, w) != (self.sensor.height, self.sensor.width):
            raise ValueError("frame dimensions do not match sensor config")


@dataclass
class DepthMap:
    """Per-pixel metric depth with validity; invalid pixels carry depth 0."""

    depth: np.ndarray  # (H, W), meters
    valid: np.ndarray  # (H, W), bool

    def __post_init__(self):
        if self.depth.shape != self.valid.shape:
            raise ValueError("depth and validity planes must be congruent")


@dataclass
class DatasetSample:
    raw_short: RawFrame
    depth_gt: DepthMap
    meta: dict = field(default_factory=dict)

    @property
    def mask_gt(self) -> np.ndarray:
        return self.depth_gt.valid
