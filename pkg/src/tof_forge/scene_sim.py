"""Parametric scenes, ray-cast depth rendering and the forward sensor model.

The simulator is the synthetic stand-in for real short/long exposure
captures: scenes of planes, spheres and boxes are ray-cast to radial depth
and reflectivity, then pushed through inverse-square attenuation, the
four-phase correlation model, shot/read noise and ADC quantization.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import tof_signal
from .errors import DegenerateScene
from .types import DatasetSample, DepthMap, RawFrame, SensorConfig

FAR_PLANE_FRACTION = 0.95  # ray misses get 0.95 * unambiguous range


@dataclass(frozen=True)
class Plane:
    point: tuple
    normal: tuple
    reflectivity: float


@dataclass(frozen=True)
class Sphere:
    center: tuple
    radius: float
    reflectivity: float


@dataclass(frozen=True)
class Box:
    min_corner: tuple
    max_corner: tuple
    reflectivity: float


@dataclass(frozen=True)
class Scene:
    primitives: tuple
    ambient_level: float = 0.5

    def __post_init__(self):
        if len(self.primitives) == 0:
            raise ValueError("scene needs at least one primitive")
        for p in self.primitives:
            if not (0.0 < p.reflectivity <= 1.0):
                raise ValueError("reflectivity must be in (0, 1]")
        if self.ambient_level < 0:
            raise ValueError("ambient level must be non-negative")


@dataclass(frozen=True)
class CameraPose:
    """Pinhole camera at `position` looking along +z after yaw/pitch."""

    position: tuple = (0.0, 0.0, 0.0)
    yaw_deg: float = 0.0
    pitch_deg: float = 0.0

    def rotation(self) -> np.ndarray:
        cy, sy = math.cos(math.radians(self.yaw_deg)), math.sin(math.radians(self.yaw_deg))
        cp, sp = math.cos(math.radians(self.pitch_deg)), math.sin(math.radians(self.pitch_deg))
        yaw = np.array([[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]])
        pitch = np.array([[1.0, 0.0, 0.0], [0.0, cp, -sp], [0.0, sp, cp]])
        return yaw @ pitch


def _ray_directions(cfg: SensorConfig, pose: CameraPose) -> np.ndarray:
    """Unit ray directions, shape (H, W, 3); x right, y down, z forward."""
    w, h = cfg.width, cfg.height
    pixel = 2.0 * math.tan(math.radians(cfg.fov_deg) / 2.0) / w
    xs = (np.arange(w) + 0.5 - w / 2.0) * pixel
    ys = (np.arange(h) + 0.5 - h / 2.0) * pixel
    gx, gy = np.meshgrid(xs, ys)
    dirs = np.stack([gx, gy, np.ones_like(gx)], axis=-1)
    dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    return dirs @ pose.rotation().T


def _intersect(prim, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """Ray parameter t (= radial distance for unit dirs), inf on miss."""
    inf = np.full(dirs.shape[:2], np.inf)
    if isinstance(prim, Plane):
        n = np.asarray(prim.normal, dtype=np.float64)
        n = n / np.linalg.norm(n)
        denom = dirs @ n
        t = np.where(np.abs(denom) > 1e-12,
                     (np.asarray(prim.point) - origin) @ n / np.where(denom == 0, 1.0, denom),
                     np.inf)
        return np.where(t > 1e-9, t, inf)
    if isinstance(prim, Sphere):
        oc = origin - np.asarray(prim.center, dtype=np.float64)
        b = dirs @ oc
        c = oc @ oc - prim.radius ** 2
        disc = b * b - c
        sq = np.sqrt(np.maximum(disc, 0.0))
        t0, t1 = -b - sq, -b + sq
        t = np.where(t0 > 1e-9, t0, np.where(t1 > 1e-9, t1, np.inf))
        return np.where(disc >= 0.0, t, inf)
    if isinstance(prim, Box):
        lo = np.asarray(prim.min_corner, dtype=np.float64)
        hi = np.asarray(prim.max_corner, dtype=np.float64)
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / dirs
            t_lo = (lo - origin) * inv
            t_hi = (hi - origin) * inv
        near = np.nanmax(np.minimum(t_lo, t_hi), axis=-1)
        far = np.nanmin(np.maximum(t_lo, t_hi), axis=-1)
        hit = (near <= far) & (far > 1e-9)
        t = np.where(near > 1e-9, near, far)
        return np.where(hit, t, inf)
    raise TypeError(f"unknown primitive type {type(prim).__name__}")


def _camera_inside(prim, origin: np.ndarray) -> bool:
    if isinstance(prim, Sphere):
        return float(np.linalg.norm(origin - np.asarray(prim.center))) < prim.radius
    if isinstance(prim, Box):
        lo = np.asarray(prim.min_corner)
        hi = np.asarray(prim.max_corner)
        return bool(np.all(origin > lo) and np.all(origin < hi))
    return False


def render_geometry(scene: Scene, pose: CameraPose, cfg: SensorConfig):
    """Nearest-hit radial depth, per-pixel reflectivity and hit mask."""
    origin = np.asarray(pose.position, dtype=np.float64)
    for p in scene.primitives:
        if _camera_inside(p, origin):
            raise DegenerateScene(f"camera inside {type(p).__name__}")
    dirs = _ray_directions(cfg, pose)
    depth = np.full((cfg.height, cfg.width), np.inf)
    rho = np.zeros((cfg.height, cfg.width))
    for prim in scene.primitives:
        t = _intersect(prim, origin, dirs)
        closer = t < depth
        depth = np.where(closer, t, depth)
        rho = np.where(closer, prim.reflectivity, rho)
    hit = np.isfinite(depth)
    depth = np.where(hit, depth, FAR_PLANE_FRACTION * cfg.max_range_m)
    rho = np.where(hit, rho, 0.0)
    return depth, rho, hit


def render_depth(scene: Scene, pose: CameraPose, cfg: SensorConfig) -> DepthMap:
    """Ray-cast ground-truth depth; misses filled with the far plane and
    flagged invalid."""
    depth, _, hit = render_geometry(scene, pose, cfg)
    return DepthMap(depth=depth, valid=hit)


def received_amplitude(rho, depth_m, cfg: SensorConfig):
    """Inverse-square attenuated amplitude, clamped at the saturation
    ceiling 2 * a_max (over-exposure model)."""
    alpha = cfg.source_power * np.asarray(rho) * cfg.exposure_us / np.square(depth_m)
    return np.clip(alpha, 0.0, 2.0 * cfg.amplitude_ceiling)


def simulate_raw(scene: Scene, pose: CameraPose, cfg: SensorConfig, seed: int) -> RawFrame:
    """Full forward model: geometry -> amplitude/phase/offset -> ideal
    samples -> shot + read noise -> ADC quantization."""
    depth, rho, _ = render_geometry(scene, pose, cfg)
    alpha = received_amplitude(rho, depth, cfg)
    phase = tof_signal.phase_from_depth(depth, cfg.modulation)
    delta = scene.ambient_level * cfg.exposure_us  # k_ambient = 1
    ideal = tof_signal.sample_correlation_arrays(alpha, phase, np.full_like(alpha, delta))

    rng = np.random.default_rng(seed)
    variance = cfg.photon_noise_gain * (np.maximum(ideal, 0.0) + delta) \
        + cfg.read_noise_sigma ** 2
    samples = ideal + rng.standard_normal(ideal.shape) * np.sqrt(variance)
    amb_var = cfg.photon_noise_gain * 2.0 * delta + cfg.read_noise_sigma ** 2
    ambient = delta + rng.standard_normal(depth.shape) * np.sqrt(amb_var)
    if cfg.quantize:
        samples = np.clip(np.rint(samples), 0.0, cfg.adc_full_scale)
        ambient = np.clip(np.rint(ambient), 0.0, cfg.adc_full_scale)
    return RawFrame(samples=samples.astype(np.float32),
                    ambient=ambient.astype(np.float32), sensor=cfg)


def make_pair(scene: Scene, pose: CameraPose, cfg_short: SensorConfig,
              cfg_long: SensorConfig, seed: int,
              mask_cfg=None) -> DatasetSample:
    """Short-exposure raw paired with the classical reconstruction of the
    long-exposure frame as ground truth."""
    if cfg_short.exposure_us >= cfg_long.exposure_us:
        raise ValueError("short exposure must be shorter than long exposure")
    if (cfg_short.width, cfg_short.height) != (cfg_long.width, cfg_long.height):
        raise ValueError("both exposures must share the sensor geometry")
    from .classic_pipeline import MaskConfig, reconstruct

    raw_short = simulate_raw(scene, pose, cfg_short, seed=2 * seed)
    raw_long = simulate_raw(scene, pose, cfg_long, seed=2 * seed + 1)
    depth_gt = reconstruct(raw_long, mask_cfg or MaskConfig())
    meta = {"exposure_short_us": cfg_short.exposure_us,
            "exposure_long_us": cfg_long.exposure_us,
            "seed": seed}
    return DatasetSample(raw_short=raw_short, depth_gt=depth_gt, meta=meta)


def random_scene(rng: np.random.Generator, max_depth_m: float = 6.0) -> Scene:
    """Randomized indoor-like scene: a backdrop plane plus a few spheres,
    boxes and a chance of a low-reflectivity hard case."""
    prims = []
    back_z = rng.uniform(0.6 * max_depth_m, max_depth_m)
    prims.append(Plane(point=(0.0, 0.0, back_z),
                       normal=(rng.uniform(-0.15, 0.15), rng.uniform(-0.15, 0.15), -1.0),
                       reflectivity=float(rng.uniform(0.3, 0.9))))
    for _ in range(int(rng.integers(1, 4))):
        z = rng.uniform(0.8, 0.85 * back_z)
        x = rng.uniform(-0.4, 0.4) * z
        y = rng.uniform(-0.3, 0.3) * z
        # one in four objects is a dark "hard case"
        rho = float(rng.uniform(0.02, 0.1)) if rng.random() < 0.25 \
            else float(rng.uniform(0.2, 0.9))
        if rng.random() < 0.5:
            prims.append(Sphere(center=(x, y, z), radius=float(rng.uniform(0.15, 0.6)),
                                reflectivity=rho))
        else:
            half = rng.uniform(0.1, 0.5, size=3)
            prims.append(Box(min_corner=tuple(np.array([x, y, z]) - half),
                             max_corner=tuple(np.array([x, y, z]) + half),
                             reflectivity=rho))
    return Scene(primitives=tuple(prims),
                 ambient_level=float(rng.uniform(0.3, 0.55)))
