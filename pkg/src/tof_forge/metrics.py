"""Evaluation metrics: masked MAE in centimeters, SSIM, and the
distance-sweep stability study.

Predictors are callables DatasetSample -> DepthMap, which lets the same
evaluation path score the neural network, the classical pipeline and
test stubs.
"""

from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d

from .classic_pipeline import MaskConfig, reconstruct
from .errors import EmptyDataset, EmptyMask, TooSmall
from .scene_sim import CameraPose, make_pair
from .types import DatasetSample, DepthMap

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass
class EvalReport:
    mae_cm: float
    ssim: float
    n_pixels_evaluated: int
    per_sample: list  # (sample id, mae_cm, ssim)


def mae_cm(pred: DepthMap, gt: DepthMap, mask: np.ndarray) -> float:
    """Mean absolute depth error in centimeters over mask-valid pixels."""
    if pred.depth.shape != gt.depth.shape or gt.depth.shape != mask.shape:
        raise ValueError("shapes must be congruent")
    n = np.count_nonzero(mask)
    if n == 0:
        raise EmptyMask("no valid pixels to evaluate")
    return float(100.0 * np.abs(pred.depth[mask] - gt.depth[mask]).mean())


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(r ** 2) / (2.0 * sigma ** 2))
    k = np.outer(g, g)
    return k / k.sum()


def ssim(x: np.ndarray, y: np.ndarray, dynamic_range: float = 1.0) -> float:
    """Standard single-scale SSIM with an 11x11 Gaussian window (sigma 1.5)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("inputs must share a shape")
    if min(x.shape) < SSIM_WINDOW:
        raise TooSmall(f"inputs must be at least {SSIM_WINDOW} pixels per side")
    win = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)
    mu_x = convolve2d(x, win, mode="valid")
    mu_y = convolve2d(y, win, mode="valid")
    xx = convolve2d(x * x, win, mode="valid") - mu_x * mu_x
    yy = convolve2d(y * y, win, mode="valid") - mu_y * mu_y
    xy = convolve2d(x * y, win, mode="valid") - mu_x * mu_y
    c1 = (SSIM_K1 * dynamic_range) ** 2
    c2 = (SSIM_K2 * dynamic_range) ** 2
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * xy + c2)
    den = (mu_x ** 2 + mu_y ** 2 + c1) * (xx + yy + c2)
    return float(np.mean(num / den))


def _normalized_plane(d: DepthMap, d_max: float) -> np.ndarray:
    """Depth scaled into [0, 1]; invalid pixels filled with 0 so the
    windowed statistics stay dense."""
    plane = np.clip(d.depth, 0.0, d_max) / d_max
    return np.where(d.valid, plane, 0.0)


def ssim_depth(pred: DepthMap, gt: DepthMap, d_max: float) -> float:
    return ssim(_normalized_plane(pred, d_max), _normalized_plane(gt, d_max),
                dynamic_range=1.0)


def evaluate(predictor, samples, d_max: float) -> EvalReport:
    """Per-sample MAE/SSIM against the ground truth on its valid mask,
    plus corpus means weighted per sample."""
    if not samples:
        raise EmptyDataset("no samples to evaluate")
    rows = []
    n_pixels = 0
    for i, s in enumerate(samples):
        pred = predictor(s)
        sid = s.meta.get("scene_id", f"sample_{i:04d}")
        rows.append((sid, mae_cm(pred, s.depth_gt, s.mask_gt),
                     ssim_depth(pred, s.depth_gt, d_max)))
        n_pixels += int(np.count_nonzero(s.mask_gt))
    maes = [r[1] for r in rows]
    ssims = [r[2] for r in rows]
    return EvalReport(mae_cm=float(np.mean(maes)), ssim=float(np.mean(ssims)),
                      n_pixels_evaluated=n_pixels, per_sample=rows)


def write_report(path: str, reports: dict):
    """Line-oriented report; one block per named predictor, stable columns
    (sample id, MAE cm, SSIM) plus a summary line."""
    with open(path, "w", encoding="utf-8") as f:
        f.write("method\tsample\tmae_cm\tssim\n")
        for name, rep in reports.items():
            for sid, m, s in rep.per_sample:
                f.write(f"{name}\t{sid}\t{m:.6f}\t{s:.6f}\n")
            f.write(f"{name}\tmean\t{rep.mae_cm:.6f}\t{rep.ssim:.6f}\n")


def classical_predictor(mask_cfg: MaskConfig = MaskConfig()):
    return lambda sample: reconstruct(sample.raw_short, mask_cfg)


def distance_sweep(predictor, scene, distances, cfg_short, cfg_long, seed: int,
                   mask_cfg: MaskConfig = MaskConfig()):
    """Observe one scene from several distances; per-distance MAE of the
    predictor against the long-exposure classical depth.

    Returns (series, mean, variance) with population variance.
    """
    if len(distances) < 2:
        raise ValueError("need at least 2 distances")
    series = []
    for i, dist in enumerate(distances):
        pose = CameraPose(position=(0.0, 0.0, -float(dist)))
        sample = make_pair(scene, pose, cfg_short, cfg_long, seed=seed + i,
                           mask_cfg=mask_cfg)
        pred = predictor(sample)
        series.append(mae_cm(pred, sample.depth_gt, sample.mask_gt))
    mean = float(np.mean(series))
    variance = float(np.var(series))
    return series, mean, variance
