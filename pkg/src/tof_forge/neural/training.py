"""Loss, optimizer, schedule and the train/infer loops."""

import dataclasses
from dataclasses import dataclass

import numpy as np

from ..errors import CropTooLarge, EmptyDataset, EmptyMask, OutOfRange
from ..types import DatasetSample, DepthMap, RawFrame
from .network import Network, NetworkConfig


@dataclass(frozen=True)
class TrainConfig:
    lr0: float = 2e-4
    flat_epochs: int = 200
    decay_epochs: int = 1800
    crop: int = 128
    batch_size: int = 4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    @property
    def total_epochs(self) -> int:
        return self.flat_epochs + self.decay_epochs


def lr_schedule(epoch: int, cfg: TrainConfig) -> float:
    """Flat at lr0, then linear decay to exactly 0."""
    if epoch < cfg.flat_epochs:
        return cfg.lr0
    if epoch < cfg.flat_epochs + cfg.decay_epochs:
        return cfg.lr0 * (1.0 - (epoch - cfg.flat_epochs) / cfg.decay_epochs)
    return 0.0


def l1_masked_loss(pred: np.ndarray, target: np.ndarray, mask: np.ndarray):
    """Mean absolute error over mask-valid pixels only.

    Returns (loss, dloss/dpred). The subgradient at zero residual is 0.
    """
    if pred.shape != target.shape:
        raise ValueError("pred and target shapes must agree")
    m = np.broadcast_to(mask, pred.shape)
    n_valid = np.count_nonzero(m)
    if n_valid == 0:
        raise EmptyMask("no valid pixels in loss mask")
    diff = np.where(m, pred - target, 0.0)
    loss = float(np.abs(diff).sum() / n_valid)
    grad = np.sign(diff) / n_valid
    return loss, grad.astype(pred.dtype)


class Adam:
    """Standard bias-corrected Adam over a named parameter dict."""

    def __init__(self, params: dict, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict, grads: dict, lr: float):
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for k, p in params.items():
            g = grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            m_hat = self.m[k] / bc1
            v_hat = self.v[k] / bc2
            p -= (lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(p.dtype)


def adam_step(params: dict, grads: dict, state: Adam, lr: float):
    """Functional wrapper kept for symmetry with the scalar examples."""
    state.step(params, grads, lr)


def normalize_depth(d, d_max: float):
    """Map [0, d_max] meters to [-1, 1]."""
    arr = np.asarray(d, dtype=np.float64)
    if np.any(arr < 0) or np.any(arr > d_max):
        raise OutOfRange(f"depth outside [0, {d_max}]")
    return 2.0 * arr / d_max - 1.0


def denormalize_depth(x, d_max: float):
    return (np.asarray(x, dtype=np.float64) + 1.0) * d_max / 2.0


def random_crop(sample: DatasetSample, crop: int, rng: np.random.Generator) -> DatasetSample:
    """Congruent random crop of raw planes, depth and mask."""
    h, w = sample.depth_gt.depth.shape
    if crop > min(h, w):
        raise CropTooLarge(f"crop {crop} exceeds {h}x{w}")
    y = int(rng.integers(0, h - crop + 1))
    x = int(rng.integers(0, w - crop + 1))
    raw = sample.raw_short
    cfg = dataclasses.replace(raw.sensor, width=crop, height=crop)
    raw_c = RawFrame(samples=raw.samples[y:y + crop, x:x + crop],
                     ambient=raw.ambient[y:y + crop, x:x + crop], sensor=cfg)
    gt_c = DepthMap(depth=sample.depth_gt.depth[y:y + crop, x:x + crop],
                    valid=sample.depth_gt.valid[y:y + crop, x:x + crop])
    return DatasetSample(raw_short=raw_c, depth_gt=gt_c, meta=dict(sample.meta))


INPUT_GAIN = 16.0  # ADC-normalized samples are tiny; the gain keeps
                   # first-layer activations at a trainable scale


def _net_input(raw: RawFrame) -> np.ndarray:
    """(4, H, W) float32 raw samples scaled by INPUT_GAIN / adc_full_scale."""
    scale = INPUT_GAIN / raw.sensor.adc_full_scale
    return (raw.samples.transpose(2, 0, 1) * scale).astype(np.float32)


def _net_target(gt: DepthMap, d_max: float) -> np.ndarray:
    """(1, H, W) normalized depth; clamped so far-plane fill stays in range."""
    d = np.clip(gt.depth, 0.0, d_max)
    return normalize_depth(d, d_max)[None].astype(np.float32)


def _predict_channels(out: np.ndarray) -> np.ndarray:
    """Collapse the output channels (mean) for the 3-channel literal mode."""
    return out.mean(axis=1, keepdims=True) if out.shape[1] > 1 else out


def train(train_set, val_set, net_cfg: NetworkConfig, train_cfg: TrainConfig,
          checkpoint_dir=None, checkpoint_interval: int = 0,
          progress=None):
    """Train the network with shuffled mini-batches of random crops.

    Returns (network, loss_curve) where loss_curve[e] is the mean
    training loss of epoch e. If val_set is non-empty a validation curve
    is recorded in loss_curve as (train, val) tuples.
    """
    if len(train_set) == 0:
        raise EmptyDataset("training set is empty")
    from .checkpoint import save_checkpoint

    net = Network(net_cfg, seed=train_cfg.seed)
    opt = Adam(net.parameters(), train_cfg.adam_beta1, train_cfg.adam_beta2,
               train_cfg.adam_eps)
    rng = np.random.default_rng(train_cfg.seed)
    d_max = net_cfg.depth_scale_m
    curve = []
    for epoch in range(train_cfg.total_epochs):
        lr = lr_schedule(epoch, train_cfg)
        order = rng.permutation(len(train_set))
        losses = []
        for start in range(0, len(order), train_cfg.batch_size):
            idx = order[start:start + train_cfg.batch_size]
            crops = [random_crop(train_set[i], train_cfg.crop, rng) for i in idx]
            x = np.stack([_net_input(c.raw_short) for c in crops])
            t = np.stack([_net_target(c.depth_gt, d_max) for c in crops])
            m = np.stack([c.depth_gt.valid[None] for c in crops])
            net.zero_grad()
            out = net.forward(x)
            pred = _predict_channels(out)
            loss, dpred = l1_masked_loss(pred, t, m)
            dout = np.broadcast_to(dpred / out.shape[1], out.shape).astype(out.dtype) \
                if out.shape[1] > 1 else dpred
            net.backward(np.ascontiguousarray(dout))
            opt.step(net.parameters(), net.gradients(), lr)
            losses.append(loss)
        train_loss = float(np.mean(losses))
        if val_set:
            val_losses = []
            for s in val_set:
                pred = _predict_channels(net.forward(_net_input(s.raw_short)[None]))
                vl, _ = l1_masked_loss(pred, _net_target(s.depth_gt, d_max)[None],
                                       s.depth_gt.valid[None, None])
                val_losses.append(vl)
            curve.append((train_loss, float(np.mean(val_losses))))
        else:
            curve.append(train_loss)
        if progress is not None:
            progress(epoch, curve[-1], lr)
        if checkpoint_dir and checkpoint_interval and \
                (epoch + 1) % checkpoint_interval == 0:
            save_checkpoint(f"{checkpoint_dir}/epoch_{epoch + 1:05d}.tofw", net)
    return net, curve


def _pad_to_multiple(x: np.ndarray, mult: int):
    """Reflect-pad trailing spatial dims of (N,C,H,W) up to a multiple."""
    h, w = x.shape[2], x.shape[3]
    ph = (-h) % mult
    pw = (-w) % mult
    if ph == 0 and pw == 0:
        return x, h, w
    return np.pad(x, ((0, 0), (0, 0), (0, ph), (0, pw)), mode="reflect"), h, w


def infer(net: Network, raw: RawFrame) -> DepthMap:
    """Network prediction in meters; every pixel is marked valid (the
    network inpaints classical holes)."""
    x = _net_input(raw)[None]
    x, h, w = _pad_to_multiple(x, Network.DOWN_FACTOR)
    out = _predict_channels(net.forward(x))[0, 0, :h, :w]
    depth = denormalize_depth(out.astype(np.float64), net.cfg.depth_scale_m)
    return DepthMap(depth=depth, valid=np.ones_like(depth, dtype=bool))
