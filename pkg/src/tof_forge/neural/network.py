"""The encoder-decoder depth network.

Four stride-2 down-sampling convolutions, nine residual blocks, four
stride-2 transposed convolutions with skip concatenations from the
encoder, and a Tanh output head. Channel plan: 4/64, 64/128, 128/256,
256/256, res 256/256, 256/256, 512/128, 256/64, 128/out.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeMismatch
from .layers import Conv2d, ConvTranspose2d, LeakyReLU, ReLU, ResBlock, Tanh


@dataclass(frozen=True)
class NetworkConfig:
    in_channels: int = 4
    out_channels: int = 1  # 3 for the literal published table; averaged at inference
    base_width: int = 64
    n_resblocks: int = 9
    leaky_slope: float = 0.2
    depth_scale_m: float = 8.0  # meters mapped onto the tanh output range


class Network:
    """Encoder-decoder with skip connections and explicit reverse-mode
    backward wiring (concat gradients are split back to both branches)."""

    DOWN_FACTOR = 16  # four stride-2 stages

    def __init__(self, cfg: NetworkConfig = NetworkConfig(), seed: int = 0,
                 init_std=None, dtype=np.float32):
        self.cfg = cfg
        rng = np.random.default_rng(seed)
        w = cfg.base_width
        mk_c = lambda ci, co: Conv2d(ci, co, 4, 2, 1, rng, init_std, dtype)
        mk_t = lambda ci, co: ConvTranspose2d(ci, co, 4, 2, 1, rng, init_std, dtype)
        self.d1, self.a1 = mk_c(cfg.in_channels, w), LeakyReLU(cfg.leaky_slope)
        self.d2, self.a2 = mk_c(w, 2 * w), LeakyReLU(cfg.leaky_slope)
        self.d3, self.a3 = mk_c(2 * w, 4 * w), LeakyReLU(cfg.leaky_slope)
        self.d4, self.a4 = mk_c(4 * w, 4 * w), LeakyReLU(cfg.leaky_slope)
        self.res = [ResBlock(4 * w, rng, init_std, dtype)
                    for _ in range(cfg.n_resblocks)]
        self.u1, self.b1 = mk_t(4 * w, 4 * w), ReLU()
        self.u2, self.b2 = mk_t(8 * w, 2 * w), ReLU()
        self.u3, self.b3 = mk_t(4 * w, w), ReLU()
        self.u4, self.b4 = mk_t(2 * w, cfg.out_channels), Tanh()
        self._skip_channels = None

    def modules(self):
        mods = {"d1": self.d1, "d2": self.d2, "d3": self.d3, "d4": self.d4}
        for i, r in enumerate(self.res, start=1):
            mods[f"res{i}"] = r
        mods.update({"u1": self.u1, "u2": self.u2, "u3": self.u3, "u4": self.u4})
        return mods

    def parameters(self) -> dict:
        return {f"{m}.{k}": v for m, mod in self.modules().items()
                for k, v in mod.params().items()}

    def gradients(self) -> dict:
        return {f"{m}.{k}": v for m, mod in self.modules().items()
                for k, v in mod.grads().items()}

    def zero_grad(self):
        for mod in self.modules().values():
            mod.zero_grad()

    def forward(self, x: np.ndarray, record_shapes: bool = False):
        n, c, h, w = x.shape
        if c != self.cfg.in_channels:
            raise ShapeMismatch(f"expected {self.cfg.in_channels} input channels, got {c}")
        if h % self.DOWN_FACTOR or w % self.DOWN_FACTOR:
            raise ShapeMismatch("spatial dims must be divisible by 16")
        shapes = []
        e1 = self.a1.forward(self.d1.forward(x))
        e2 = self.a2.forward(self.d2.forward(e1))
        e3 = self.a3.forward(self.d3.forward(e2))
        e4 = self.a4.forward(self.d4.forward(e3))
        h4 = e4
        for r in self.res:
            h4 = r.forward(h4)
        g1 = self.b1.forward(self.u1.forward(h4))
        g2 = self.b2.forward(self.u2.forward(np.concatenate([e3, g1], axis=1)))
        g3 = self.b3.forward(self.u3.forward(np.concatenate([e2, g2], axis=1)))
        out = self.b4.forward(self.u4.forward(np.concatenate([e1, g3], axis=1)))
        self._skip_channels = (e3.shape[1], e2.shape[1], e1.shape[1])
        if record_shapes:
            shapes = [e1.shape, e2.shape, e3.shape, e4.shape, h4.shape,
                      g1.shape, g2.shape, g3.shape, out.shape]
            return out, shapes
        return out

    def backward(self, dout: np.ndarray) -> np.ndarray:
        c3, c2, c1 = self._skip_channels
        dcat3 = self.u4.backward(self.b4.backward(dout))
        de1, dg3 = dcat3[:, :c1], dcat3[:, c1:]
        dcat2 = self.u3.backward(self.b3.backward(dg3))
        de2, dg2 = dcat2[:, :c2], dcat2[:, c2:]
        dcat1 = self.u2.backward(self.b2.backward(dg2))
        de3, dg1 = dcat1[:, :c3], dcat1[:, c3:]
        dh4 = self.u1.backward(self.b1.backward(dg1))
        for r in reversed(self.res):
            dh4 = r.backward(dh4)
        de3 = de3 + self.d4.backward(self.a4.backward(dh4))
        de2 = de2 + self.d3.backward(self.a3.backward(de3))
        de1 = de1 + self.d2.backward(self.a2.backward(de2))
        return self.d1.backward(self.a1.backward(de1))
