"""Binary network checkpoints: magic "TOFW", little-endian, bit-exact."""

import struct

import numpy as np

from ..errors import FormatError
from .network import Network, NetworkConfig

MAGIC = b"TOFW"
VERSION = 1


def save_checkpoint(path: str, net: Network):
    cfg = net.cfg
    params = net.parameters()
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<IiiiiffI", VERSION, cfg.in_channels, cfg.out_channels,
                            cfg.base_width, cfg.n_resblocks, cfg.leaky_slope,
                            cfg.depth_scale_m, len(params)))
        for name, arr in params.items():
            raw = name.encode("utf-8")
            f.write(struct.pack("<H", len(raw)))
            f.write(raw)
            f.write(struct.pack("<B", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def _read_exact(f, n: int) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise FormatError("truncated checkpoint file")
    return buf


def load_checkpoint(path: str) -> Network:
    with open(path, "rb") as f:
        if _read_exact(f, 4) != MAGIC:
            raise FormatError("bad checkpoint magic")
        version, in_c, out_c, width, n_res, slope, d_scale, n_params = \
            struct.unpack("<IiiiiffI", _read_exact(f, struct.calcsize("<IiiiiffI")))
        if version != VERSION:
            raise FormatError(f"unsupported checkpoint version {version}")
        cfg = NetworkConfig(in_channels=in_c, out_channels=out_c, base_width=width,
                            n_resblocks=n_res, leaky_slope=slope,
                            depth_scale_m=d_scale)
        net = Network(cfg, seed=0)
        params = net.parameters()
        for _ in range(n_params):
            (name_len,) = struct.unpack("<H", _read_exact(f, 2))
            name = _read_exact(f, name_len).decode("utf-8")
            (rank,) = struct.unpack("<B", _read_exact(f, 1))
            dims = struct.unpack(f"<{rank}I", _read_exact(f, 4 * rank))
            payload = _read_exact(f, 4 * int(np.prod(dims)))
            arr = np.frombuffer(payload, dtype="<f4").reshape(dims)
            if name not in params:
                raise FormatError(f"unknown parameter {name!r} in checkpoint")
            if params[name].shape != arr.shape:
                raise FormatError(f"shape mismatch for parameter {name!r}")
            params[name][...] = arr
        if f.read(1):
            raise FormatError("trailing bytes after checkpoint payload")
    return net
