"""Corpus persistence: TOFR/TOFD binary formats, PGM export, manifests,
train/test splits and bulk synthetic dataset generation."""

import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import EmptyDataset, FormatError
from .scene_sim import CameraPose, make_pair, random_scene
from .types import DatasetSample, DepthMap, RawFrame, SensorConfig

RAW_MAGIC = b"TOFR"
DEPTH_MAGIC = b"TOFD"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    scene_id: str
    split: str


@dataclass
class Manifest:
    entries: list
    ratio: float = 0.75

    def __post_init__(self):
        paths = [e.path for e in self.entries]
        if len(set(paths)) != len(paths):
            raise ValueError("manifest paths must be unique")
        for e in self.entries:
            if e.split not in ("train", "test"):
                raise ValueError(f"bad split tag {e.split!r}")

    def subset(self, split: str):
        return [e for e in self.entries if e.split == split]


def _read_exact(f, n: int) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise FormatError("truncated file")
    return buf


def write_raw(path: str, frame: RawFrame):
    cfg = frame.sensor
    with open(path, "wb") as f:
        f.write(RAW_MAGIC)
        f.write(struct.pack("<IIIfff", FORMAT_VERSION, cfg.width, cfg.height,
                            cfg.mod_freq_hz, cfg.exposure_us, cfg.adc_full_scale))
        f.write(np.ascontiguousarray(frame.samples, dtype="<f4").tobytes())
        f.write(np.ascontiguousarray(frame.ambient, dtype="<f4").tobytes())


def read_raw(path: str) -> RawFrame:
    with open(path, "rb") as f:
        if _read_exact(f, 4) != RAW_MAGIC:
            raise FormatError("bad raw-frame magic")
        version, w, h, freq, exposure, adc = struct.unpack("<IIIfff", _read_exact(f, 24))
        if version != FORMAT_VERSION:
            raise FormatError(f"unsupported raw-frame version {version}")
        samples = np.frombuffer(_read_exact(f, 4 * h * w * 4), dtype="<f4")
        ambient = np.frombuffer(_read_exact(f, 4 * h * w), dtype="<f4")
        if f.read(1):
            raise FormatError("trailing bytes after raw-frame payload")
    cfg = SensorConfig(width=w, height=h, mod_freq_hz=float(freq),
                       exposure_us=float(exposure), adc_full_scale=float(adc))
    return RawFrame(samples=samples.reshape(h, w, 4).copy(),
                    ambient=ambient.reshape(h, w).copy(), sensor=cfg)


def write_depth(path: str, d: DepthMap):
    h, w = d.depth.shape
    with open(path, "wb") as f:
        f.write(DEPTH_MAGIC)
        f.write(struct.pack("<III", FORMAT_VERSION, w, h))
        f.write(np.ascontiguousarray(d.depth, dtype="<f4").tobytes())
        f.write(np.ascontiguousarray(d.valid, dtype=np.uint8).tobytes())


def read_depth(path: str) -> DepthMap:
    with open(path, "rb") as f:
        if _read_exact(f, 4) != DEPTH_MAGIC:
            raise FormatError("bad depth-map magic")
        version, w, h = struct.unpack("<III", _read_exact(f, 12))
        if version != FORMAT_VERSION:
            raise FormatError(f"unsupported depth-map version {version}")
        depth = np.frombuffer(_read_exact(f, 4 * h * w), dtype="<f4")
        valid = np.frombuffer(_read_exact(f, h * w), dtype=np.uint8)
        if f.read(1):
            raise FormatError("trailing bytes after depth-map payload")
    return DepthMap(depth=depth.reshape(h, w).copy(),
                    valid=valid.reshape(h, w).astype(bool))


def export_pgm(plane: np.ndarray, path: str, scale: float, valid=None):
    """16-bit binary PGM; [0, scale] maps linearly to [0, 65535]; invalid
    pixels write 0; out-of-range values clamp."""
    h, w = plane.shape
    values = np.clip(plane / scale, 0.0, 1.0) * 65535.0
    pix = np.rint(values).astype(np.uint16)
    if valid is not None:
        pix = np.where(valid, pix, 0).astype(np.uint16)
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        f.write(pix.astype(">u2").tobytes())


def write_manifest(path: str, manifest: Manifest):
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"# ratio\t{manifest.ratio}\n")
        for e in manifest.entries:
            f.write(f"{e.path}\t{e.scene_id}\t{e.split}\n")


def read_manifest(path: str) -> Manifest:
    ratio = 0.75
    entries = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("# ratio\t"):
                ratio = float(line.split("\t")[1])
                continue
            sample_path, scene_id, tag = line.split("\t")
            entries.append(ManifestEntry(sample_path, scene_id, tag))
    return Manifest(entries=entries, ratio=ratio)


def split(scene_ids, ratio: float, seed: int):
    """Scene-level shuffled partition into (train, test) lists."""
    if not (0.0 < ratio < 1.0):
        raise ValueError("split ratio must be in (0, 1)")
    rng = np.random.default_rng(seed)
    order = list(np.array(scene_ids, dtype=object)[rng.permutation(len(scene_ids))])
    n_train = round(ratio * len(order))
    return order[:n_train], order[n_train:]


def write_sample(dir_path: str, scene_id: str, sample: DatasetSample):
    """One sample = raw + ground-truth depth under a shared stem."""
    raw_path = os.path.join(dir_path, f"{scene_id}.tofr")
    depth_path = os.path.join(dir_path, f"{scene_id}.tofd")
    write_raw(raw_path, sample.raw_short)
    write_depth(depth_path, sample.depth_gt)
    return raw_path


def read_sample(raw_path: str) -> DatasetSample:
    depth_path = raw_path[:-5] + ".tofd" if raw_path.endswith(".tofr") \
        else raw_path + ".tofd"
    raw = read_raw(raw_path)
    gt = read_depth(depth_path)
    return DatasetSample(raw_short=raw, depth_gt=gt)


def generate_corpus(n_scenes: int, cfg_short: SensorConfig, cfg_long: SensorConfig,
                    seed: int, out_dir: str, ratio: float = 0.75) -> Manifest:
    """Randomized scenes rendered to paired samples plus a manifest.

    Deterministic in (args, seed); per-scene RNG substreams are derived
    from the corpus seed and scene index.
    """
    if n_scenes < 2:
        raise ValueError("need at least 2 scenes to split")
    os.makedirs(out_dir, exist_ok=True)
    scene_ids = [f"scene_{i:04d}" for i in range(n_scenes)]
    train_ids, _ = split(scene_ids, ratio, seed)
    train_ids = set(train_ids)
    entries = []
    depth_stats = []
    for i, sid in enumerate(scene_ids):
        scene_rng = np.random.default_rng([seed, i])
        scene = random_scene(scene_rng)
        sample = make_pair(scene, CameraPose(), cfg_short, cfg_long,
                           seed=int(scene_rng.integers(0, 2 ** 31)))
        sample.meta["scene_id"] = sid
        raw_path = write_sample(out_dir, sid, sample)
        tag = "train" if sid in train_ids else "test"
        entries.append(ManifestEntry(os.path.relpath(raw_path, out_dir), sid, tag))
        d = sample.depth_gt
        if np.any(d.valid):
            depth_stats.append(d.depth[d.valid])
    manifest = Manifest(entries=entries, ratio=ratio)
    write_manifest(os.path.join(out_dir, "manifest.tsv"), manifest)
    if depth_stats:
        all_d = np.concatenate(depth_stats)
        with open(os.path.join(out_dir, "stats.txt"), "w", encoding="utf-8") as f:
            f.write(f"valid_pixels\t{all_d.size}\n")
            f.write(f"depth_min_m\t{all_d.min():.6f}\n")
            f.write(f"depth_max_m\t{all_d.max():.6f}\n")
            f.write(f"depth_mean_m\t{all_d.mean():.6f}\n")
    return manifest


def load_split(out_dir: str, manifest: Manifest, tag: str):
    entries = manifest.subset(tag)
    if not entries:
        raise EmptyDataset(f"no {tag!r} entries in manifest")
    return [read_sample(os.path.join(out_dir, e.path)) for e in entries]
