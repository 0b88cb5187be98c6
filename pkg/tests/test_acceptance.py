"""Acceptance suite: twelve end-to-end criteria for the workbench.

Each test prints the measured values it gates on, so the captured output
doubles as the acceptance report. The end-to-end training criterion is
the long pole (tens of minutes single-threaded).
"""

import dataclasses
import os
import struct
import time

import numpy as np
import pytest

from tof_forge import dataset as ds
from tof_forge import metrics
from tof_forge import tof_signal as ts
from tof_forge.classic_pipeline import (AmplitudeMap, MaskConfig,
                                        confidence_mask, hole_fraction,
                                        reconstruct)
from tof_forge.cli import main as cli_main, reference_scene
from tof_forge.errors import FormatError
from tof_forge.neural.checkpoint import load_checkpoint, save_checkpoint
from tof_forge.neural.layers import (ResBlock, conv2d, conv2d_backward,
                                     conv_transpose2d,
                                     conv_transpose2d_backward, leaky_relu,
                                     leaky_relu_backward, relu, relu_backward,
                                     tanh, tanh_backward)
from tof_forge.neural.network import Network, NetworkConfig
from tof_forge.neural.training import (TrainConfig, infer, l1_masked_loss,
                                       lr_schedule, train)
from tof_forge.scene_sim import CameraPose, make_pair, simulate_raw
from tof_forge.types import DepthMap, RawFrame, SensorConfig

MOD = ts.ModulationConfig(6e6)


def noiseless(cfg: SensorConfig) -> SensorConfig:
    return dataclasses.replace(cfg, read_noise_sigma=0.0,
                               photon_noise_gain=0.0, quantize=False)


# ---------------------------------------------------------------------------
# 1. Demodulation oracle: 10^4 noiseless pixels round-trip within 1e-9.
# ---------------------------------------------------------------------------

def test_c01_demodulation_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    n = 10_000
    alpha = rng.uniform(1.0, 2000.0, n)
    phase = rng.uniform(0.0, 2 * np.pi, n)
    offset = rng.uniform(0.0, 2000.0, n)
    shifts = np.array([0.0, np.pi / 2, np.pi, 3 * np.pi / 2])
    samples = offset[:, None] + (alpha[:, None] / 2) * np.cos(phase[:, None]
                                                              + shifts[None, :])
    amp = np.hypot(samples[:, 3] - samples[:, 1],
                   samples[:, 0] - samples[:, 2]) / 2.0
    phi = np.mod(np.arctan2(samples[:, 3] - samples[:, 1],
                            samples[:, 0] - samples[:, 2]), 2 * np.pi)
    amp_err = np.abs(amp - alpha / 2).max()
    phi_err = np.abs(phi - phase)
    phi_err = np.minimum(phi_err, 2 * np.pi - phi_err).max()
    depth = ts.depth_from_phase(phi, MOD)
    depth_err = np.abs(ts.phase_from_depth(depth, MOD) - phi)
    depth_err = np.minimum(depth_err, 2 * np.pi - depth_err).max()
    elapsed = time.perf_counter() - t0
    print(f"\n[c01] amp_err={amp_err:.3e} phase_err={phi_err:.3e} "
          f"depth_err={depth_err:.3e} elapsed={elapsed:.3f}s")
    assert amp_err < 1e-9
    assert phi_err < 1e-9
    assert depth_err < 1e-9
    assert elapsed < 1.0


# ---------------------------------------------------------------------------
# 2. Offset invariance: exactly zero change over 10^4 trials.
# ---------------------------------------------------------------------------

def test_c02_offset_invariance_exact():
    rng = np.random.default_rng(1)
    # integer-valued sensor units make the cancellation exact in float64
    c = rng.integers(-100_000, 100_000, size=(10_000, 4)).astype(np.float64)
    shift = rng.integers(-100_000, 100_000, size=10_000).astype(np.float64)
    shifted = c + shift[:, None]
    mismatches = 0
    for row, row_s in zip(c, shifted):
        a = ts.amplitude_from_samples(ts.FourPhaseSamples(*row))
        b = ts.amplitude_from_samples(ts.FourPhaseSamples(*row_s))
        if a != b:
            mismatches += 1
            continue
        if a == 0.0:
            continue
        if ts.phase_from_samples(ts.FourPhaseSamples(*row)) != \
                ts.phase_from_samples(ts.FourPhaseSamples(*row_s)):
            mismatches += 1
    print(f"\n[c02] mismatches={mismatches}/10000")
    assert mismatches == 0


# ---------------------------------------------------------------------------
# 3. Amplitude-validity boundary and hole-fraction ordering.
# ---------------------------------------------------------------------------

def test_c03_amplitude_boundary_and_hole_ordering():
    cfg = SensorConfig(width=64, height=64)
    assert cfg.amplitude_ceiling == 2048.0
    amp = AmplitudeMap(amp=np.array([[49.0, 49.2]]))
    valid, _ = confidence_mask(amp, np.zeros((1, 2)), MaskConfig(), cfg)
    assert not valid[0, 0]  # 49.0 < 49.152
    assert valid[0, 1]      # 49.2 >= 49.152
    scene = reference_scene()
    means = []
    for exposure in (200.0, 400.0, 4000.0):
        vals = [hole_fraction(reconstruct(simulate_raw(
            scene, CameraPose(), cfg.with_exposure(exposure), seed=s)))
            for s in range(10)]
        means.append(float(np.mean(vals)))
    print(f"\n[c03] hole fractions 200/400/4000us = "
          f"{means[0]:.4f}/{means[1]:.4f}/{means[2]:.4f}")
    assert means[0] >= means[1] >= means[2]


# ---------------------------------------------------------------------------
# 4. Gradient suite: central finite differences, >= 20 seeds, rel < 1e-3.
# ---------------------------------------------------------------------------

def _directional_check(value_fn, params, grads, rng, h=1e-6, tol=1e-3):
    """Compare analytic directional derivative against central differences."""
    for p, g in zip(params, grads):
        d = rng.standard_normal(p.shape)
        p += h * d
        fp = value_fn()
        p -= 2 * h * d
        fm = value_fn()
        p += h * d
        numeric = (fp - fm) / (2 * h)
        analytic = float((g * d).sum())
        denom = max(abs(numeric), abs(analytic), 1e-8)
        assert abs(numeric - analytic) / denom < tol, \
            f"directional derivative off: {numeric} vs {analytic}"


def test_c04_gradient_suite():
    t0 = time.perf_counter()
    for seed in range(20):
        rng = np.random.default_rng(seed)

        # conv
        x = rng.standard_normal((1, 2, 6, 6))
        w = rng.standard_normal((3, 2, 3, 3))
        b = rng.standard_normal(3)
        proj = rng.standard_normal((1, 3, 3, 3))
        dx, dw, db = conv2d_backward(proj, x, w, 2, 1)
        _directional_check(lambda: float((conv2d(x, w, b, 2, 1) * proj).sum()),
                           [x, w, b], [dx, dw, db], rng)

        # transposed conv
        xt = rng.standard_normal((1, 3, 4, 4))
        wt = rng.standard_normal((3, 2, 4, 4))
        bt = rng.standard_normal(2)
        projt = rng.standard_normal((1, 2, 8, 8))
        dxt, dwt, dbt = conv_transpose2d_backward(projt, xt, wt, 2, 1)
        _directional_check(
            lambda: float((conv_transpose2d(xt, wt, bt, 2, 1) * projt).sum()),
            [xt, wt, bt], [dxt, dwt, dbt], rng)

        # activations (avoid the relu kink by keeping |x| away from 0)
        xa = rng.standard_normal((4, 4))
        xa = np.where(np.abs(xa) < 0.05, 0.1, xa)
        pa = rng.standard_normal((4, 4))
        _directional_check(lambda: float((leaky_relu(xa, 0.2) * pa).sum()),
                           [xa], [leaky_relu_backward(pa, xa, 0.2)], rng)
        _directional_check(lambda: float((relu(xa) * pa).sum()),
                           [xa], [relu_backward(pa, xa)], rng)
        _directional_check(lambda: float((tanh(xa) * pa).sum()),
                           [xa], [tanh_backward(pa, tanh(xa))], rng)

        # residual block
        block = ResBlock(2, np.random.default_rng(seed), dtype=np.float64)
        xr = rng.standard_normal((1, 2, 4, 4))
        pr = rng.standard_normal((1, 2, 4, 4))
        block.zero_grad()
        block.forward(xr)
        dxr = block.backward(pr)
        names = sorted(block.params())
        _directional_check(
            lambda: float((block.forward(xr) * pr).sum()),
            [xr] + [block.params()[n] for n in names],
            [dxr] + [block.grads()[n] for n in names], rng)

        # masked L1 (keep residuals away from the kink at 0)
        pred = rng.standard_normal((5, 5))
        target = pred + np.where(rng.standard_normal((5, 5)) > 0, 0.5, -0.5)
        mask = rng.random((5, 5)) > 0.3
        _, gl1 = l1_masked_loss(pred, target, mask)
        _directional_check(lambda: l1_masked_loss(pred, target, mask)[0],
                           [pred], [gl1], rng)

        # full two-stage network (encoder-decoder) end to end
        net = Network(NetworkConfig(base_width=4, n_resblocks=2),
                      seed=seed, dtype=np.float64)
        xn = rng.standard_normal((1, 4, 16, 16))
        pn = rng.standard_normal((1, 1, 16, 16))
        net.zero_grad()
        net.forward(xn)
        dxn = net.backward(pn)
        names = sorted(net.parameters())
        _directional_check(
            lambda: float((net.forward(xn) * pn).sum()),
            [xn] + [net.parameters()[n] for n in names],
            [dxn] + [net.gradients()[n] for n in names], rng)
    elapsed = time.perf_counter() - t0
    print(f"\n[c04] 20 seeds passed, elapsed={elapsed:.1f}s")
    assert elapsed < 120.0


# ---------------------------------------------------------------------------
# 5. Published shape chain and skip-concat channel counts.
# ---------------------------------------------------------------------------

def test_c05_shape_chain():
    net = Network(NetworkConfig(), seed=0)
    out, shapes = net.forward(np.zeros((1, 4, 128, 128), np.float32),
                              record_shapes=True)
    got = [s[1:] for s in shapes]
    expected = [(64, 64, 64), (128, 32, 32), (256, 16, 16), (256, 8, 8),
                (256, 8, 8), (256, 16, 16), (128, 32, 32), (64, 64, 64),
                (1, 128, 128)]
    print(f"\n[c05] shapes={got}")
    assert got == expected
    # concatenated channel counts feeding the three skip-fed up stages
    assert net.u2.w.shape[0] == 512
    assert net.u3.w.shape[0] == 256
    assert net.u4.w.shape[0] == 128


# ---------------------------------------------------------------------------
# 6. Overfit sanity: one noiseless sample, 50 epochs, >= 90% loss drop.
# ---------------------------------------------------------------------------

def test_c06_overfit_single_sample():
    t0 = time.perf_counter()
    cfg = SensorConfig(width=128, height=128)
    scene = reference_scene()
    sample = make_pair(scene, CameraPose(), noiseless(cfg.with_exposure(200.0)),
                       noiseless(cfg.with_exposure(4000.0)), seed=0)
    tc = TrainConfig(flat_epochs=50, decay_epochs=0, crop=128, batch_size=1,
                     seed=0)
    _, curve = train([sample], [], NetworkConfig(), tc)
    drop = 1.0 - curve[-1] / curve[0]
    elapsed = time.perf_counter() - t0
    print(f"\n[c06] loss {curve[0]:.5f} -> {curve[-1]:.5f} "
          f"(drop {100 * drop:.1f}%) elapsed={elapsed:.1f}s")
    assert drop >= 0.90
    assert elapsed < 300.0


# ---------------------------------------------------------------------------
# 7. End-to-end: learned pipeline beats the classical baseline.
# ---------------------------------------------------------------------------

def _train_and_eval(exposure_short, tmp_root):
    cfg = SensorConfig(width=64, height=64)
    out = os.path.join(tmp_root, f"corpus_{int(exposure_short)}")
    manifest = ds.generate_corpus(80, cfg.with_exposure(exposure_short),
                                  cfg.with_exposure(4000.0), seed=0,
                                  out_dir=out, ratio=0.75)
    train_set = ds.load_split(out, manifest, "train")
    test_set = ds.load_split(out, manifest, "test")
    assert len(train_set) == 60 and len(test_set) == 20
    d_max = 8.0
    classical = metrics.evaluate(metrics.classical_predictor(), test_set, d_max)
    tc = TrainConfig(flat_epochs=30, decay_epochs=270, crop=64, batch_size=4,
                     seed=0)
    net, _ = train(train_set, [], NetworkConfig(depth_scale_m=d_max), tc)
    neural = metrics.evaluate(lambda s: infer(net, s.raw_short), test_set, d_max)
    return classical, neural


def test_c07_end_to_end_beats_classical(tmp_path):
    t0 = time.perf_counter()
    classical, neural = _train_and_eval(200.0, str(tmp_path))
    print(f"\n[c07] 200us classical mae={classical.mae_cm:.2f}cm "
          f"ssim={classical.ssim:.4f} | neural mae={neural.mae_cm:.2f}cm "
          f"ssim={neural.ssim:.4f}")
    assert classical.mae_cm > 30.0  # noise level precondition
    assert neural.mae_cm < classical.mae_cm
    assert neural.mae_cm <= 0.5 * classical.mae_cm
    assert neural.ssim > classical.ssim

    _, neural_400 = _train_and_eval(400.0, str(tmp_path))
    elapsed = time.perf_counter() - t0
    print(f"[c07] 400us neural mae={neural_400.mae_cm:.2f}cm "
          f"ssim={neural_400.ssim:.4f} | total elapsed={elapsed / 60:.1f}min")
    # the longer exposure is an easier problem for the trained models
    assert neural_400.mae_cm <= neural.mae_cm
    assert elapsed < 3600.0


# ---------------------------------------------------------------------------
# 8. Learning-rate schedule fixed points.
# ---------------------------------------------------------------------------

def test_c08_lr_schedule():
    tc = TrainConfig()
    vals = (lr_schedule(0, tc), lr_schedule(199, tc), lr_schedule(1100, tc),
            lr_schedule(2000, tc))
    print(f"\n[c08] lr(0,199,1100,2000)={vals}")
    assert vals[0] == 2e-4
    assert vals[1] == 2e-4
    assert vals[2] == 1e-4
    assert vals[3] == 0.0


# ---------------------------------------------------------------------------
# 9. SSIM oracle.
# ---------------------------------------------------------------------------

def test_c09_ssim_oracle():
    rng = np.random.default_rng(2)
    x = rng.random((32, 32))
    y = np.clip(x + 0.2 * rng.standard_normal((32, 32)), 0, 1)
    assert abs(metrics.ssim(x, x) - 1.0) < 1e-9
    assert abs(metrics.ssim(x, y) - metrics.ssim(y, x)) < 1e-9
    win = metrics._gaussian_window(11, 1.5)
    c1, c2 = 0.01 ** 2, 0.03 ** 2
    vals = []
    for i in range(32 - 10):
        for j in range(32 - 10):
            px = x[i:i + 11, j:j + 11][::-1, ::-1]
            py = y[i:i + 11, j:j + 11][::-1, ::-1]
            mx, my = (win * px).sum(), (win * py).sum()
            vx = (win * px * px).sum() - mx * mx
            vy = (win * py * py).sum() - my * my
            vxy = (win * px * py).sum() - mx * my
            vals.append(((2 * mx * my + c1) * (2 * vxy + c2)) /
                        ((mx * mx + my * my + c1) * (vx + vy + c2)))
    oracle = float(np.mean(vals))
    got = metrics.ssim(x, y)
    print(f"\n[c09] ssim={got:.8f} oracle={oracle:.8f}")
    assert abs(got - oracle) < 1e-6


# ---------------------------------------------------------------------------
# 10. Distance-sweep harness.
# ---------------------------------------------------------------------------

def test_c10_distance_sweep():
    distances = list(np.round(np.linspace(1.0, 2.8, 10), 4))  # 180 cm span
    cfg = SensorConfig(width=48, height=48)
    cfg_s, cfg_l = cfg.with_exposure(400.0), cfg.with_exposure(4000.0)

    series, mean, var = metrics.distance_sweep(
        metrics.classical_predictor(), reference_scene(), distances,
        cfg_s, cfg_l, seed=0)
    assert len(series) == 10
    m = sum(series) / len(series)
    v = sum((s - m) ** 2 for s in series) / len(series)
    print(f"\n[c10] mean={mean:.4f}cm variance={var:.6f}")
    assert abs(mean - m) < 1e-9
    assert abs(var - v) < 1e-9 * max(1.0, v)

    series0, mean0, var0 = metrics.distance_sweep(
        lambda s: s.depth_gt, reference_scene(), distances,
        noiseless(cfg_s), noiseless(cfg_l), seed=0)
    assert all(s == pytest.approx(0.0, abs=1e-6) for s in series0)
    assert mean0 == pytest.approx(0.0, abs=1e-6)
    assert var0 == pytest.approx(0.0, abs=1e-12)


# ---------------------------------------------------------------------------
# 11. Format round trips: bitwise over 100 randomized instances.
# ---------------------------------------------------------------------------

def test_c11_format_round_trips(tmp_path):
    rng = np.random.default_rng(3)
    n_checked = 0
    for i in range(45):  # raw frames
        h, w = int(rng.integers(2, 12)), int(rng.integers(2, 12))
        cfg = SensorConfig(width=w, height=h,
                           exposure_us=float(rng.integers(100, 5000)))
        frame = RawFrame(samples=rng.uniform(0, 4096, (h, w, 4)).astype(np.float32),
                         ambient=rng.uniform(0, 4096, (h, w)).astype(np.float32),
                         sensor=cfg)
        p1, p2 = str(tmp_path / "a.tofr"), str(tmp_path / "b.tofr")
        ds.write_raw(p1, frame)
        ds.write_raw(p2, ds.read_raw(p1))
        assert open(p1, "rb").read() == open(p2, "rb").read()
        n_checked += 1
    for i in range(45):  # depth maps
        h, w = int(rng.integers(2, 12)), int(rng.integers(2, 12))
        d = DepthMap(depth=rng.uniform(0, 20, (h, w)).astype(np.float32),
                     valid=rng.random((h, w)) > 0.4)
        p1, p2 = str(tmp_path / "a.tofd"), str(tmp_path / "b.tofd")
        ds.write_depth(p1, d)
        ds.write_depth(p2, ds.read_depth(p1))
        assert open(p1, "rb").read() == open(p2, "rb").read()
        n_checked += 1
    for i in range(10):  # checkpoints
        cfg = NetworkConfig(base_width=int(rng.integers(2, 6)), n_resblocks=1)
        p1, p2 = str(tmp_path / "a.tofw"), str(tmp_path / "b.tofw")
        save_checkpoint(p1, Network(cfg, seed=i))
        save_checkpoint(p2, load_checkpoint(p1))
        assert open(p1, "rb").read() == open(p2, "rb").read()
        n_checked += 1
    print(f"\n[c11] {n_checked} bitwise round trips")
    assert n_checked == 100

    # truncation raises cleanly for every format
    for writer, reader, name in (
            (lambda p: ds.write_raw(p, frame), ds.read_raw, "raw"),
            (lambda p: ds.write_depth(p, d), ds.read_depth, "depth"),
            (lambda p: save_checkpoint(p, Network(cfg, seed=0)),
             load_checkpoint, "ckpt")):
        path = str(tmp_path / f"trunc_{name}")
        writer(path)
        data = open(path, "rb").read()
        open(path, "wb").write(data[: len(data) * 2 // 3])
        with pytest.raises(FormatError):
            reader(path)


# ---------------------------------------------------------------------------
# 12. Full-pipeline determinism: bitwise-identical reports.
# ---------------------------------------------------------------------------

def test_c12_pipeline_determinism(tmp_path):
    reports = []
    for tag in ("run_a", "run_b"):
        corpus = str(tmp_path / tag / "corpus")
        run = str(tmp_path / tag / "train")
        report = str(tmp_path / tag / "report.tsv")
        assert cli_main(["--threads", "0", "dataset-gen", "--scenes", "6",
                         "--seed", "9", "--out", corpus,
                         "--width", "32", "--height", "32"]) == 0
        assert cli_main(["--threads", "0", "train",
                         "--manifest", os.path.join(corpus, "manifest.tsv"),
                         "--out", run, "--epochs", "10", "--crop", "32",
                         "--batch-size", "2", "--seed", "9"]) == 0
        assert cli_main(["--threads", "0", "eval",
                         "--ckpt", os.path.join(run, "final.tofw"),
                         "--manifest", os.path.join(corpus, "manifest.tsv"),
                         "--out", report]) == 0
        reports.append(open(report, "rb").read())
    print(f"\n[c12] report bytes={len(reports[0])}, identical="
          f"{reports[0] == reports[1]}")
    assert reports[0] == reports[1]
