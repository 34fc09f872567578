"""Acceptance criteria, one test per criterion.

Each test records a pass/fail line that is echoed in the terminal summary
under "acceptance criteria".
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest

from slabuq.camera import (REFERENCE_CAMERA, CameraExtrinsics, CameraIntrinsics, PlanarTarget,
                           distorted_fraction, rotation_xyz, world_to_camera)
from slabuq.core import RngStream
from slabuq.perturb import apply_angle_shift, apply_distortion, gamma_to_error, shift_locations
from slabuq.propagate import PropagateConfig, run, write_samples_csv
from slabuq.segmenter import LN2, PlaybackBackend, ReferenceSegmenter, entropy_map, write_playback
from slabuq.studies import case_study, saturation_fixtures
from slabuq.surface import enforce_monotonic
from slabuq.synth import SynthConfig, generate_sequence

ALL = ("uc", "ugamma", "us")


def check_two_pass(dist):
    return abs(dist.variance - dist.two_pass_variance()) <= 1e-12


@pytest.fixture(scope="module")
def synth():
    cfg = SynthConfig(r_star=0.75, n_frames=20, dt=0.32, mm_per_pixel=0.1)
    seq, masks = generate_sequence(cfg)
    return seq, masks


@pytest.fixture(scope="module")
def full_run(synth):
    seq, _ = synth
    cfg = PropagateConfig(sources=ALL, T=20, min_trials=100, max_trials=100, master_seed=0)
    start = time.perf_counter()
    dist = run(seq, ReferenceSegmenter(), cfg)
    return dist, time.perf_counter() - start


def test_ac01_geometry_endpoints(acceptance):
    start = time.perf_counter()
    hi, lo = gamma_to_error(5.0), gamma_to_error(-5.0)
    elapsed = time.perf_counter() - start
    ok = abs(hi - 0.558) <= 5e-3 and abs(lo + 1.319) <= 5e-3 and elapsed < 1e-3
    acceptance("AC1 geometry endpoints", ok, f"+5deg {hi:.4f}%, -5deg {lo:.4f}%, {elapsed*1e3:.3f} ms")
    assert ok


def test_ac02_entropy(acceptance):
    half = entropy_map(np.array([[0.5]]))[0, 0]
    ends = entropy_map(np.array([[0.0, 1.0]]))
    grid = np.linspace(0, 1, 1001)[None, :]
    sym = np.max(np.abs(entropy_map(grid) - entropy_map(1 - grid)))
    ok = abs(half - LN2) <= 1e-12 and not ends.any() and sym <= 1e-12
    acceptance("AC2 entropy checks", ok, f"|H(0.5)-ln2|={abs(half - LN2):.1e}, symmetry {sym:.1e}")
    assert ok


def test_ac03_distortion_statistics(acceptance):
    n, p = 64 * 512, 0.007
    mean_o, sd_o = n * p, math.sqrt(n * p * (1 - p))
    frame = np.full((64, 512, 3), 200, np.uint8)
    start = time.perf_counter()
    counts = np.array([
        np.count_nonzero(np.all(apply_distortion(frame, 0.7, RngStream(2024).child(i).generator()) == 0,
                                axis=2))
        for i in range(200)])
    elapsed = time.perf_counter() - start
    ok = (abs(counts.mean() - 229.4) <= 5 and np.all(np.abs(counts - mean_o) <= 4 * sd_o)
          and elapsed < 5)
    acceptance("AC3 distortion statistics", ok,
               f"mean {counts.mean():.2f} (oracle {mean_o:.2f}), range [{counts.min()}, {counts.max()}], "
               f"{elapsed:.2f} s")
    assert ok


def test_ac04_strip_arithmetic(acceptance):
    W, ugamma, y, rho = 512, 0.558, 8.069, 49.57
    frame = np.repeat(np.tile(np.arange(W) % 251 + 1, (64, 1)).astype(np.uint8)[..., None], 3, axis=2)
    start = time.perf_counter()
    lo, hi = shift_locations(ugamma, rho, y, W)
    out = apply_angle_shift(frame, ugamma, rho, y)
    elapsed = time.perf_counter() - start
    # independent floor arithmetic and column splice
    shift = ugamma * y / 100 * rho
    loc1, loc2 = math.floor(W // 2 - shift / 2), math.floor(W // 2 + shift / 2)
    cols = list(range(W // 2)) + list(range(loc1, loc2)) + list(range(W // 2, W - (loc2 - loc1)))
    oracle = frame[:, cols]
    ok = ((lo, hi) == (loc1, loc2) == (254, 257) and loc2 - loc1 == 3
          and np.array_equal(out, oracle) and elapsed < 1e-3)
    acceptance("AC4 strip arithmetic", ok, f"loc1={lo}, loc2={hi}, strip {hi - lo} cols, "
               f"{elapsed*1e3:.3f} ms")
    assert ok


def test_ac05_synth_recovery(acceptance, synth, tmp_path):
    seq, masks = synth
    root = write_playback(tmp_path / "gt", [[m.astype(float)] for m in masks])
    start = time.perf_counter()
    dist = run(seq, PlaybackBackend(root), PropagateConfig(sources=(), T=1))
    elapsed = time.perf_counter() - start
    rel = abs(dist.mean - 0.75) / 0.75
    ok = rel <= 0.05 and dist.variance == 0.0 and check_two_pass(dist) and elapsed < 10
    acceptance("AC5 synth recovery", ok, f"mean {dist.mean:.4f} mm/s ({rel*100:.2f}% off), "
               f"var {dist.variance:.1e}, {dist.n_trials} trials, {elapsed:.2f} s")
    assert ok


def test_ac06_bound_inclusion(acceptance, full_run):
    dist, elapsed = full_run
    violations = sum(t.inclusion_violations for t in dist.trials)
    ok = dist.n_trials == 100 and violations == 0 and check_two_pass(dist) and elapsed < 120
    acceptance("AC6 bound inclusion", ok, f"{dist.n_trials} trials, {violations} violations, "
               f"{elapsed:.1f} s")
    assert ok


def test_ac07_monotonicity(acceptance, full_run):
    dist, _ = full_run
    worst = min(t.min_localized_rate for t in dist.trials)
    example = enforce_monotonic([10, 11, 9]).tolist()
    ok = worst >= 0 and example == [10, 10, 9]
    acceptance("AC7 monotonicity", ok, f"min localized rate {worst:.4f}, [10,11,9] -> {example}")
    assert ok


def test_ac08_case_study_direction(acceptance):
    start = time.perf_counter()
    seg = ReferenceSegmenter()
    parts, ok = [], True
    for level, image in saturation_fixtures().items():
        base = case_study(image, seg, "baseline", T=20)
        us = case_study(image, seg, 4, N=1000, T=20)
        ok &= us.mean > base.mean
        parts.append(f"{level} {base.mean:.4f}->{us.mean:.4f}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 60
    acceptance("AC8 case-study direction", ok, ", ".join(parts) + f", {elapsed:.1f} s")
    assert ok


def test_ac09_parallel_equivalence(acceptance, synth, tmp_path):
    seq, _ = synth
    cfg = PropagateConfig(sources=ALL, T=20, tol=1e-12, min_trials=2, max_trials=12, master_seed=7)
    paths = []
    for threads in (1, 8):
        dist = run(seq, ReferenceSegmenter(), cfg, threads=threads)
        assert check_two_pass(dist)
        paths.append(tmp_path / f"t{threads}.csv")
        write_samples_csv(dist, paths[-1])
    a, b = (p.read_bytes() for p in paths)
    ok = a == b
    acceptance("AC9 parallel equivalence", ok, f"{dist.n_trials} trials, {len(a)} bytes, "
               f"{'identical' if ok else 'different'}")
    assert ok


def test_ac10_convergence_bookkeeping(acceptance, synth, full_run):
    seq, masks = synth
    backend = PlaybackBackend(maps={(k, 0): m.astype(float) for k, m in enumerate(masks)})
    cfg = PropagateConfig(sources=(), T=1, min_trials=50)
    dist = run(seq, backend, cfg)
    stream_ok = check_two_pass(dist) and check_two_pass(full_run[0])
    ok = dist.n_trials == 50 and dist.variance == 0.0 and dist.stop_reason == "converged" and stream_ok
    acceptance("AC10 convergence bookkeeping", ok,
               f"stopped at {dist.n_trials} ({dist.stop_reason}), var {dist.variance}, "
               f"full-run |welford-two_pass| {abs(full_run[0].variance - full_run[0].two_pass_variance()):.1e}")
    assert ok


def _oracle_fraction(target, ext, intr, threshold=1.0):
    # per point: camera frame, pinhole, normalized radius, radial factor
    over = 0
    for p in target.points:
        q = world_to_camera(p, ext)
        u = intr.fx * q[0] / q[2] + intr.s * q[1] / q[2] + intr.cx
        v = intr.fy * q[1] / q[2] + intr.cy
        yn = (v - intr.cy) / intr.fy
        xn = (u - intr.cx - intr.s * yn) / intr.fx
        d = xn * xn + yn * yn
        f = 1 + intr.k1 * d ** 2 + intr.k2 * d ** 4
        du = intr.fx * xn * (f - 1) + intr.s * yn * (f - 1)
        dv = intr.fy * yn * (f - 1)
        over += math.hypot(du, dv) > threshold
    return 100.0 * over / len(target.points)


def test_ac11_camera_model(acceptance):
    target = PlanarTarget.grid(20, 20, 2.0)
    ext = CameraExtrinsics(rotation_xyz(3.0, -2.0, 0.0), [0.0, 0.0, -100.0])
    start = time.perf_counter()
    flat = distorted_fraction(target, ext, CameraIntrinsics(REFERENCE_CAMERA.fx, REFERENCE_CAMERA.fy, REFERENCE_CAMERA.cx, REFERENCE_CAMERA.cy))
    sweep = [distorted_fraction(target, ext, replace(REFERENCE_CAMERA, k1=k)) for k in (0.0, 2.15, 4.30, 8.60)]
    elapsed = time.perf_counter() - start
    oracle = [_oracle_fraction(target, ext, replace(REFERENCE_CAMERA, k1=k)) for k in (0.0, 2.15, 4.30, 8.60)]
    ok = (flat == 0.0 and sweep == oracle and all(b >= a for a, b in zip(sweep, sweep[1:]))
          and elapsed < 1)
    acceptance("AC11 camera model", ok, f"k1=k2=0 -> {flat}%, sweep {sweep}, {elapsed*1e3:.1f} ms")
    assert ok
