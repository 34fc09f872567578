"""Forward Monte-Carlo propagation of image uncertainties to the regression rate.

One trial draws ``(ugamma, uc, us)``, shifts then distorts every frame,
segments each perturbed frame with T dropout passes, composes the complete
uncertainty maps and turns the mask sequence into ``(r_hat, r_plus, r_minus)``.
Trials repeat until the variance of the accumulated rate distribution stops
changing by more than ``tol``.

Every random draw comes from a stream addressed by ``(master_seed, trial_idx,
...)``, and trials are folded into the distribution in index order, so a run
is reproducible bit for bit and independent of the thread count.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import FrameSequence, RngStream, threshold_mask
from .perturb import (PerturbationDraw, apply_angle_shift, apply_distortion,
                      normalize_enabled, pixel_density, sample_draw)
from .segmenter import compose_umask, mcd_predict
from .surface import (TrackConfig, default_calib_points, heights_series,
                      localized_rates, rate_with_bounds)

# stream purposes under the master seed
_TRIALS = 0
_REFERENCE = 1
# stream purposes under a trial
_DRAW = 0
_DISTORT = 1
_SEGMENT = 2

MODES = ("with_bounds", "mean_only")


@dataclass(frozen=True)
class PropagateConfig:
    sources: frozenset = frozenset({"uc", "ugamma", "us"})
    T: int = 20
    tol: float = 1e-6
    min_trials: int = 50
    max_trials: int = 10000
    master_seed: int = 0
    mode: str = "with_bounds"
    calib_points: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "sources", normalize_enabled(self.sources))
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.min_trials < 2:
            raise ValueError("min_trials must be at least 2")
        if self.max_trials < self.min_trials:
            raise ValueError("max_trials must be >= min_trials")
        if self.T < 1:
            raise ValueError("T must be at least 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")


@dataclass(frozen=True)
class TrialContext:
    """Per-run quantities derived from the unperturbed first frame."""

    rho: float
    track: TrackConfig


@dataclass(frozen=True)
class TrialResult:
    trial_idx: int
    r_hat: float
    r_plus: float
    r_minus: float
    draw: PerturbationDraw
    inclusion_violations: int = 0
    min_localized_rate: float = 0.0

    @property
    def triple(self) -> tuple[float, float, float]:
        return self.r_hat, self.r_plus, self.r_minus


class RunningMoments:
    """Welford accumulator for count, mean and population variance."""

    def __init__(self):
        self.count = 0
        self.mean = 0.0
        self.M2 = 0.0

    def push(self, x: float) -> None:
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self.M2 += delta * (x - self.mean)

    @property
    def variance(self) -> float:
        return self.M2 / self.count if self.count else 0.0


@dataclass
class RateDistribution:
    mode: str = "with_bounds"
    trials: list[TrialResult] = field(default_factory=list)
    moments: RunningMoments = field(default_factory=RunningMoments)
    stop_reason: str | None = None

    def add(self, trial: TrialResult) -> float:
        """Fold one trial in; return the variance change it caused."""
        old = self.moments.variance
        values = trial.triple if self.mode == "with_bounds" else (trial.r_hat,)
        for v in values:
            self.moments.push(v)
        self.trials.append(trial)
        return self.moments.variance - old

    @property
    def samples(self) -> list[tuple[float, float, float]]:
        return [t.triple for t in self.trials]

    @property
    def n_trials(self) -> int:
        return len(self.trials)

    def pooled(self) -> np.ndarray:
        if self.mode == "with_bounds":
            return np.array([v for t in self.trials for v in t.triple])
        return np.array([t.r_hat for t in self.trials])

    @property
    def mean(self) -> float:
        return self.moments.mean

    @property
    def variance(self) -> float:
        return self.moments.variance

    def two_pass_variance(self) -> float:
        x = self.pooled()
        return float(np.mean((x - x.mean()) ** 2)) if x.size else 0.0


def prepare(frames: FrameSequence, backend, cfg: PropagateConfig) -> TrialContext:
    """Segment the unperturbed first frame once for rho and default stations."""
    ref = mcd_predict(backend, frames.frames[0], cfg.T,
                      RngStream(cfg.master_seed).child(_REFERENCE), frame_id=0)
    mask = threshold_mask(ref.mean)
    rho = pixel_density(mask, frames.y_true)
    points = cfg.calib_points or default_calib_points(mask)
    return TrialContext(rho=rho, track=TrackConfig(points, frames.mm_per_pixel, frames.dt))


def perturb_frames(frames: FrameSequence, draw: PerturbationDraw, rho: float,
                   stream: RngStream) -> list[np.ndarray]:
    """Angle shift, then distortion, applied to every frame of one trial."""
    out = []
    for k, frame in enumerate(frames.frames):
        x = frame
        if draw.ugamma != 0:
            x = apply_angle_shift(x, draw.ugamma, rho, frames.y_true)
        if draw.uc != 0:
            x = apply_distortion(x, draw.uc, stream.child(_DISTORT, k).generator())
        out.append(x)
    return out


def run_trial(frames: FrameSequence, backend, cfg: PropagateConfig, trial_idx: int,
              context: TrialContext | None = None) -> TrialResult:
    ctx = context or prepare(frames, backend, cfg)
    stream = RngStream(cfg.master_seed).child(_TRIALS, trial_idx)
    draw = sample_draw(stream.child(_DRAW).generator(), cfg.sources)
    perturbed = perturb_frames(frames, draw, ctx.rho, stream)
    means, umasks = [], []
    for k, x in enumerate(perturbed):
        res = mcd_predict(backend, x, cfg.T, stream.child(_SEGMENT, k), frame_id=k)
        means.append(res.mean)
        umasks.append(compose_umask(res.um, res.mean, draw.us))
    est, (base, grown, shrunk) = rate_with_bounds(means, umasks, ctx.track, return_masks=True)

    violations = sum(int(np.count_nonzero(s & ~b)) + int(np.count_nonzero(b & ~g))
                     for b, g, s in zip(base, grown, shrunk))
    min_rate = min(float(localized_rates(heights_series(ms, ctx.track), ctx.track.dt).min())
                   for ms in (base, grown, shrunk))
    return TrialResult(trial_idx, est.r_hat, est.r_plus, est.r_minus, draw,
                       inclusion_violations=violations, min_localized_rate=min_rate)


def run(frames: FrameSequence, backend, cfg: PropagateConfig, threads: int = 1,
        progress=None) -> RateDistribution:
    """Accumulate trials until the pooled variance converges.

    Convergence: ``|var_new - var_old| <= tol`` once at least ``min_trials``
    trials are in; otherwise stop at ``max_trials``.  With ``threads > 1``
    trials are computed in batches, then folded in index order and truncated
    at the first stopping trial, which reproduces the serial run exactly.
    """
    ctx = prepare(frames, backend, cfg)
    dist = RateDistribution(mode=cfg.mode)
    threads = max(1, int(threads))
    batch = 1 if threads == 1 else 2 * threads

    def one(idx):
        return run_trial(frames, backend, cfg, idx, ctx)

    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        idx = 0
        while dist.stop_reason is None:
            stop = min(idx + batch, cfg.max_trials)
            ids = range(idx, stop)
            results = list(pool.map(one, ids)) if pool else [one(i) for i in ids]
            for res in results:
                change = dist.add(res)
                n = dist.n_trials
                if progress is not None:
                    progress(n, dist)
                if n >= cfg.min_trials and abs(change) <= cfg.tol:
                    dist.stop_reason = "converged"
                elif n >= cfg.max_trials:
                    dist.stop_reason = "max_trials"
                if dist.stop_reason:
                    break
            idx = stop
    finally:
        if pool:
            pool.shutdown()
    return dist


# ---------------------------------------------------------------------------
# summaries and emission

def summarize(dist: RateDistribution, bins: int = 30) -> dict:
    """Histogram over [min, max] plus moments and 5/50/95 quantiles.

    Variance is the population variance of the pooled samples.
    """
    x = dist.pooled()
    if x.size == 0:
        raise ValueError("empty distribution")
    lo, hi = float(x.min()), float(x.max())
    counts, edges = np.histogram(x, bins=bins, range=(lo, hi) if hi > lo else None)
    q05, q50, q95 = np.quantile(x, [0.05, 0.5, 0.95])
    r_hat = np.array([t.r_hat for t in dist.trials])
    return {
        "mode": dist.mode,
        "n_trials": dist.n_trials,
        "n_samples": int(x.size),
        "stop_reason": dist.stop_reason,
        "mean": dist.mean,
        "variance": dist.variance,
        "q05": float(q05),
        "q50": float(q50),
        "q95": float(q95),
        "mean_r_hat": float(r_hat.mean()),
        "histogram": {"edges": edges.tolist(), "counts": counts.tolist()},
    }


def _fmt(v: float) -> str:
    return repr(float(v))


def write_samples_csv(dist: RateDistribution, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial_idx", "r_hat", "r_plus", "r_minus", "uc", "ugamma", "us"])
        for t in dist.trials:
            w.writerow([t.trial_idx, _fmt(t.r_hat), _fmt(t.r_plus), _fmt(t.r_minus),
                        _fmt(t.draw.uc), _fmt(t.draw.ugamma), _fmt(t.draw.us)])


def write_histogram_csv(summary: dict, path) -> None:
    edges = summary["histogram"]["edges"]
    counts = summary["histogram"]["counts"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_lo", "bin_hi", "count"])
        for lo, hi, c in zip(edges[:-1], edges[1:], counts):
            w.writerow([_fmt(lo), _fmt(hi), c])


def write_summary_json(summary: dict, path) -> None:
    clean = {k: (None if isinstance(v, float) and not math.isfinite(v) else v)
             for k, v in summary.items()}
    with open(path, "w") as fh:
        json.dump(clean, fh, indent=2)
