"""Command-line front end.

Subcommands: ``synth``, ``propagate``, ``track``, ``perturb``, ``calib-study``
and ``case-study``.  Every run writes its outputs plus a ``manifest.json``
that records the arguments and the resolved configuration.

Exit codes: 0 success, 2 configuration error, 3 runtime or data error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .camera import (REFERENCE_CAMERA, CameraExtrinsics, CameraIntrinsics, PlanarTarget,
                     rotation_xyz, target_displacements)
from .core import (DataError, FrameSequence, RngStream, load_frame, load_mask, save_frame,
                   save_mask, threshold_mask)
from .perturb import SOURCES, apply_angle_shift, apply_distortion, pixel_density

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


class ConfigError(Exception):
    pass


_REQUIRED = object()


def load_config(path) -> dict:
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return data


def field(cfg: dict, name: str, kind=None, default=_REQUIRED):
    if name not in cfg:
        if default is _REQUIRED:
            raise ConfigError(f"missing config field '{name}'")
        return default
    value = cfg[name]
    if kind is not None and value is not None:
        try:
            value = kind(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"config field '{name}': {exc}") from exc
    return value


def check_fields(cfg: dict, allowed, where: str = "config") -> None:
    unknown = set(cfg) - set(allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {', '.join(sorted(unknown))}")


def write_manifest(out_dir: Path, args, config: dict, seed) -> None:
    manifest = {
        "subcommand": args.command,
        "config_path": str(args.config) if getattr(args, "config", None) else None,
        "config": config,
        "seed": seed,
        "out": str(args.out),
        "argv": sys.argv[1:],
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str))


def make_backend(spec: str):
    from .segmenter import PlaybackBackend, ReferenceSegmenter

    if spec == "reference":
        return ReferenceSegmenter()
    if spec.startswith("playback:"):
        return PlaybackBackend(spec.split(":", 1)[1])
    raise ConfigError(f"unknown backend {spec!r}; use 'reference' or 'playback:<dir>'")


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


# ---------------------------------------------------------------------------
# synth

def _synth_config(cfg: dict, seed):
    from .synth import SynthConfig

    data = dict(cfg)
    if seed is not None:
        data["noise_seed"] = seed
    try:
        return SynthConfig.from_dict(data)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"synth config: {exc}") from exc


def write_sequence(out: Path, seq: FrameSequence, masks, extra: dict | None = None) -> dict:
    (out / "frames").mkdir(parents=True, exist_ok=True)
    (out / "masks").mkdir(parents=True, exist_ok=True)
    frames, mask_files = [], []
    for k, (frame, mask) in enumerate(zip(seq.frames, masks)):
        fname = f"frames/frame_{k:04d}.pgm"
        mname = f"masks/mask_{k:04d}.pgm"
        save_frame(frame, out / fname)
        save_mask(mask, out / mname)
        frames.append(fname)
        mask_files.append(mname)
    meta = {"dt": seq.dt, "y_true": seq.y_true, "mm_per_pixel": seq.mm_per_pixel,
            "n_frames": len(seq), "frames": frames, "masks": mask_files, **(extra or {})}
    (out / "sequence.json").write_text(json.dumps(meta, indent=2))
    return meta


def read_sequence(root) -> tuple[FrameSequence, dict]:
    root = Path(root)
    try:
        meta = json.loads((root / "sequence.json").read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"{root}: unreadable sequence.json ({exc})") from exc
    frames = np.stack([load_frame(root / f) for f in meta["frames"]])
    seq = FrameSequence(frames, dt=meta["dt"], y_true=meta.get("y_true", 8.069),
                        mm_per_pixel=meta.get("mm_per_pixel", 0.1))
    return seq, meta


def cmd_synth(args) -> dict:
    from .synth import generate_sequence

    raw = load_config(args.config)
    cfg = _synth_config(raw, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seq, masks = generate_sequence(cfg)
    write_sequence(out, seq, masks, {"synth": cfg.to_dict()})
    write_manifest(out, args, cfg.to_dict(), cfg.noise_seed)
    print(f"wrote {len(seq)} frames to {out}")
    return cfg.to_dict()


# ---------------------------------------------------------------------------
# propagate

_PROPAGATE_FIELDS = {"frames", "synth", "sources", "T", "tol", "min_trials", "max_trials",
                     "mode", "calib_points", "bins", "seed", "backend"}


def _sources(value) -> frozenset:
    if value is None:
        return frozenset(SOURCES)
    if isinstance(value, dict):
        names = {k for k, v in value.items() if v}
        extra = set(value) - set(SOURCES)
    elif isinstance(value, list):
        names = set(value)
        extra = names - set(SOURCES)
    else:
        raise ConfigError("config field 'sources' must be a list or an object")
    if extra:
        raise ConfigError(f"config field 'sources': unknown source(s) {sorted(extra)}")
    return frozenset(names)


def _load_frames(cfg: dict, base: Path, seed) -> FrameSequence:
    from .synth import generate_sequence

    if "frames" in cfg:
        root = Path(cfg["frames"])
        if not root.is_absolute():
            root = base / root
        return read_sequence(root)[0]
    if "synth" in cfg:
        return generate_sequence(_synth_config(cfg["synth"] or {}, None))[0]
    raise ConfigError("missing config field 'frames' (or an inline 'synth' block)")


def _out_paths(out: Path, stem: str) -> tuple[Path, Path]:
    """`out` may name the samples CSV itself or a directory to hold it."""
    if out.suffix.lower() == ".csv":
        out.parent.mkdir(parents=True, exist_ok=True)
        return out.parent, out
    out.mkdir(parents=True, exist_ok=True)
    return out, out / stem


def cmd_propagate(args) -> dict:
    from .propagate import (PropagateConfig, run, summarize, write_histogram_csv,
                            write_samples_csv, write_summary_json)

    if args.config is None:
        raise ConfigError("propagate needs --config")
    cfg = load_config(args.config)
    check_fields(cfg, _PROPAGATE_FIELDS)
    seed = args.seed if args.seed is not None else field(cfg, "seed", int, 0)
    try:
        pcfg = PropagateConfig(
            sources=_sources(cfg.get("sources")),
            T=field(cfg, "T", int, 20),
            tol=field(cfg, "tol", float, 1e-6),
            min_trials=field(cfg, "min_trials", int, 50),
            max_trials=field(cfg, "max_trials", int, 10000),
            master_seed=seed,
            mode=field(cfg, "mode", str, "with_bounds"),
            calib_points=(tuple(cfg["calib_points"]) if cfg.get("calib_points") else None),
        )
    except ValueError as exc:
        raise ConfigError(f"propagate config: {exc}") from exc
    bins = field(cfg, "bins", int, 30)
    backend = make_backend(args.backend or cfg.get("backend", "reference"))
    frames = _load_frames(cfg, Path(args.config).parent, seed)

    out_dir, samples_path = _out_paths(Path(args.out), "dist.csv")
    dist = run(frames, backend, pcfg, threads=args.threads)
    summary = summarize(dist, bins)
    summary["two_pass_variance"] = dist.two_pass_variance()
    summary["sources"] = sorted(pcfg.sources)
    write_samples_csv(dist, samples_path)
    write_summary_json(summary, out_dir / "summary.json")
    write_histogram_csv(summary, out_dir / "histogram.csv")
    if args.svg:
        from .svg import histogram_svg

        histogram_svg(summary["histogram"]["edges"], summary["histogram"]["counts"],
                      out_dir / "histogram.svg", title="regression rate",
                      xlabel="rate [mm/s]")
    write_manifest(out_dir, args, cfg, seed)
    print(f"{dist.n_trials} trials ({dist.stop_reason}); mean {dist.mean:.6f} mm/s, "
          f"variance {dist.variance:.3e}")
    return summary


# ---------------------------------------------------------------------------
# track

_TRACK_FIELDS = {"sequence", "masks", "dt", "mm_per_pixel", "calib_points"}


def cmd_track(args) -> dict:
    from .surface import (TrackConfig, default_calib_points, heights_series,
                          localized_rates, total_rate, valid_intervals)

    if args.config is None:
        raise ConfigError("track needs --config")
    cfg = load_config(args.config)
    check_fields(cfg, _TRACK_FIELDS)
    base = Path(args.config).parent
    if "sequence" in cfg:
        root = Path(cfg["sequence"])
        root = root if root.is_absolute() else base / root
        try:
            meta = json.loads((root / "sequence.json").read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"{root}: unreadable sequence.json ({exc})") from exc
        mask_paths = [root / m for m in meta["masks"]]
        dt = field(cfg, "dt", float, meta["dt"])
        mmpp = field(cfg, "mm_per_pixel", float, meta.get("mm_per_pixel", 0.1))
    elif "masks" in cfg:
        root = Path(cfg["masks"])
        root = root if root.is_absolute() else base / root
        mask_paths = sorted(root.glob("*.pgm")) + sorted(root.glob("*.png"))
        dt = field(cfg, "dt", float)
        mmpp = field(cfg, "mm_per_pixel", float)
    else:
        raise ConfigError("missing config field 'masks' (or 'sequence')")
    masks = [load_mask(p) for p in mask_paths]
    if len(masks) < 2:
        raise DataError("track needs at least two masks")
    points = tuple(cfg["calib_points"]) if cfg.get("calib_points") else default_calib_points(masks[0])
    try:
        tcfg = TrackConfig(points, mmpp, dt)
    except ValueError as exc:
        raise ConfigError(f"track config: {exc}") from exc

    h = heights_series(masks, tcfg)
    loc = localized_rates(h, dt)
    valid = valid_intervals(h)
    rate = total_rate(loc, valid if valid.any() else None)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cols = [f"col_{c}" for c in tcfg.calib_points]
    _write_rows(out / "heights.csv", ["frame", "t", *cols],
                [[k, repr(k * dt), *map(repr, row)] for k, row in enumerate(h)])
    _write_rows(out / "rates.csv", ["interval", *cols],
                [[k, *map(repr, row)] for k, row in enumerate(loc)])
    summary = {"mean_rate": rate, "calib_points": list(tcfg.calib_points),
               "n_frames": len(masks), "dt": dt, "mm_per_pixel": mmpp}
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    write_manifest(out, args, cfg, None)
    print(f"mean regression rate {rate:.6f} mm/s over {len(tcfg.calib_points)} stations")
    return summary


# ---------------------------------------------------------------------------
# perturb

def cmd_perturb(args) -> dict:
    from .segmenter import ReferenceSegmenter

    src = Path(args.input)
    if src.is_dir():
        paths = sorted(src.glob("*.pgm")) + sorted(src.glob("*.png"))
    else:
        paths = [src]
    if not paths:
        raise DataError(f"no PGM/PNG frames under {src}")
    if args.uc < 0 or args.uc > 100:
        raise ConfigError("--uc must lie in [0, 100]")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seed = args.seed if args.seed is not None else 0
    record = {"uc": args.uc, "ugamma": args.ugamma, "y": args.y, "frames": []}
    for k, path in enumerate(paths):
        frame = load_frame(path)
        rho = args.rho
        if args.ugamma and rho is None:
            mask = (load_mask(args.mask) if args.mask
                    else threshold_mask(ReferenceSegmenter().predict_deterministic(frame)))
            rho = pixel_density(mask, args.y)
        x = apply_angle_shift(frame, args.ugamma, rho, args.y) if args.ugamma else frame
        if args.uc:
            x = apply_distortion(x, args.uc, RngStream(seed).child(k).generator())
        target = out / (path.stem + ".pgm")
        gray = np.all(x == x[..., :1], axis=2).all()
        save_frame(x, target if gray else target.with_suffix(".png"))
        record["frames"].append({"input": str(path), "rho": rho,
                                 "zeroed": int(np.count_nonzero((x == 0).all(axis=2)))})
    (out / "perturb.json").write_text(json.dumps(record, indent=2))
    write_manifest(out, args, record, seed)
    print(f"perturbed {len(paths)} frame(s) into {out}")
    return record


# ---------------------------------------------------------------------------
# calib-study

_CALIB_FIELDS = {"intrinsics", "pose", "target", "threshold"}


def cmd_calib_study(args) -> dict:
    from .camera import distorted_fraction

    cfg = load_config(args.config)
    check_fields(cfg, _CALIB_FIELDS)
    intr_cfg = {**asdict(REFERENCE_CAMERA), **cfg.get("intrinsics", {})}
    try:
        intr = CameraIntrinsics(**intr_cfg)
        pose = cfg.get("pose", {})
        check_fields(pose, {"rotation_deg", "translation"}, "pose")
        ext = CameraExtrinsics(rotation_xyz(*pose.get("rotation_deg", [0.0, 0.0, 0.0])),
                               pose.get("translation", [0.0, 0.0, -100.0]))
        tgt = cfg.get("target", {})
        check_fields(tgt, {"nx", "ny", "spacing"}, "target")
        target = PlanarTarget.grid(int(tgt.get("nx", 20)), int(tgt.get("ny", 20)),
                                   float(tgt.get("spacing", 2.0)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"calib-study config: {exc}") from exc
    threshold = field(cfg, "threshold", float, 1.0)
    pix, norms = target_displacements(target, ext, intr)
    frac = distorted_fraction(target, ext, intr, threshold)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_rows(out / "points.csv", ["idx", "wx", "wy", "px", "py", "displacement"],
                [[i, repr(p[0]), repr(p[1]), repr(q[0]), repr(q[1]), repr(d)]
                 for i, (p, q, d) in enumerate(zip(target.points, pix, norms))])
    summary = {"distorted_percent": frac, "threshold_px": threshold,
               "n_points": len(norms), "max_displacement_px": float(norms.max())}
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    write_manifest(out, args, cfg, None)
    print(f"{frac:.3f}% of {len(norms)} points displaced by more than {threshold} px")
    return summary


# ---------------------------------------------------------------------------
# case-study

_CASE_FIELDS = {"images", "N", "T", "band_width", "bins", "y", "case", "backend", "seed"}


def cmd_case_study(args) -> dict:
    from .studies import case_sources, case_study, saturation_fixtures

    cfg = load_config(args.config)
    check_fields(cfg, _CASE_FIELDS)
    case = args.case if args.case is not None else field(cfg, "case", str, "baseline")
    try:
        case_sources(case)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    seed = args.seed if args.seed is not None else field(cfg, "seed", int, 0)
    backend = make_backend(args.backend or cfg.get("backend", "reference"))
    if cfg.get("images"):
        base = Path(args.config).parent
        images = {}
        for p in cfg["images"]:
            p = Path(p) if Path(p).is_absolute() else base / p
            images[p.stem] = load_frame(p)
    else:
        images = saturation_fixtures(seed)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = {"case": str(case), "sources": sorted(case_sources(case)), "images": {}}
    for name, image in images.items():
        res = case_study(image, backend, case, N=field(cfg, "N", int, 1000), seed=seed,
                         T=field(cfg, "T", int, 20), band_width=field(cfg, "band_width", int, 5),
                         y=field(cfg, "y", float, 8.069), bins=field(cfg, "bins", int, 50))
        dens = res.density()
        _write_rows(out / f"hist_{name}_case{res.case}.csv",
                    ["bin_lo", "bin_hi", "count", "density"],
                    [[repr(a), repr(b), int(c), repr(float(d))]
                     for a, b, c, d in zip(res.edges[:-1], res.edges[1:], res.counts, dens)])
        if args.svg:
            from .svg import histogram_svg

            histogram_svg(res.edges, res.counts, out / f"hist_{name}_case{res.case}.svg",
                          title=f"{name}, case {res.case}", xlabel="uncertainty [nats]")
        summary["images"][name] = {"mean": res.mean, "n_values": res.n_values,
                                   "n_draws": res.n_draws}
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    write_manifest(out, args, cfg, seed)
    for name, s in summary["images"].items():
        print(f"{name}: case {case} boundary-band mean {s['mean']:.6f} ({s['n_draws']} draws)")
    return summary


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slabuq", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help, config_required=False):
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", required=config_required, help="JSON config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", required=True, help="output directory (or file)")
        p.set_defaults(func=func)
        return p

    add("synth", cmd_synth, "render a synthetic burn sequence")
    p = add("propagate", cmd_propagate, "Monte-Carlo rate distribution", config_required=True)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--backend", default=None, help="reference | playback:<dir>")
    p.add_argument("--svg", action="store_true", help="also write histogram.svg")
    add("track", cmd_track, "track surface heights and rates from masks", config_required=True)
    p = add("perturb", cmd_perturb, "inject distortion and angle-shift uncertainty")
    p.add_argument("--input", required=True, help="frame file or directory")
    p.add_argument("--uc", type=float, default=0.0, help="distorted pixels, percent")
    p.add_argument("--ugamma", type=float, default=0.0, help="length error, percent")
    p.add_argument("--rho", type=float, default=None, help="pixel density, px/cm")
    p.add_argument("--mask", default=None, help="mask used to compute rho")
    p.add_argument("--y", type=float, default=8.069, help="fuel length, cm")
    add("calib-study", cmd_calib_study, "distorted-point statistic on a planar target")
    p = add("case-study", cmd_case_study, "boundary-band uncertainty histograms")
    p.add_argument("--case", default=None, help="baseline or 1..7")
    p.add_argument("--backend", default=None, help="reference | playback:<dir>")
    p.add_argument("--svg", action="store_true", help="also write SVG histograms")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
