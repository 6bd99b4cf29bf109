"""Command-line runner: ``seqreadout <command> [--config PATH] [--out DIR] ...``.

Exit codes: 0 success, 2 configuration or input error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import io
from .config import ExperimentConfig, load
from .errors import ConfigError, NumericError, ValidationError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
COMMANDS = ("readout", "sweep", "release", "wigner", "calibrate", "selfcheck")

logger = logging.getLogger("seqreadout")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="seqreadout", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", metavar="PATH", help="key = value configuration file")
    ap.add_argument("--out", metavar="DIR", help="output directory (overrides run.output_dir)")
    ap.add_argument("--seed", type=int, help="random seed (overrides run.seed)")
    ap.add_argument("--threads", type=int, default=1, help="worker processes for sweeps")
    ap.add_argument("--format", choices=("csv", "csv+png"), default="csv", dest="fmt")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def resolve_config(args) -> ExperimentConfig:
    cfg = load(args.config) if args.config else ExperimentConfig()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.out is not None:
        changes["output_dir"] = args.out
    if args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    return replace(cfg, **changes) if changes else cfg


def _plt():
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        return plt
    except ImportError:
        logger.warning("matplotlib not available; skipping images")
        return None


def _png_map(path: Path, x, y, z, title: str, diverging: bool = False):
    plt = _plt()
    if plt is None:
        return
    fig, ax = plt.subplots(figsize=(4.5, 4))
    kw = {}
    if diverging:
        vmax = float(np.max(np.abs(z))) or 1.0
        kw = dict(cmap="RdBu_r", vmin=-vmax, vmax=vmax)
    im = ax.pcolormesh(x, y, np.asarray(z).T, shading="auto", **kw)
    fig.colorbar(im, ax=ax)
    ax.set_title(title)
    ax.set_aspect("equal")
    fig.savefig(path, dpi=100)
    plt.close(fig)


def cmd_readout(cfg: ExperimentConfig, out: Path, png: bool, threads: int) -> List[Path]:
    from .experiments import run_readout

    res = run_readout(cfg)
    files = [io.write_report(out / "readout_report.txt", res.report.to_dict())]
    for b, h in res.hist.items():
        files.append(io.write_histogram(out / f"histogram_{b}.csv", h))
        if png:
            _png_map(out / f"histogram_{b}.png", h.x_centers, h.y_centers, h.density,
                     f"P_{b}(beta)")
    files.append(io.write_beta_samples(out / "beta_samples.csv",
                                       {b: r.beta for b, r in res.runs.items()}))
    if res.chain is not None:
        files.append(io.write_weight(out / "weight.csv", res.chain.weight))
    return files


def cmd_sweep(cfg: ExperimentConfig, out: Path, png: bool, threads: int) -> List[Path]:
    from .experiments import sweep_overlap

    m = sweep_overlap(cfg, threads=threads)
    files = [io.write_matrix(out / "overlap_matrix.csv", "alpha0", cfg.sweep_alpha0,
                             "t_int_s", cfg.sweep_t_int, m)]
    if png:
        plt = _plt()
        if plt is not None:
            fig, ax = plt.subplots()
            for a, row in zip(cfg.sweep_alpha0, m):
                ax.plot(np.asarray(cfg.sweep_t_int) * 1e9, row, "o-", label=f"alpha0={a:g}")
            ax.set_xlabel("t_int (ns)")
            ax.set_ylabel("overlap")
            ax.legend()
            fig.savefig(out / "overlap_matrix.png", dpi=100)
            plt.close(fig)
    return files


def cmd_release(cfg: ExperimentConfig, out: Path, png: bool, threads: int) -> List[Path]:
    from .experiments import refit_release, release_trajectory, run_release_study

    table = run_release_study(cfg)
    files = [io.write_release_table(out / "release_table.csv", table),
             io.write_trajectory(out / "release_trajectory.csv", release_trajectory(cfg))]
    if cfg.release_refit:
        files.append(io.write_report(out / "release_refit.txt", refit_release(cfg, table)))
    if png:
        plt = _plt()
        if plt is not None:
            fig, ax = plt.subplots()
            for g in cfg.release_g_max:
                rows = [r for r in table if r["g_max_rad_per_s"] == g]
                ax.plot([r["sigma_s"] * 1e9 for r in rows],
                        [r["remaining_fraction"] for r in rows], "o-",
                        label=f"g_max/2pi={g / 2 / np.pi / 1e6:.2f} MHz")
            ax.set_xlabel("sigma (ns)")
            ax.set_ylabel("remaining fraction")
            ax.legend()
            fig.savefig(out / "release_table.png", dpi=100)
            plt.close(fig)
    return files


def cmd_wigner(cfg: ExperimentConfig, out: Path, png: bool, threads: int) -> List[Path]:
    from .experiments import run_wigner

    files = []
    for (b, t, m), wm in run_wigner(cfg).items():
        stem = f"wigner_{b}_{round(t * 1e9):d}ns_{m}"
        files.append(io.write_wigner(out / f"{stem}.csv", wm))
        if png:
            _png_map(out / f"{stem}.png", wm.x, wm.y, wm.values, stem, diverging=True)
    return files


def cmd_calibrate(cfg: ExperimentConfig, out: Path, png: bool, threads: int) -> List[Path]:
    from .experiments import run_calibrate

    report, curve, series = run_calibrate(cfg)
    return [io.write_report(out / "calibration_report.txt", report),
            io.write_decay_curve(out / "calibration_decay.csv", curve),
            io.write_detuning_series(out / "calibration_detuning.csv", series)]


def cmd_selfcheck(cfg: ExperimentConfig, out: Path, png: bool, threads: int) -> List[Path]:
    from .experiments import selfcheck

    checks = selfcheck()
    report = {}
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {float(np.real(detail))!r}")
        report[f"{name}.passed"] = ok
        report[f"{name}.value"] = float(np.real(detail))
    path = io.write_report(out / "selfcheck_report.txt", report)
    failed = [n for n, ok, _ in checks if not ok]
    if failed:
        raise NumericError("selfcheck failed: " + ", ".join(failed))
    return [path]


HANDLERS = {
    "readout": cmd_readout,
    "sweep": cmd_sweep,
    "release": cmd_release,
    "wigner": cmd_wigner,
    "calibrate": cmd_calibrate,
    "selfcheck": cmd_selfcheck,
}


def main(argv: Optional[List[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        files = HANDLERS[args.command](cfg, out, args.fmt == "csv+png", args.threads)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for f in files:
        print(f)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
