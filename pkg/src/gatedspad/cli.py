"""Command-line front end.

Exit codes: 0 success, 2 configuration or input error, 3 runtime/model error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from gatedspad import __version__
from gatedspad.config import ConfigError, RunConfig, load_config
from gatedspad.detection import (
    detector_document,
    read_pilot_capture,
    write_detector,
    write_pilot_capture,
)
from gatedspad.errors import DegenerateConstellationError, DomainError, ModelError
from gatedspad.gating import trigger_probabilities
from gatedspad.simulation import (
    PHASE_PILOT,
    ExperimentConfig,
    draw_pilot_tallies,
    pmf_compare_rows,
    run_ser_experiment,
    stream,
)
from gatedspad.waveform import SymbolWaveformSet, make_waveform

log = logging.getLogger("gatedspad")

EXIT_CONFIG = 2
EXIT_RUNTIME = 3

PMF_COLUMNS = ("lambda_s", "k", "pmf_poibin", "pmf_binomial", "pmf_empirical")
SER_COLUMNS = (
    "sweep_value", "ser_proposed", "ser_conventional", "n_symbols",
    "ci95_proposed", "ci95_conventional",
)


class InputError(Exception):
    """Bad user input other than the config file (exit code 2)."""


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_manifest(path: Path, command: str, args, config: dict | None, seed, started, outputs):
    doc = {
        "tool": "gatedspad",
        "version": __version__,
        "command": command,
        "config_path": str(args.config) if getattr(args, "config", None) else None,
        "seed": seed,
        "config": config,
        "started_utc": started,
        "finished_utc": _now(),
        "outputs": [str(p) for p in outputs],
    }
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_pmf_compare(args) -> int:
    started = _now()
    cfg = load_config(args.config, args.seed)
    if cfg.lambda_s_values is None:
        raise ConfigError(f"{args.config}: missing required key 'lambda_s_values' "
                          "(or 'lambda_s_start'/'lambda_s_stop'/'lambda_s_steps')")
    out = _out_dir(args)
    rows = pmf_compare_rows(
        cfg.schedule, cfg.rates, cfg.lambda_s_values, waveform=cfg.waveform,
        n_draws=cfg.n_draws, seed=cfg.seed, conventional_model=cfg.conventional_model,
    )
    outputs = [out / "pmf.csv"]
    write_csv(outputs[0], PMF_COLUMNS, rows)
    if args.plot:
        from gatedspad.plotting import plot_pmf_compare

        outputs.append(out / "pmf.png")
        plot_pmf_compare(rows, outputs[-1])
    write_manifest(out / "pmf.manifest.json", "pmf-compare", args, cfg.echo(), cfg.seed,
                   started, outputs)
    return 0


def experiment_from(cfg: RunConfig, axis: str, path) -> ExperimentConfig:
    if axis == "intensity":
        sweep = cfg.lambda_s_values
        missing = "'lambda_s_values' (or 'lambda_s_start'/'lambda_s_stop'/'lambda_s_steps')"
    else:
        sweep = cfg.lambda_b_values
        missing = "'lambda_b_values' (or 'lambda_b_start'/'lambda_b_stop'/'lambda_b_steps')"
    if sweep is None:
        raise ConfigError(f"{path}: missing required key {missing} for the {axis} axis")
    return ExperimentConfig(
        schedule=cfg.schedule, rates=cfg.rates, lambda_s=cfg.lambda_s, coeffs=cfg.coeffs,
        waveform=cfg.waveform, pilot_k=cfg.pilot_k, n_symbols=cfg.n_symbols, axis=axis,
        sweep=tuple(sweep), seed=cfg.seed, conventional_model=cfg.conventional_model,
    )


def cmd_ser_sweep(args) -> int:
    started = _now()
    cfg = load_config(args.config, args.seed)
    exp = experiment_from(cfg, args.axis, args.config)
    workers = args.workers if args.workers is not None else cfg.workers
    out = _out_dir(args)
    results = run_ser_experiment(exp, workers=workers)
    outputs = [out / "ser.csv"]
    write_csv(outputs[0], SER_COLUMNS, [
        (r.sweep_value, r.ser_proposed, r.ser_conventional, r.n_symbols,
         r.ci95_proposed, r.ci95_conventional)
        for r in results
    ])
    if args.plot:
        from gatedspad.plotting import plot_ser

        outputs.append(out / "ser.png")
        plot_ser(results, args.axis, outputs[-1])
    echo = cfg.echo() | {"axis": args.axis, "sweep": list(exp.sweep)}
    write_manifest(out / "ser.manifest.json", "ser-sweep", args, echo, cfg.seed, started, outputs)
    return 0


def cmd_estimate(args) -> int:
    started = _now()
    try:
        counts, K = read_pilot_capture(args.pilots)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise InputError(f"{args.pilots}: invalid pilot capture: {exc}") from None
    echo = None
    if args.config:
        cfg = load_config(args.config)
        if counts.shape[1] != cfg.schedule.n_gates:
            raise InputError(f"{args.pilots}: capture has N={counts.shape[1]} gates, "
                             f"config n_gates={cfg.schedule.n_gates}")
        if counts.shape[0] != len(cfg.coeffs):
            raise InputError(f"{args.pilots}: capture has M={counts.shape[0]} symbols, "
                             f"config modulation_order={len(cfg.coeffs)}")
        echo = cfg.echo()
    out = _out_dir(args)
    doc = detector_document(counts, K)
    outputs = [out / "detector.json"]
    write_detector(outputs[0], doc)
    write_manifest(out / "detector.manifest.json", "estimate", args,
                   {"pilots": str(args.pilots), "M": doc["M"], "N": doc["N"], "K": K,
                    "run_config": echo},
                   None, started, outputs)
    return 0


def cmd_pilot_capture(args) -> int:
    started = _now()
    cfg = load_config(args.config, args.seed)
    s = cfg.schedule
    symbols = SymbolWaveformSet(make_waveform(cfg.waveform, cfg.lambda_s, s.T_s), cfg.coeffs)
    rng = stream(cfg.seed, 0, PHASE_PILOT)
    tallies = np.stack([
        draw_pilot_tallies(trigger_probabilities(w, s, cfg.rates), cfg.pilot_k, rng)
        for w in symbols
    ])
    out = _out_dir(args)
    outputs = [out / "pilots.json"]
    write_pilot_capture(outputs[0], tallies, cfg.pilot_k)
    write_manifest(out / "pilots.manifest.json", "pilot-capture", args, cfg.echo(), cfg.seed,
                   started, outputs)
    return 0


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gatedspad",
        description="Gated-SPAD photon-counting receiver simulator.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", type=Path, required=config_required,
                       help="key = value experiment configuration")
        p.add_argument("--out-dir", type=Path, default=Path("."), help="output directory")

    p = sub.add_parser("pmf-compare", help="Poisson binomial vs binomial vs simulated PMFs")
    common(p)
    p.add_argument("--seed", type=_u64, help="override the config seed")
    p.add_argument("--plot", action="store_true", help="also render pmf.png")
    p.set_defaults(func=cmd_pmf_compare)

    p = sub.add_parser("ser-sweep", help="SER of proposed and conventional detectors")
    common(p)
    p.add_argument("--seed", type=_u64, help="override the config seed")
    p.add_argument("--axis", choices=("intensity", "background"), default="intensity")
    p.add_argument("--workers", type=int, help="parallel sweep points (default: config)")
    p.add_argument("--plot", action="store_true", help="also render ser.png")
    p.set_defaults(func=cmd_ser_sweep)

    p = sub.add_parser("estimate", help="thresholds from a pilot capture file")
    common(p, config_required=False)
    p.add_argument("--pilots", type=Path, required=True, help="pilot capture JSON")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("pilot-capture", help="simulate a pilot capture file")
    common(p)
    p.add_argument("--seed", type=_u64, help="override the config seed")
    p.set_defaults(func=cmd_pilot_capture)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainError as exc:
        # pilot tallies and other user-supplied values fail validation here
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG if args.command == "estimate" else EXIT_RUNTIME
    except (ModelError, DegenerateConstellationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
