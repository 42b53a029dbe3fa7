"""Command-line entry point: ``optolink <subcommand> [--config F] [--seed N] [--out DIR]``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from typing import Sequence

import numpy as np

from ..cdr import AcquisitionError
from ..metrics import CalibrationError, InsufficientStatistics
from . import experiments as ex
from .config import ConfigError, LinkConfig, load_config
from .emit import emit_outputs

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ACQUISITION = 3
EXIT_STATISTICS = 4


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file (defaults if omitted)")
    common.add_argument("--seed", type=int, help="override link.seed")
    common.add_argument("--out", default="out", help="output directory (default: out)")

    p = argparse.ArgumentParser(prog="optolink", description="PAM-4 cryogenic optical link simulator")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("run", parents=[common], help="end-to-end closed-loop BER run")
    s.add_argument("--symbols", type=int, default=100_000)

    s = sub.add_parser("bathtub", parents=[common], help="external-clock BER bathtub per OMA")
    s.add_argument("--oma", type=_floats, default=[-1.0, 1.0], help="comma-separated OMA list, dBm")
    s.add_argument("--target-ber", type=float, default=1e-8)
    s.add_argument("--symbols", type=int, default=100_000)
    s.add_argument("--phases", type=int, default=41)
    s.add_argument("--mode", choices=("extrapolated", "counted"), default="extrapolated")

    s = sub.add_parser("eye", parents=[common], help="eye raster at one stage")
    s.add_argument("--stage", default="tx_optical", choices=("drive", "tx_optical", "rx_optical", "photocurrent", "rx_electrical"))
    s.add_argument("--symbols", type=int, default=4000)
    s.add_argument("--bins", type=int, default=64)

    s = sub.add_parser("oma-sweep", parents=[common], help="closed-loop counted BER against OMA")
    s.add_argument("--oma", type=_floats, default=[-9.0, -7.0, -5.0, -3.0, -1.0])
    s.add_argument("--symbols", type=int, default=100_000)

    s = sub.add_parser("qdemo", parents=[common], help="Gaussian envelope transport and Rabi sweep")
    s.add_argument("--amplitudes", type=int, default=17, help="number of amplitudes in [0, 1]")
    s.add_argument("--sigma", type=float, default=8.0, help="envelope rms width, samples")
    s.add_argument("--induced-ber", type=float, default=None)

    sub.add_parser("budget", parents=[common], help="energy per bit and heat-load tables")

    s = sub.add_parser("calibrate", parents=[common], help="fit the front-end noise density")
    s.add_argument("--oma", type=float, default=ex.CALIBRATION_TARGET[0])
    s.add_argument("--opening", type=float, default=ex.CALIBRATION_TARGET[1])
    s.add_argument("--target-ber", type=float, default=ex.CALIBRATION_TARGET[2])
    s.add_argument("--symbols", type=int, default=100_000)
    return p


def _run(args: argparse.Namespace, cfg: LinkConfig) -> ex.ExperimentResult:
    cmd = args.command
    if cmd == "run":
        return ex.experiment_e2e(cfg, args.symbols)
    if cmd == "bathtub":
        phases = tuple(float(v) for v in np.linspace(-0.5, 0.5, args.phases))
        return ex.experiment_bathtub(cfg, args.oma, args.target_ber, args.symbols, phases, args.mode)
    if cmd == "eye":
        return ex.experiment_eye(cfg, args.stage, args.symbols, args.bins, args.bins)
    if cmd == "oma-sweep":
        return ex.experiment_oma_sweep(cfg, args.oma, args.symbols)
    if cmd == "qdemo":
        amps = tuple(float(a) for a in np.linspace(0.0, 1.0, args.amplitudes))
        return ex.demo_quantum_control(cfg, amps, args.sigma, args.induced_ber)
    if cmd == "budget":
        return ex.experiment_budget(cfg)
    if cmd == "calibrate":
        return ex.experiment_calibrate(cfg, (args.oma, args.opening, args.target_ber), args.symbols)
    raise AssertionError(cmd)


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        result = _run(args, cfg)
    except (ConfigError, CalibrationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AcquisitionError as exc:
        print(f"acquisition failure: {exc}", file=sys.stderr)
        return EXIT_ACQUISITION
    except InsufficientStatistics as exc:
        print(f"insufficient statistics: {exc}", file=sys.stderr)
        return EXIT_STATISTICS
    except ValueError as exc:
        # an argument combination the models reject, e.g. too few symbols to train a slicer
        print(f"invalid arguments: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for path in emit_outputs(result, args.out, cfg):
        print(path)
    for k, v in result.summary.items():
        print(f"{k} = {v}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
