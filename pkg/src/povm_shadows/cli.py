"""Command line interface.

    povm-shadows <subcommand> [flags]

Flags mirror ExperimentConfig fields; --config loads a key=value file
first and explicit flags override it.  Exit codes: 0 success, 2 bad
configuration or arguments, 3 numerical failure (singular channel,
invalid POVM, degenerate solve).
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .channel import ChannelInversionError, InformationallyIncompleteError
from .experiments import (
    ConfigError,
    ExperimentConfig,
    run_estimate,
    run_fidelity,
    run_ghz_correlators,
    run_heisenberg,
    run_ising,
    run_max_error_scaling,
    run_plan_samples,
    run_sample,
    run_validate_povm,
    _write_atomic,
)

_FLAGS = {
    "povm": dict(help="built-in POVM name or file:<path> (comma list where relevant)"),
    "state": dict(help="state spec: ghz:N, down:N, up:N, mps:<path>, tfim:..., heisenberg:..."),
    "noise": dict(help="noise spec: none, dep:q or ad:gamma"),
    "samples": dict(type=int, help="number of shadow records"),
    "runs": dict(type=int, help="independent repetitions"),
    "seed": dict(type=int, help="base seed; per-run seeds are derived from it"),
    "out": dict(help="output path (omit to print to stdout)"),
    "method": dict(help="estimator: mean, mom or mom:<batches>"),
    "observable": dict(help="Pauli string, e.g. 'z0 z5' or '1.5 * x0 y1'"),
    "ensemble": dict(help="path of a saved shadow ensemble"),
    "epsilon": dict(type=float, help="target additive accuracy"),
    "delta": dict(type=float, help="allowed failure probability"),
    "observables": dict(type=int, help="number of observables the budget must cover"),
    "locality": dict(type=int, help="Pauli weight k the budget must cover"),
    "p_grid": dict(help="comma list of local depolarizing strengths p"),
    "pairs": dict(help="which site pairs: first (0,j) or all"),
    "sample_grid": dict(help="comma list of sample counts"),
    "sizes": dict(help="comma list of qubit counts"),
}

_SUBCOMMANDS = {
    "validate-povm": (
        run_validate_povm,
        ["povm", "out"],
        "check POVM validity (exit 3 and print violations if invalid)",
    ),
    "sample": (
        run_sample,
        ["povm", "state", "noise", "samples", "seed", "out"],
        "sample a shadow ensemble to a file (.csv extension exports text)",
    ),
    "estimate": (
        run_estimate,
        ["ensemble", "observable", "method", "state", "povm", "out"],
        "estimate one Pauli observable from a saved ensemble",
    ),
    "plan-samples": (
        run_plan_samples,
        ["povm", "noise", "epsilon", "delta", "observables", "locality", "out"],
        "Hoeffding sample budget for k-local Pauli estimates",
    ),
    "ghz-correlators": (
        run_ghz_correlators,
        ["povm", "state", "samples", "runs", "seed", "p_grid", "pairs", "out"],
        "GHZ pair correlators under local depolarizing preparation noise",
    ),
    "max-error-scaling": (
        run_max_error_scaling,
        ["povm", "state", "runs", "seed", "sample_grid", "out"],
        "worst pair-correlator error vs sample count, per POVM and state",
    ),
    "ising": (
        run_ising,
        ["povm", "state", "samples", "seed", "out"],
        "shadow vs exact pair correlators for transverse-field Ising ground states",
    ),
    "heisenberg": (
        run_heisenberg,
        ["povm", "state", "samples", "seed", "out"],
        "shadow vs exact pair correlators for a disordered Heisenberg ground state",
    ),
    "fidelity": (
        run_fidelity,
        ["povm", "sizes", "sample_grid", "runs", "seed", "method", "out"],
        "raw and projected GHZ fidelities vs qubit and sample count",
    ),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="povm-shadows",
        description="classical shadows with informationally complete product POVMs",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, flag_names, help_text) in _SUBCOMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="key = value config file; flags override it")
        for flag in flag_names:
            p.add_argument(f"--{flag.replace('_', '-')}", default=None, **_FLAGS[flag])
        if name == "ghz-correlators":
            p.add_argument("--all-pairs", action="store_true",
                           help="shorthand for --pairs all (default is pairs (0, j))")
    return parser


def _build_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if args.config:
        cfg.update_from_file(args.config)
    for name in vars(args):
        if name in ("command", "config", "all_pairs"):
            continue
        value = getattr(args, name)
        if value is not None:
            setattr(cfg, name, value)
    if getattr(args, "all_pairs", False):
        cfg.pairs = "all"
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:  # argparse exits 2 on bad flags, 0 on --help
        return int(err.code or 0)
    runner = _SUBCOMMANDS[args.command][0]
    try:
        cfg = _build_config(args)
        if runner is run_validate_povm:
            text, ok = runner(cfg)
            _deliver(cfg.out, text)
            return 0 if ok else 3
        text = runner(cfg)
        _deliver(cfg.out if runner is not run_sample else "", text)
        return 0
    except (InformationallyIncompleteError, ChannelInversionError, ArithmeticError,
            np.linalg.LinAlgError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except (ConfigError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


def _deliver(out: str, text: str) -> None:
    if out:
        _write_atomic(out, text)
    else:
        sys.stdout.write(text)


if __name__ == "__main__":
    sys.exit(main())
