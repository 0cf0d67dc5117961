"""Command-line interface.

Each subcommand builds an ``ExperimentConfig``, runs the corresponding
pipeline, renders figures next to the delimited outputs (unless
``--no-plots``), and writes a manifest.  The exit code is 0 only when every
requested audit passed.

A ``--config FILE`` of ``key=value`` lines (keys matching the long flag
names, ``#`` comments allowed) supplies defaults; explicit flags win.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .concentration import DEFAULT_C, DEFAULT_CPRIME, DELTA_WINDOW, PLUGIN
from .harness import ExperimentConfig, run_experiment
from .models import CONSTANT_FIELD, SK


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in text.split(",") if tok.strip())


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.split(",") if tok.strip())


def _beta_range(text: str) -> tuple[float, ...]:
    """Parse START:STOP:STEP into an inclusive ladder, or a comma list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError(
                "expected START:STOP:STEP or a comma-separated list"
            )
        start, stop, step = map(float, parts)
        if step <= 0:
            raise argparse.ArgumentTypeError("STEP must be positive")
        betas = []
        b = start
        while b <= stop + 1e-12:
            betas.append(round(b, 12))
            b += step
        return tuple(betas)
    return _float_list(text)


def read_config_file(path: str) -> dict[str, str]:
    """Parse key=value lines; keys use the long flag spelling."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip().replace("-", "_")] = value.strip()
    return values


_PARSERS = {
    "ns": _int_list,
    "n": int,
    "beta": float,
    "betas": _beta_range,
    "h": float,
    "c": float,
    "cprime": float,
    "lambda0": float,
    "delta_window": float,
    "samples": int,
    "sweeps": int,
    "swap_interval": int,
    "chains": int,
    "thin": int,
    "replicas": int,
    "epsilons": _float_list,
    "lambdas": _float_list,
    "beta_prime": float,
    "epsilon": float,
    "seed": int,
    "enumeration_limit": int,
    "plots": lambda s: s.lower() not in ("0", "false", "no"),
}


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value file of defaults")
    p.add_argument("--seed", type=int, default=None, help="master seed")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--no-plots", action="store_true",
                   help="skip figure rendering")
    p.add_argument("--enumeration-limit", type=int, default=None,
                   help="largest N enumerated exactly")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="glasslab",
        description="Exact and Monte Carlo audits of disordered-spin "
                    "Gibbs measures.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exact", help="enumerate the Gibbs measure")
    p.add_argument("--model", choices=[SK, CONSTANT_FIELD], default=SK)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--h", type=float, default=None)
    _add_common(p)

    p = sub.add_parser("concentration",
                       help="free-energy concentration-set audit")
    p.add_argument("--model", choices=[SK, CONSTANT_FIELD], default=SK)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--h", type=float, default=None)
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--cprime", type=float, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--eref", default=None,
                   help="'plugin' or an explicit reference energy density")
    _add_common(p)

    p = sub.add_parser("audit", help="tail, moment, or restriction audits")
    p.add_argument("--kind", choices=["tail", "moment", "sandwich"],
                   required=True)
    p.add_argument("--model", choices=[SK, CONSTANT_FIELD], default=SK)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--h", type=float, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--eref", default=None)
    p.add_argument("--epsilons", type=_float_list, default=None,
                   help="comma-separated epsilon grid (tail)")
    p.add_argument("--lambdas", type=_float_list, default=None,
                   help="comma-separated lambda grid (tail)")
    p.add_argument("--lambda0", type=float, default=None,
                   help="base lambda (moment)")
    p.add_argument("--delta-window", type=float, default=None)
    p.add_argument("--beta-prime", type=float, default=None,
                   help="second temperature (sandwich)")
    p.add_argument("--epsilon", type=float, default=None,
                   help="window half-width (sandwich)")
    _add_common(p)

    p = sub.add_parser("gg", help="overlap replica-identity audit")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--replicas", type=int, default=None)
    p.add_argument("--phi", default=None,
                   help="overlap observable id (one, r2, abs_r, r4)")
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--mode", choices=["exact", "mc", "auto"], default=None)
    p.add_argument("--sweeps", type=int, default=None)
    _add_common(p)

    p = sub.add_parser("sample", help="parallel-tempering Monte Carlo run")
    p.add_argument("--model", choices=[SK, CONSTANT_FIELD], default=SK)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--h", type=float, default=None)
    p.add_argument("--betas", type=_beta_range, default=None,
                   help="ladder as START:STOP:STEP or a comma list")
    p.add_argument("--sweeps", type=int, default=None)
    p.add_argument("--swap-interval", type=int, default=None)
    p.add_argument("--chains", type=int, default=None)
    p.add_argument("--mode", choices=["exact", "mc", "auto"], default=None)
    _add_common(p)

    p = sub.add_parser("sweep", help="system-size trend tables")
    p.add_argument("--ns", type=_int_list, default=None,
                   help="comma-separated system sizes")
    p.add_argument("--model", choices=[SK, CONSTANT_FIELD], default=SK)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--h", type=float, default=None)
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--cprime", type=float, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--eref", default=None)
    p.add_argument("--replicas", type=int, default=None)
    p.add_argument("--phi", default=None)
    _add_common(p)

    return parser


_DEFAULTS = {
    "beta": 1.0,
    "h": 1.0,
    "c": DEFAULT_C,
    "cprime": DEFAULT_CPRIME,
    "lambda0": 0.2,
    "delta_window": DELTA_WINDOW,
    "samples": 1,
    "sweeps": 2000,
    "swap_interval": 10,
    "chains": 2,
    "replicas": 2,
    "phi": "r2",
    "mode": "auto",
    "eref": PLUGIN,
    "epsilons": (0.1, 0.2),
    "lambdas": (0.05, 0.1),
    "beta_prime": 0.9,
    "epsilon": 0.1,
    "seed": 0,
    "out": "out",
}


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    """Merge precedence: built-in defaults < config file < explicit flags."""
    merged = dict(_DEFAULTS)
    if getattr(args, "config", None):
        for key, raw in read_config_file(args.config).items():
            merged[key] = _PARSERS[key](raw) if key in _PARSERS else raw
    for key, value in vars(args).items():
        if key in ("config", "no_plots") or value is None:
            continue
        merged[key] = value
    if "ns" not in merged:
        merged["ns"] = (merged.pop("n"),) if "n" in merged else ()
    merged.pop("n", None)
    if args.no_plots:
        merged["plots"] = False
    merged.setdefault("enumeration_limit",
                      ExperimentConfig.enumeration_limit)
    fields = ExperimentConfig.__dataclass_fields__
    unknown = [k for k in merged if k not in fields]
    if unknown:
        raise ValueError(f"unknown configuration keys: {sorted(unknown)}")
    return ExperimentConfig(**merged)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
        manifest = run_experiment(config)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    status = "pass" if manifest.all_passed else "FAIL"
    print(f"{config.command}: {status} "
          f"({len(manifest.file_hashes)} data files in {config.out})")
    return 0 if manifest.all_passed else 1


if __name__ == "__main__":
    sys.exit(main())
