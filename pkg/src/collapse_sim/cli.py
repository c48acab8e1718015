"""Command-line entry point.

Subcommands: ``run``, ``spectrum``, ``conformance``, ``walk-oracle``.
Every subcommand accepts ``--config FILE``, a ``key = value`` file whose
keys are flag names without the leading dashes; flags given on the command
line override it. Exit codes: 0 success, 1 conformance failure, 2 usage or
validation error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field

from .conformance import CHECKS, ConformanceConfig, run_checks
from .ensemble import RunConfig, run_ensemble
from .io import dumps_json, reports_to_json, series_csv, spectrum_csv, stats_to_dict, write_text
from .spectral import asymptotic_selection_time, build_stat_matrix, eigen_spectrum
from .state import FluctuationParams
from .walk import absorption_oracle, combined_scheme, generic_scheme

__all__ = ["main", "build_parser", "read_config_file", "ExperimentConfig", "UsageError"]


class UsageError(Exception):
    """Invalid input; reported on stderr with exit code 2."""


@dataclass
class ExperimentConfig:
    """Merged options for one subcommand (file values, then flags)."""

    command: str
    options: dict = field(default_factory=dict)
    out: str = "-"
    fmt: str = "json"


def _floats(text: str) -> tuple:
    try:
        return tuple(float(t) for t in str(text).split(",") if t.strip())
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> tuple:
    try:
        return tuple(int(t) for t in str(text).split(",") if t.strip())
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None


# flag name -> (converter, default); None default means required
_RUN_OPTS = {
    "weights": (_floats, None),
    "phases": (_floats, ""),
    "epsilon": (float, None),
    "tau": (float, 1.0),
    "trajectories": (int, 1000),
    "seed": (int, 0),
    "max-steps": (int, 10**6),
    "record-every": (int, 0),
    "workers": (int, 0),
    "phase-dist": (str, "three-point"),
}
_SPECTRUM_OPTS = {
    "epsilon": (float, None),
    "tau": (float, 1.0),
}
_CONF_OPTS = {
    "check": (str, "all"),
    "weights": (_floats, (0.3, 0.7)),
    "phases": (_floats, ""),
    "epsilon": (float, 0.1),
    "tau": (float, 1.0),
    "trajectories": (int, 100_000),
    "seed": (int, 7),
    "max-steps": (int, 10**6),
    "workers": (int, 0),
    "pair": (_ints, (0, 1)),
    "walk-x": (float, 0.5),
    "start": (float, 0.3),
    "phase-dist": (str, "three-point"),
}
_WALK_OPTS = {
    "epsilon": (float, None),
    "start": (float, None),
    "q": (float, ""),
}
_OPTS = {
    "run": (_RUN_OPTS, ("csv", "json"), "json"),
    "spectrum": (_SPECTRUM_OPTS, ("csv",), "csv"),
    "conformance": (_CONF_OPTS, ("json", "text"), "text"),
    "walk-oracle": (_WALK_OPTS, ("text",), "text"),
}


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; '#' starts a comment."""
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from None
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("_", "-")] = value
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="collapse-sim", description="Norm-fluctuation collapse simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "run": "simulate an ensemble of trajectories",
        "spectrum": "eigenvalues and relaxation times of the statistical matrix",
        "conformance": "run conformance checks",
        "walk-oracle": "exact absorption probability of the weight walk",
    }
    for name, (opts, formats, _) in _OPTS.items():
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", help="key = value file; flags override it")
        for flag in opts:
            if flag == "check":
                p.add_argument("--check", choices=[*CHECKS, "all"], default=None)
            else:
                p.add_argument(f"--{flag}", default=None)
        p.add_argument("--out", default=None, help="output path ('-' for stdout)")
        p.add_argument("--format", choices=formats, default=None)
    return parser


def _merge(args: argparse.Namespace) -> ExperimentConfig:
    opts, formats, default_fmt = _OPTS[args.command]
    raw = read_config_file(args.config) if args.config else {}
    unknown = set(raw) - set(opts) - {"out", "format"}
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for key in opts:
        cli = getattr(args, key.replace("-", "_"))
        if cli is not None:
            raw[key] = cli
    merged = {}
    for key, (conv, default) in opts.items():
        if key in raw:
            try:
                merged[key] = conv(raw[key])
            except ValueError:
                raise UsageError(f"--{key}: invalid value {raw[key]!r}") from None
        elif default is None:
            raise UsageError(f"missing required option --{key}")
        else:
            merged[key] = default
    out = args.out if args.out is not None else raw.get("out", "-")
    fmt = args.format or raw.get("format")
    if fmt is None:
        fmt = "csv" if str(out).endswith(".csv") and "csv" in formats else default_fmt
    if fmt not in formats:
        raise UsageError(f"--format must be one of {formats}, got {fmt!r}")
    if args.command == "conformance" and merged["check"] not in (*CHECKS, "all"):
        raise UsageError(f"unknown check {merged['check']!r}")
    return ExperimentConfig(args.command, merged, out, fmt)


def _phases(cfg: ExperimentConfig):
    ph = cfg.options["phases"]
    return ph if ph else None


def cmd_run(cfg: ExperimentConfig) -> int:
    o = cfg.options
    params = FluctuationParams(o["epsilon"], o["tau"], o["phase-dist"], o["seed"])
    run = RunConfig(
        weights=o["weights"],
        phases=_phases(cfg),
        params=params,
        n_trajectories=o["trajectories"],
        max_steps=o["max-steps"],
        record_every=o["record-every"],
        worker_count=o["workers"],
    )
    stats = run_ensemble(run)
    # worker count is excluded so outputs do not depend on it
    record = {k: v for k, v in o.items() if k != "workers"}
    if cfg.fmt == "json":
        text = dumps_json(stats_to_dict(stats, record))
    else:
        text = series_csv(stats)
    write_text(cfg.out, text)
    if cfg.out != "-":
        freqs = ", ".join(f"{f:.4f}" for f in stats.survival_frequencies)
        print(f"trajectories {stats.n_trajectories}, unresolved {stats.unresolved}")
        print(f"survival frequencies: {freqs}")
        print(f"mean collapse time: {stats.mean_collapse_time:.6g} steps")
    return 0


def cmd_spectrum(cfg: ExperimentConfig) -> int:
    o = cfg.options
    if not o["tau"] > 0.0:
        raise UsageError(f"tau must be > 0, got {o['tau']}")
    result = eigen_spectrum(build_stat_matrix(o["epsilon"]), o["tau"])
    write_text(cfg.out, spectrum_csv(result, asymptotic_selection_time(o["epsilon"], o["tau"])))
    return 0


def cmd_conformance(cfg: ExperimentConfig) -> int:
    o = cfg.options
    conf = ConformanceConfig(
        epsilon=o["epsilon"],
        tau=o["tau"],
        weights=o["weights"],
        phases=_phases(cfg),
        n_samples=o["trajectories"],
        seed=o["seed"],
        max_steps=o["max-steps"],
        pair=o["pair"],
        walk_x=o["walk-x"],
        start=o["start"],
        phase_dist=o["phase-dist"],
        worker_count=o["workers"],
    )
    reports = run_checks(conf, [o["check"]])
    record = {k: v for k, v in o.items() if k != "workers"}
    if cfg.fmt == "json":
        text = reports_to_json(reports, record)
    else:
        text = "".join(r.to_text() + "\n" for r in reports)
        ok = all(r.passed for r in reports)
        text += f"overall: {'PASS' if ok else 'FAIL'}\n"
    write_text(cfg.out, text)
    return 0 if all(r.passed for r in reports) else 1


def cmd_walk_oracle(cfg: ExperimentConfig) -> int:
    o = cfg.options
    eps, x0 = o["epsilon"], o["start"]
    if o["q"] == "":
        scheme = combined_scheme(eps)
    else:
        q = o["q"]
        if not (0.0 <= q < 1.0):
            raise UsageError(f"--q must lie in [0, 1), got {q}")
        scheme = generic_scheme(eps, lambda x, q=q: q)
    w = absorption_oracle(scheme, x0)
    write_text(cfg.out, f"absorption_probability={w!r}\ndeviation={abs(w - x0)!r}\n")
    return 0


_COMMANDS = {
    "run": cmd_run,
    "spectrum": cmd_spectrum,
    "conformance": cmd_conformance,
    "walk-oracle": cmd_walk_oracle,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # argparse exits 2 on bad flags
    try:
        cfg = _merge(args)
        return _COMMANDS[cfg.command](cfg)
    except (UsageError, ValueError) as exc:
        print(f"collapse-sim {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
