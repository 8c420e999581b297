"""Command-line front end.

Subcommands
-----------
``trial``              one seeded lattice, prints the verdict as JSON
``sweep``              checkpointed failure-rate sweep, writes ``<out>.jsonl`` and ``<out>.txt``
``fit-threshold``      crossing fit per swap probability from a sweep table or checkpoint
``fit-scaling``        below-threshold scaling-law fit
``verify-identities``  circuit-identity deviations

Exit codes: 0 success, 2 configuration error, 3 runtime error, 4 no crossing
in a threshold fit.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .fitting import InsufficientDataError, NoCrossingError, fit_scaling, fit_threshold
from .gaussian import StatePrepConfig, verify_identities
from .montecarlo import (
    WORKERS_ENV,
    TrialConfig,
    read_records,
    read_table,
    rows_from_records,
    run_trial,
    sweep,
    write_table,
)
from .noise import NOISE_UNITS, noise_convert

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_NO_CROSSING = 0, 2, 3, 4
SUBCOMMANDS = ("trial", "sweep", "fit-threshold", "fit-scaling", "verify-identities")
IDENTITY_TOL = 1e-12


class ConfigError(ValueError):
    """Invalid, contradictory or unreadable configuration."""


@dataclass
class RunConfig:
    """Validated settings of one CLI invocation.

    ``epsilons`` is the expanded noise grid: either given directly or built
    from the product of ``db`` and ``eta`` grids.
    """

    subcommand: str
    distances: list[int] = field(default_factory=lambda: [3])
    epsilons: list[float] = field(default_factory=list)
    prep: str = "iid"
    p_swaps: list[float] = field(default_factory=lambda: [0.0])
    n_trials: int = 1000
    seed: int = 0
    workers: int = 1
    out: Path | None = None
    input: Path | None = None
    noise_units: str = "vacuum"
    trial_index: int = 0
    knn: int | None = None

    @property
    def preps(self) -> list[StatePrepConfig]:
        if self.prep == "fixed_one_gkp":
            return [StatePrepConfig("fixed_one_gkp")]
        return [StatePrepConfig("iid", p) for p in self.p_swaps]


# keys accepted in a config file, mapped to the flag destinations
CONFIG_KEYS = {"subcommand", "distances", "epsilon", "db", "eta", "prep", "p_swap", "trials", "seed", "workers",
               "out", "input", "noise_units", "trial_index", "knn"}


def load_config_file(path) -> dict:
    """Read a JSON or YAML mapping; unknown keys are rejected."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        if path.suffix.lower() in (".yaml", ".yml"):
            import yaml

            data = yaml.safe_load(text)
        else:
            data = json.loads(text)
    except Exception as exc:  # parser-specific exception types
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a mapping")
    data = {k.replace("-", "_"): v for k, v in data.items()}
    unknown = set(data) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return data


def _as_list(v, cast):
    if v is None:
        return None
    if isinstance(v, str):
        v = [x for x in v.replace(",", " ").split() if x]
    if not isinstance(v, (list, tuple)):
        v = [v]
    try:
        return [cast(x) for x in v]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad list value {v!r}: {exc}") from exc


def _check_writable(path: Path) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {path.parent}: {exc}") from exc
    if not os.access(path.parent, os.W_OK) or (path.exists() and not os.access(path, os.W_OK)):
        raise ConfigError(f"output path {path} is not writable")


def parse_config(args: argparse.Namespace | dict) -> RunConfig:
    """Merge a config file with flags (flags win) and validate.

    Parameters
    ----------
    args : argparse.Namespace or dict
        Parsed flags; ``None`` values mean "not given". ``config`` names an
        optional JSON/YAML file.

    Raises
    ------
    ConfigError
        Malformed file, unknown keys, contradictory grids, invalid values or an
        unwritable output path.
    """
    flags = dict(vars(args)) if isinstance(args, argparse.Namespace) else dict(args)
    merged = load_config_file(flags["config"]) if flags.get("config") else {}
    for k, v in flags.items():
        if k != "config" and v is not None:
            merged[k] = v
    sub = merged.get("subcommand")
    if sub not in SUBCOMMANDS:
        raise ConfigError(f"subcommand must be one of {SUBCOMMANDS}, got {sub!r}")

    cfg = RunConfig(sub)
    if merged.get("distances") is not None:
        cfg.distances = _as_list(merged["distances"], int)
    eps = _as_list(merged.get("epsilon"), float)
    dbs = _as_list(merged.get("db"), float)
    etas = _as_list(merged.get("eta"), float)
    if eps is not None and (dbs is not None or etas is not None):
        raise ConfigError("give either an epsilon grid or a dB/eta grid, not both")
    try:
        if eps is not None:
            cfg.epsilons = eps
        elif dbs is not None or etas is not None:
            cfg.epsilons = [noise_convert(db, eta).epsilon for db in (dbs or [math.inf]) for eta in (etas or [1.0])]
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    prep = str(merged.get("prep", "iid")).replace("-", "_")
    if prep not in ("iid", "fixed_one_gkp"):
        raise ConfigError(f"prep must be iid or fixed-one-gkp, got {merged.get('prep')!r}")
    cfg.prep = prep
    if merged.get("p_swap") is not None:
        cfg.p_swaps = _as_list(merged["p_swap"], float)
        if prep == "fixed_one_gkp" and any(p != 0.0 for p in cfg.p_swaps):
            raise ConfigError("p_swap cannot be combined with fixed-one-gkp preparation")
    for key, attr in (("trials", "n_trials"), ("seed", "seed"), ("trial_index", "trial_index")):
        if merged.get(key) is not None:
            setattr(cfg, attr, int(merged[key]))
    if merged.get("knn") is not None:
        cfg.knn = int(merged["knn"])
    if merged.get("workers") is not None:
        cfg.workers = int(merged["workers"])
    elif os.environ.get(WORKERS_ENV):
        cfg.workers = int(os.environ[WORKERS_ENV])
    cfg.noise_units = str(merged.get("noise_units", "vacuum"))
    if merged.get("out") is not None:
        cfg.out = Path(merged["out"])
    if merged.get("input") is not None:
        cfg.input = Path(merged["input"])

    # validation
    if cfg.noise_units not in NOISE_UNITS:
        raise ConfigError(f"noise units must be one of {NOISE_UNITS}")
    if not cfg.distances or any(d < 2 for d in cfg.distances):
        raise ConfigError("distances must be a non-empty list of integers >= 2")
    if any(not (e >= 0 and math.isfinite(e)) for e in cfg.epsilons):
        raise ConfigError("epsilon values must be finite and non-negative")
    if any(not 0.0 <= p <= 1.0 for p in cfg.p_swaps) or not cfg.p_swaps:
        raise ConfigError("p_swap values must lie in [0, 1]")
    if cfg.n_trials < 1 or cfg.seed < 0 or cfg.workers < 1 or cfg.trial_index < 0:
        raise ConfigError("trials and workers must be >= 1, seed and trial index >= 0")
    if sub in ("trial", "sweep") and not cfg.epsilons:
        raise ConfigError(f"{sub} needs --epsilon or --db/--eta")
    if sub in ("fit-threshold", "fit-scaling"):
        if cfg.input is None:
            raise ConfigError(f"{sub} needs --input (sweep table or checkpoint)")
        if not cfg.input.exists():
            raise ConfigError(f"input {cfg.input} does not exist")
    if sub == "sweep" and cfg.out is None:
        raise ConfigError("sweep needs --out")
    if cfg.out is not None:
        _check_writable(cfg.out)
    return cfg


# --------------------------------------------------------------------------
# execution
# --------------------------------------------------------------------------


def _emit(obj, out: Path | None, suffix: str) -> None:
    text = json.dumps(obj, sort_keys=True)
    print(text)
    if out is not None:
        path = out.with_name(out.name + suffix)
        path.write_text(text + "\n")


def load_rows(path: Path):
    """Sweep rows from a checkpoint (``.jsonl``) or a columnar table."""
    if path.suffix == ".jsonl":
        return rows_from_records(read_records(path))
    return read_table(path)


def _run_trial(cfg: RunConfig) -> int:
    tc = TrialConfig(cfg.distances[0], cfg.epsilons[0], cfg.preps[0], cfg.seed, cfg.trial_index, cfg.knn,
                     cfg.noise_units)
    res = run_trial(tc)
    _emit({"d": tc.d, "epsilon": tc.epsilon, "prep": tc.prep.kind, "p_swap": tc.prep.p_swap, "seed": tc.seed,
           "trial": tc.trial, "noise_units": tc.noise_units, **asdict(res)}, cfg.out, ".json")
    return EXIT_OK


def _run_sweep(cfg: RunConfig) -> int:
    def progress(row):
        print(json.dumps(asdict(row)), flush=True)

    rows = sweep(cfg.distances, cfg.epsilons, cfg.preps, cfg.n_trials, seed=cfg.seed,
                 checkpoint=cfg.out.with_name(cfg.out.name + ".jsonl"), workers=cfg.workers, knn=cfg.knn,
                 progress=progress, noise_units=cfg.noise_units)
    write_table(rows, cfg.out.with_name(cfg.out.name + ".txt"))
    return EXIT_OK


def _groups(rows):
    out: dict[tuple[str, float], list] = {}
    for r in rows:
        out.setdefault((r.prep, r.p_swap), []).append(r)
    return out


def _run_fit_threshold(cfg: RunConfig) -> int:
    rows = load_rows(cfg.input)
    reports = []
    for (prep, p), group in sorted(_groups(rows).items()):
        fit = fit_threshold(group)
        reports.append({"prep": prep, "p_swap": p, "epsilon_th": fit.epsilon_th, "stderr": fit.stderr,
                        "nu": fit.nu, "A": fit.A, "B": fit.B, "C": fit.C, "t_p": fit.t_p,
                        "crossing_guess": fit.crossing_guess, "n_points": fit.n_points})
    for rep in reports:
        print(json.dumps(rep, sort_keys=True))
    if cfg.out is not None:
        with open(cfg.out.with_name(cfg.out.name + ".jsonl"), "w") as fh:
            for rep in reports:
                fh.write(json.dumps(rep, sort_keys=True) + "\n")
        with open(cfg.out.with_name(cfg.out.name + ".txt"), "w") as fh:
            fh.write("# prep p_swap epsilon_th stderr nu t_p\n")
            for rep in reports:
                fh.write(f"{rep['prep']} {rep['p_swap']!r} {rep['epsilon_th']!r} {rep['stderr']!r} "
                         f"{rep['nu']!r} {rep['t_p']!r}\n")
    return EXIT_OK


def _run_fit_scaling(cfg: RunConfig) -> int:
    rows = load_rows(cfg.input)
    p_swap = cfg.p_swaps[0] if len(cfg.p_swaps) == 1 else None
    fit = fit_scaling(rows, p_swap=p_swap)
    _emit({"p_swap": p_swap, **asdict(fit.params), "epsilon_th": fit.params.epsilon_th, "n_points": fit.n_points,
           "cost": fit.cost}, cfg.out, ".json")
    return EXIT_OK


def _run_verify(cfg: RunConfig) -> int:
    dev = verify_identities()
    ok = max(dev.values()) < IDENTITY_TOL
    _emit({"deviations": dev, "tolerance": IDENTITY_TOL, "ok": ok}, cfg.out, ".json")
    return EXIT_OK if ok else EXIT_RUNTIME


_HANDLERS = {"trial": _run_trial, "sweep": _run_sweep, "fit-threshold": _run_fit_threshold,
             "fit-scaling": _run_fit_scaling, "verify-identities": _run_verify}


def execute(cfg: RunConfig) -> int:
    """Run a validated configuration and map failures onto exit codes."""
    try:
        return _HANDLERS[cfg.subcommand](cfg)
    except NoCrossingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_CROSSING
    except (InsufficientDataError, ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON or YAML file with default values (flags override)")
    common.add_argument("--distances", help="code distances, e.g. '3,5,7'")
    common.add_argument("--epsilon", help="noise grid, e.g. '0.09,0.1'")
    common.add_argument("--db", help="squeezing grid in dB (combined with --eta)")
    common.add_argument("--eta", help="transmissivity grid (combined with --db)")
    common.add_argument("--p-swap", dest="p_swap", help="swap-out probability grid")
    common.add_argument("--prep", choices=["iid", "fixed-one-gkp"])
    common.add_argument("--trials", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int, help=f"worker processes (default: ${WORKERS_ENV} or 1)")
    common.add_argument("--out", help="output path prefix")
    common.add_argument("--input", help="sweep table or .jsonl checkpoint to fit")
    common.add_argument("--noise-units", dest="noise_units", choices=list(NOISE_UNITS))
    common.add_argument("--trial-index", dest="trial_index", type=int)
    common.add_argument("--knn", type=int, help="prune matching graph to k nearest defects")
    parser = argparse.ArgumentParser(prog="macronode", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with exit 2
        return int(exc.code or 0)
    try:
        cfg = parse_config(args)
    except (ConfigError, TypeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return execute(cfg)


if __name__ == "__main__":
    sys.exit(main())
