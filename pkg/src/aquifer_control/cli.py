"""
Command-line interface.

Runs are described by an INI file with sections ``[model]``, ``[run]``,
``[path]`` and ``[sweep]``; ``--set section.key=value`` overrides any key.
Exit codes: 0 success, 1 domain failure, 2 usage or parse error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import os
import random
import sys
from dataclasses import dataclass, field

from .equilibrium import DegenerateSpectrumError, InfeasibleError, equilibrium
from .feasibility import RegimeError, check_concave, check_linear_full, validate_params
from .model import DomainError, ModelKind, ModelParams
from .scenario import GOLDEN, ReproductionError, SweepSpec, reproduce_table, run_sweep, rows_to_json, write_table
from .trajectory import PathError, PathSpec, discounted_welfare, stable_path
from .verify import bisection_root, newton_root, reports_to_json, run_oracle_suite, suite_passed

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE = 0, 1, 2
ENV_OUTPUT_DIR = "AQUIFER_OUTPUT_DIR"

SCHEMA = {
    "model": {"b": float, "d": float, "rho": float, "eta": float, "beta": float, "hbar": float},
    "run": {"regime": str, "format": str, "output_dir": str},
    "path": {"t_max": float, "dt": float, "h0": float, "psi0": float},
    "sweep": {"axis": str, "values": str, "regimes": str},
}
DEFAULT_REGIMES = "benchmark,full,concave"


class ConfigError(ValueError):
    """Malformed or incomplete configuration; maps to exit code 2."""


@dataclass
class RunConfig:
    params: ModelParams | None
    regimes: list[ModelKind]
    path: PathSpec
    fmt: str = "csv"
    output_dir: str = "output"
    sweep: dict = field(default_factory=dict)


def _split(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _parse_regimes(text: str, where: str) -> list[ModelKind]:
    try:
        return [ModelKind.parse(x) for x in _split(text)]
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def load_config(path: str | None, overrides=(), output_dir: str | None = None) -> RunConfig:
    """Parse the INI file and apply ``section.key=value`` overrides.

    Precedence for the output directory: ``output_dir`` argument, then the
    ``AQUIFER_OUTPUT_DIR`` environment variable, then ``[run] output_dir``.
    """
    parser = configparser.ConfigParser(interpolation=None)
    source = path or "<overrides>"
    if path is not None:
        try:
            with open(path) as fh:
                parser.read_file(fh, source=path)
        except OSError as exc:
            raise ConfigError(f"{path}: {exc.strerror}") from None
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
    for item in overrides:
        key, sep, value = item.partition("=")
        section, dot, name = key.strip().partition(".")
        if not sep or not dot:
            raise ConfigError(f"--set {item!r}: expected section.key=value")
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, name, value.strip())

    values: dict[str, dict] = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{source}: unknown section [{section}]")
        values[section] = {}
        for key, raw in parser.items(section):
            kind = SCHEMA[section].get(key)
            if kind is None:
                raise ConfigError(f"{source}: unknown key {section}.{key}")
            try:
                values[section][key] = kind(raw)
            except ValueError:
                raise ConfigError(f"{source}: {section}.{key}={raw!r} is not a number") from None

    model = values.get("model", {})
    params = None
    if model:
        missing = sorted(set(SCHEMA["model"]) - set(model))
        if missing:
            raise ConfigError(f"{source}: [model] is missing {', '.join(missing)}")
        try:
            params = ModelParams(**model)
        except DomainError as exc:
            raise ConfigError(f"{source}: {exc}") from None

    run = values.get("run", {})
    fmt = run.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError(f"{source}: run.format must be csv or json, got {fmt!r}")
    try:
        spec = PathSpec(**values.get("path", {}))
    except (DomainError, ValueError) as exc:
        raise ConfigError(f"{source}: [path] {exc}") from None
    out = output_dir or os.environ.get(ENV_OUTPUT_DIR) or run.get("output_dir", "output")
    return RunConfig(params, _parse_regimes(run.get("regime", DEFAULT_REGIMES), f"{source}: run.regime"),
                     spec, fmt, out, values.get("sweep", {}))


def _need_params(cfg: RunConfig) -> ModelParams:
    if cfg.params is None:
        raise ConfigError("a [model] section with b, d, rho, eta, beta, hbar is required")
    return cfg.params


# commands ---------------------------------------------------------------------

def cmd_validate(cfg: RunConfig, out) -> int:
    params = _need_params(cfg)
    ok = True
    for regime in cfg.regimes:
        if regime is ModelKind.LINEAR_FULL:
            try:
                report = check_linear_full(params)
            except RegimeError as exc:
                print(f"regime: full\noverall: FAIL\n  {exc}", file=out)
                ok = False
                continue
        elif regime is ModelKind.CONCAVE:
            report = check_concave(params)
        else:
            report = validate_params(params)
            report.regime = regime.value
        print(report.to_json() if cfg.fmt == "json" else report.render(), file=out)
        ok = ok and report.overall
    return EXIT_OK if ok else EXIT_DOMAIN


EQ_FIELDS = ("regime", "h_e", "psi_e", "gamma_e", "mu_e", "lambda_e", "g_e", "f_e", "U_e", "consistent", "in_bounds")


def cmd_equilibrium(cfg: RunConfig, out) -> int:
    params = _need_params(cfg)
    records, status = [], EXIT_OK
    for regime in cfg.regimes:
        try:
            records.append(equilibrium(params, regime).as_dict())
        except (InfeasibleError, DomainError) as exc:
            print(f"{regime.value}: {exc}", file=sys.stderr)
            status = EXIT_DOMAIN
    if cfg.fmt == "json":
        print(json.dumps([{k: r[k] for k in EQ_FIELDS} for r in records], indent=2, default=float), file=out)
    else:
        writer = csv.writer(out)
        writer.writerow(EQ_FIELDS)
        for r in records:
            writer.writerow([r[k] if isinstance(r[k], (str, bool)) else f"{float(r[k]):.6f}" for k in EQ_FIELDS])
    return status


def cmd_path(cfg: RunConfig, out) -> int:
    params = _need_params(cfg)
    os.makedirs(cfg.output_dir, exist_ok=True)
    status = EXIT_OK
    for regime in cfg.regimes:
        try:
            series = stable_path(params, regime, cfg.path)
        except (DegenerateSpectrumError, PathError, InfeasibleError, DomainError) as exc:
            print(f"{regime.value}: {type(exc).__name__}: {exc}", file=sys.stderr)
            status = EXIT_DOMAIN
            continue
        target = os.path.join(cfg.output_dir, f"path_{regime.value}.{cfg.fmt}")
        if cfg.fmt == "csv":
            series.to_csv(target)
        else:
            with open(target, "w") as fh:
                fh.write(series.to_json())
        line = f"{regime.value}: {len(series)} points -> {target}"
        if len(series) >= 3 and len(series) % 2 == 1:
            w = discounted_welfare(series)
            line += f"; J={w.J:.6f} tail<={w.tail_bound:.6f}"
        print(line, file=out)
    return status


def cmd_sweep(cfg: RunConfig, out) -> int:
    params = _need_params(cfg)
    sw = cfg.sweep
    if "axis" not in sw or "values" not in sw:
        raise ConfigError("[sweep] needs axis and values")
    try:
        values = [float(v) for v in _split(sw["values"])]
    except ValueError:
        raise ConfigError(f"sweep.values={sw['values']!r} is not a comma-separated list of numbers") from None
    regimes = _parse_regimes(sw["regimes"], "sweep.regimes") if "regimes" in sw else cfg.regimes
    try:
        spec = SweepSpec(params, sw["axis"], tuple(values), tuple(regimes))
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    rows = run_sweep(spec)
    path = write_table("sweep", rows, cfg.output_dir, cfg.fmt)
    if cfg.fmt == "json":
        print(rows_to_json(rows), file=out)
    for row in rows:
        cells = " ".join(f"{c}={getattr(row, c):.3f}" for c in ("h_e", "psi_e", "gamma_e", "f_e", "U_e")
                         if getattr(row, c) is not None)
        print(f"{row.scenario:<8s} {spec.axis}={row.value:<8g} {cells} consistent={row.consistent}"
              + (f" error={row.error}" if row.error else ""), file=out)
    print(f"wrote {path}", file=out)
    return EXIT_OK


def cmd_reproduce(table_ids, cfg: RunConfig, out) -> int:
    ids = list(GOLDEN) if [t.lower() for t in table_ids] == ["all"] else [t.upper() for t in table_ids]
    unknown = [t for t in ids if t not in GOLDEN]
    if unknown:
        raise ConfigError(f"unknown table(s) {', '.join(unknown)}; choose from {', '.join(GOLDEN)} or all")
    status = EXIT_OK
    for tid in ids:
        result = reproduce_table(tid, strict=False)
        write_table(tid, result.rows, cfg.output_dir, cfg.fmt)
        print(result.render(), file=out)
        if not result.passed:
            status = EXIT_DOMAIN
    return status


def _random_root_check(seed: int, draws: int, out) -> bool:
    rng = random.Random(seed)
    checked, worst = 0, 0.0
    while checked < draws:
        rho = rng.uniform(0.01, 0.2)
        p = ModelParams(b=rng.uniform(rho + 0.01, 1.0), d=rng.uniform(0.1, 3.0), rho=rho,
                        eta=rng.uniform(0.05, 1.0), beta=rng.uniform(0.001, 2.0), hbar=rng.uniform(0.05, 1.0))
        if not check_concave(p).overall:
            continue
        worst = max(worst, abs(newton_root(p) - bisection_root(p)))
        checked += 1
    passed = worst <= 1e-10
    print(f"[{'PASS' if passed else 'FAIL'}] random roots: seed={seed} draws={draws} "
          f"max|newton-bisection|={worst:.3e}", file=out)
    return passed


def cmd_verify(cfg: RunConfig, out, seed: int | None = None, draws: int = 200) -> int:
    params = _need_params(cfg)
    try:
        reports = run_oracle_suite(params, spec=cfg.path)
    except (DegenerateSpectrumError, PathError, InfeasibleError, DomainError) as exc:
        print(f"verify: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    if cfg.fmt == "json":
        print(reports_to_json(reports), file=out)
    else:
        for r in reports:
            print(r.render(), file=out)
    ok = suite_passed(reports)
    if seed is not None:
        ok = _random_root_check(seed, draws, out) and ok
    print(f"verify: {'PASS' if ok else 'FAIL'}", file=out)
    return EXIT_OK if ok else EXIT_DOMAIN


# entry point ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override a config key (repeatable)")
    common.add_argument("--format", choices=("csv", "json"), help="output format (overrides run.format)")
    common.add_argument("--out-dir", help=f"output directory (overrides ${ENV_OUTPUT_DIR} and run.output_dir)")
    common.add_argument("--regime", help="comma-separated regimes (overrides run.regime)")

    parser = argparse.ArgumentParser(prog="aquifer-control",
                                     description="Groundwater quantity/quality optimal-control solver.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("validate", "check parametric restrictions"),
                            ("equilibrium", "steady states per regime"),
                            ("path", "write stable-path trajectories"),
                            ("sweep", "evaluate regimes over a parameter grid"),
                            ("verify", "run the numerical oracle suite")):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("config", nargs="?", help="INI config file")
        if name == "verify":
            p.add_argument("--seed", type=int, help="also run a seeded random root-finder comparison")
            p.add_argument("--draws", type=int, default=200, help="number of random draws with --seed")
    p = sub.add_parser("reproduce", parents=[common], help="regenerate reference tables and diff them")
    p.add_argument("tables", nargs="+", help=f"table ids ({', '.join(GOLDEN)}) or 'all'")
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    overrides = list(args.overrides)
    if args.format:
        overrides.append(f"run.format={args.format}")
    if args.regime:
        overrides.append(f"run.regime={args.regime}")
    try:
        cfg = load_config(getattr(args, "config", None), overrides, args.out_dir)
        if args.command == "validate":
            return cmd_validate(cfg, out)
        if args.command == "equilibrium":
            return cmd_equilibrium(cfg, out)
        if args.command == "path":
            return cmd_path(cfg, out)
        if args.command == "sweep":
            return cmd_sweep(cfg, out)
        if args.command == "reproduce":
            return cmd_reproduce(args.tables, cfg, out)
        return cmd_verify(cfg, out, args.seed, args.draws)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ReproductionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
