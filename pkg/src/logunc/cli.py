"""Experiment runner.

    logunc estimate --config configs/coin.ini
    logunc patterns --config configs/patterns.ini --patterns-m-max 100000
    logunc benford --n-max 10000 --output out/benford.csv
    logunc simulate accept-evens 6 36

Configs are INI files with sections [oracle], [pool], [time_bound], [run]
and [patterns].  Every key is also a flag named --<section>-<key>
(underscores become dashes); flags win over the file.

Exit codes: 0 ok, 1 equivalence check failed, 2 bad configuration, 3 a
budget or size cap was hit.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import math
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import estimator as est
from . import oracle as orc
from . import patterns as pat
from .errors import BudgetError, ConfigError, LabError
from .machine import (DEFAULT_MEMBER_CAP, MachinePool, builtin, decode_machine, enumerate_pool,
                      from_hex, parse_pool, parse_table, encode_machine)

log = logging.getLogger("logunc")

EXIT_OK, EXIT_MISMATCH, EXIT_CONFIG, EXIT_BUDGET = 0, 1, 2, 3

# section -> key -> (type, default); None default means "unset"
SCHEMA: dict[str, dict[str, tuple[type, object]]] = {
    "oracle": {
        "variant": (str, "coin"),
        "p": (float, 0.5),
        "seed": (int, 1),
        "accept": (str, "true"),
        "latency": (str, "1"),
        "script": (str, None),
        "script_start": (int, 1),
        "exponent_cap": (int, orc.DEFAULT_EXPONENT_CAP),
    },
    "pool": {
        "mode": (str, "curated"),
        "machines": (str, "accept-all:1, accept-evens:2, multiples-of-3:3"),
        "file": (str, None),
        "bit_cap": (float, None),
        "member_cap": (int, DEFAULT_MEMBER_CAP),
    },
    "time_bound": {
        "form": (str, "quadratic"),
        "a": (float, 1.0),
        "b": (float, 2.0),
    },
    "run": {
        "schedule": (str, "250, 500, 1000, 2000"),
        "seeds": (str, None),
        "mode": (str, "optimized"),
        "output": (str, "out/trace.csv"),
        "format": (str, "csv"),
        "verbose": (str, "false"),
    },
    "patterns": {
        "p": (float, None),
        "m_max": (int, 10_000),
        "selectors": (str, None),
        "c": (float, None),
        "window": (int, 100),
        "csv_stride": (int, 1),
    },
}


@dataclass
class ExperimentConfig:
    oracle: orc.OracleSpec
    pool: MachinePool
    time_bound: est.TimeBound
    schedule: list[int]
    seeds: list[int]
    output: Path
    format: str = "csv"
    mode: str = "optimized"
    verbose: bool = False
    bit_cap: float | None = None
    selectors: MachinePool | None = None
    pattern_p: float = 0.5
    m_max: int = 10_000
    supplied_c: float | None = None
    window: int = 100
    csv_stride: int = 1
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def check_equivalence(self) -> bool:
        return self.mode == "both"


# -- config loading ---------------------------------------------------------------

def _bool(text: str, key: str) -> bool:
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {text!r}")


def _ints(text: str, key: str) -> list[int]:
    try:
        return [int(x) for x in str(text).replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"{key}: expected a list of integers, got {text!r}") from None


def _latency(text: str):
    low = str(text).strip().lower()
    if low in ("inf", "never", "-"):
        return math.inf
    try:
        value = int(low)
    except ValueError:
        raise ConfigError(f"oracle.latency: expected an integer or 'inf', got {text!r}") from None
    if value < 1:
        raise ConfigError("oracle.latency must be >= 1")
    return value


def _machine_list(text: str, key: str) -> MachinePool:
    members = []
    for item in (s.strip() for s in str(text).split(",") if s.strip()):
        name, _, k = item.rpartition(":")
        try:
            members.append(builtin(name, int(k)))
        except ValueError:
            raise ConfigError(f"{key}: expected '<name>:<k>', got {item!r}") from None
        except LabError as exc:
            raise ConfigError(f"{key}: {exc}") from None
    try:
        return MachinePool(tuple(members), "curated")
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None


def read_settings(path: str | None, overrides: dict[tuple[str, str], str]) -> dict[str, dict[str, object]]:
    """Merge defaults, the INI file and command-line overrides, then convert types."""
    raw: dict[str, dict[str, object]] = {s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()}
    base = Path(".")
    if path:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        base = p.parent
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        parser.read(p)
        for section in parser.sections():
            if section not in SCHEMA:
                raise ConfigError(f"unknown config section [{section}]")
            for key, value in parser.items(section):
                if key not in SCHEMA[section]:
                    raise ConfigError(f"unknown key {section}.{key}")
                raw[section][key] = value
    for (section, key), value in overrides.items():
        raw[section][key] = value
    out: dict[str, dict[str, object]] = {}
    for section, keys in SCHEMA.items():
        out[section] = {}
        for key, (typ, _) in keys.items():
            value = raw[section][key]
            if value is None or value == "":
                out[section][key] = None
                continue
            try:
                out[section][key] = typ(value)
            except ValueError:
                raise ConfigError(f"{section}.{key}: expected {typ.__name__}, got {value!r}") from None
    out["_base"] = {"dir": base}
    return out


def build_config(settings: dict) -> ExperimentConfig:
    base: Path = settings["_base"]["dir"]
    o, pl, tb, run, pt = (settings[s] for s in ("oracle", "pool", "time_bound", "run", "patterns"))

    try:
        t = est.TimeBound(tb["form"], tb["a"], tb["b"])
    except LabError as exc:
        raise ConfigError(f"time_bound: {exc}") from None

    schedule = _ints(run["schedule"] or "", "run.schedule")
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ConfigError(f"run.schedule must be strictly increasing, got {schedule}")
    if any(n < 2 for n in schedule):
        raise ConfigError("run.schedule entries must be >= 2")

    variant = o["variant"]
    script = ()
    if variant == "scripted":
        if not o["script"]:
            raise ConfigError("oracle.script is required for the scripted variant")
        sp = Path(o["script"])
        if not sp.is_absolute():
            sp = base / sp
        if not sp.is_file():
            raise ConfigError(f"script file not found: {sp}")
        try:
            script = orc.load_script(sp)
        except LabError as exc:
            raise ConfigError(f"{sp}: {exc}") from None
    seeds = _ints(run["seeds"], "run.seeds") if run["seeds"] else [o["seed"]]
    if variant == "coin" and not seeds:
        raise ConfigError("a coin oracle needs at least one seed")
    try:
        spec = orc.OracleSpec(variant, p=o["p"], seed=seeds[0] if seeds else 0,
                              latency=_latency(o["latency"]), script=script,
                              script_start=o["script_start"], accept=_bool(o["accept"], "oracle.accept"),
                              exponent_cap=o["exponent_cap"])
    except LabError as exc:
        raise ConfigError(f"oracle: {exc}") from None

    mode = run["mode"]
    if mode not in ("optimized", "faithful", "both"):
        raise ConfigError(f"run.mode must be optimized, faithful or both, got {mode!r}")
    fmt = run["format"]
    if fmt not in ("csv", "json"):
        raise ConfigError(f"run.format must be csv or json, got {fmt!r}")

    bit_cap = pl["bit_cap"]
    if pl["mode"] == "curated":
        if pl["file"]:
            fp = Path(pl["file"])
            if not fp.is_absolute():
                fp = base / fp
            if not fp.is_file():
                raise ConfigError(f"pool file not found: {fp}")
            try:
                pool = parse_pool(fp.read_text(), base_dir=fp.parent)
            except (LabError, OSError) as exc:
                raise ConfigError(f"{fp}: {exc}") from None
        else:
            pool = _machine_list(pl["machines"] or "", "pool.machines")
    elif pl["mode"] == "enumerated":
        n_top = max(schedule, default=2)
        budget = est.bit_budget(n_top, bit_cap)
        pool = enumerate_pool(budget, member_cap=pl["member_cap"])  # BudgetError -> exit 3
    else:
        raise ConfigError(f"pool.mode must be curated or enumerated, got {pl['mode']!r}")

    selectors = _machine_list(pt["selectors"], "patterns.selectors") if pt["selectors"] else pool
    m_max = pt["m_max"]
    if m_max is None or m_max < 3:
        raise ConfigError("patterns.m_max must be >= 3")

    # relative output paths resolve against the working directory, not the config file
    output = Path(run["output"])
    return ExperimentConfig(
        oracle=spec, pool=pool, time_bound=t, schedule=schedule, seeds=seeds, output=output,
        format=fmt, mode=mode, verbose=_bool(run["verbose"], "run.verbose"), bit_cap=bit_cap,
        selectors=selectors, pattern_p=pt["p"] if pt["p"] is not None else o["p"],
        m_max=m_max, supplied_c=pt["c"], window=pt["window"], csv_stride=max(1, pt["csv_stride"] or 1),
        raw={s: {k: v for k, v in settings[s].items()} for s in SCHEMA},
    )


# -- outputs ---------------------------------------------------------------------------

def _write_sidecar(data_path: Path, started: float, config: ExperimentConfig, extra: dict | None = None) -> None:
    meta = {
        "data_file": data_path.name,
        "started": time.strftime("%Y-%m-%dT%H:%M:%S%z", time.localtime(started)),
        "duration_s": round(time.time() - started, 3),
        "host": platform.node(),
        "python": platform.python_version(),
        "config": {s: {k: (str(v) if v is not None else None) for k, v in keys.items()}
                   for s, keys in config.raw.items()},
    }
    if extra:
        meta.update(extra)
    Path(str(data_path) + ".meta.json").write_text(json.dumps(meta, indent=2) + "\n")


def _oracle_for_seed(spec: orc.OracleSpec, seed: int) -> orc.OracleSpec:
    if spec.variant != "coin":
        return spec
    return orc.OracleSpec("coin", p=spec.p, seed=seed, latency=spec.latency)


def run_estimate(config: ExperimentConfig) -> int:
    started = time.time()
    rows, docs = [], []
    mismatches = 0
    seeds = config.seeds if config.oracle.variant == "coin" else config.seeds[:1]
    for seed in seeds:
        spec = _oracle_for_seed(config.oracle, seed)
        for n in config.schedule:
            if config.mode == "faithful":
                res = est.estimate_faithful(n, config.pool, spec, config.time_bound, config.bit_cap)
            else:
                res = est.estimate(n, config.pool, spec, config.time_bound, config.bit_cap)
            row = {"seed": seed, **est.trace_row(res)}
            doc = {"seed": seed, **est.result_to_dict(res, config.verbose)}
            if config.check_equivalence:
                faithful = est.estimate_faithful(n, config.pool, spec, config.time_bound, config.bit_cap)
                verdict = "equal" if faithful.j == res.j else "differ"
                mismatches += verdict == "differ"
                row["equivalence"] = doc["equivalence"] = verdict
                row["steps_faithful"] = doc["steps_faithful"] = faithful.steps_total
            rows.append(row)
            docs.append(doc)
            log.info("seed=%s n=%s p_hat=%s/%s", seed, n, res.j, res.n)

    out = config.output
    out.parent.mkdir(parents=True, exist_ok=True)
    if config.format == "csv":
        columns = ["seed", *est.TRACE_COLUMNS]
        if config.check_equivalence:
            columns += ["equivalence", "steps_faithful"]
        with out.open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)
    else:
        out.write_text(json.dumps({"trace": docs}, indent=2) + "\n")
    _write_sidecar(out, started, config, {"mismatches": mismatches})
    print(f"wrote {len(rows)} rows to {out}")
    return EXIT_MISMATCH if mismatches else EXIT_OK


def run_patterns(config: ExperimentConfig) -> int:
    started = time.time()
    spec = config.oracle
    seeds = config.seeds if spec.variant == "coin" else config.seeds[:1]
    truths = {}
    for seed in seeds:
        truths[seed] = pat.Truth.from_oracle(_oracle_for_seed(spec, seed), config.m_max)
    summary = pat.irreducibility_summary(truths, config.pattern_p, config.selectors,
                                         config.time_bound, config.window)
    if config.supplied_c is not None:
        for rep in summary.reports.values():
            rep.supplied_c = config.supplied_c
            rep.violations = rep.check(config.supplied_c)

    out = config.output.with_suffix(".json")
    out.parent.mkdir(parents=True, exist_ok=True)
    doc = summary.to_dict()
    doc["reports"] = {str(s): r.to_dict() for s, r in summary.reports.items()}
    out.write_text(json.dumps(doc, indent=2, default=float) + "\n")
    rows_path = config.output.with_suffix(".csv")
    with rows_path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["seed", "selector", "m", "r", "envelope"])
        for seed, rep in summary.reports.items():
            for name, m, r, env in rep.csv_rows(config.csv_stride):
                writer.writerow([seed, name, m, repr(r), repr(env)])
    _write_sidecar(out, started, config)
    print(f"c_hat per seed: {summary.c_hat}")
    print(f"max c_hat: {summary.max_c_hat:.6f}")
    for seed, name in summary.flags:
        print(f"divergence: seed={seed} selector={name}")
    return EXIT_OK


def run_benford(n_max: int, output: Path | None = None) -> int:
    report = orc.frequency_report(n_max)
    print(f"n_max={n_max} accepts={report.accepts}/{report.total} "
          f"frequency={float(report.frequency):.6f} deviation={report.deviation:+.6f} "
          f"(target log10 2 = {orc.LOG10_2:.5f})")
    if output is not None:
        output.parent.mkdir(parents=True, exist_ok=True)
        with output.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["n", "leading_digit", "is_one", "running_frequency"])
            ones = 0
            for n, d in enumerate(report.digits):
                ones += d == 1
                writer.writerow([n, d, int(d == 1), repr(ones / (n + 1))])
    return EXIT_OK


def _resolve_machine(text: str):
    if "/" in text and all(c in "0123456789abcdefABCDEF/" for c in text):
        bits = from_hex(text)
        code, used = decode_machine(bits)
        if used != len(bits):
            raise ConfigError(f"{text}: {len(bits) - used} trailing bits after the machine code")
        return code
    path = Path(text)
    if path.is_file():
        return encode_machine(parse_table(path.read_text()))
    return builtin(text, 1)


def run_simulate(machine: str, n: int, budget: int) -> int:
    from .machine import simulate

    target = _resolve_machine(machine)
    out = target.run(n, budget) if hasattr(target, "run") else simulate(target, n, budget)
    print(out)
    return EXIT_OK


# -- argument parsing --------------------------------------------------------------------

def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", "-c", help="INI experiment configuration")
    for section, keys in SCHEMA.items():
        group = p.add_argument_group(f"[{section}]")
        for key in keys:
            flag = f"--{section}-{key}".replace("_", "-")
            group.add_argument(flag, dest=f"{section}.{key}", metavar=key.upper())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="logunc", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_config_flags(sub.add_parser("estimate", help="run the estimator over a schedule"))
    _add_config_flags(sub.add_parser("patterns", help="irreducibility diagnostics"))
    b = sub.add_parser("benford", help="leading-digit frequency of powers of 3")
    b.add_argument("--n-max", type=int, default=10_000)
    b.add_argument("--output", type=Path)
    s = sub.add_parser("simulate", help="run one machine")
    s.add_argument("machine", help="built-in name, '<hex>/<bits>' code, or a table file")
    s.add_argument("input", type=int)
    s.add_argument("budget", type=int)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "benford":
            if args.n_max < 1:
                raise ConfigError("--n-max must be >= 1")
            return run_benford(args.n_max, args.output)
        if args.command == "simulate":
            if args.input < 0 or args.budget < 0:
                raise ConfigError("input and budget must be non-negative")
            return run_simulate(args.machine, args.input, args.budget)
        overrides = {tuple(k.split(".", 1)): v for k, v in vars(args).items()
                     if "." in k and v is not None}
        config = build_config(read_settings(args.config, overrides))
        if args.command == "estimate":
            return run_estimate(config)
        return run_patterns(config)
    except BudgetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except LabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
