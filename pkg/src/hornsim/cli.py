"""Command line: ``run``, ``compare``, ``sweep`` and ``validate``.

Exit status is 0 only when every requested check passes: no diverged run and
valid artifacts for run/compare/sweep, every invariant for validate. Bad
arguments or config files exit with 2.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

import jsonschema
import numpy as np

from . import export
from .config import ConfigError, load_config, parse_value, set_param, set_value
from .harness import (CONFIG_NAMES, ExperimentConfig, compare_configs, config_name, run_experiment,
                      scenario_name, sweep)
from .simulate import HORN_COLUMNS, STATE_COLUMNS

DEFAULT_CONFIGSET = "FullSoft,FullHard,HalfSoft"
DEFAULT_SEEDS = "0..4"


def parse_seeds(text: str) -> list:
    """``N`` or inclusive ``N..M``."""
    text = text.strip()
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            lo, hi = int(a), int(b)
        else:
            lo = hi = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed range {text!r}; use N or N..M") from None
    if hi < lo:
        raise argparse.ArgumentTypeError(f"empty seed range {text!r}")
    return list(range(lo, hi + 1))


def parse_configset(text: str) -> list:
    try:
        names = [config_name(n) for n in text.split(",") if n.strip()]
    except ValueError as err:
        raise argparse.ArgumentTypeError(str(err)) from None
    if not names:
        raise argparse.ArgumentTypeError("empty configuration set")
    return names


def _scenario(text: str) -> str:
    try:
        return scenario_name(text)
    except ValueError as err:
        raise argparse.ArgumentTypeError(str(err)) from None


def _base_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        key, value = item.split("=", 1)
        cfg = set_param(cfg, key.strip(), value)
    if args.scenario:
        cfg = set_param(cfg, "scenario", args.scenario)
    return cfg


def _stem(name: str, seed: int) -> str:
    return f"{name}_seed{seed}"


def _summary(report) -> str:
    mean = report.mean_pitch_rmse_deg
    delay = report.mean_contact_delay_ms
    return (f"{report.configuration} seed {report.seed}: {report.collision_count} collisions, "
            f"mean pitch RMSE {'n/a' if mean is None else f'{mean:.3f} deg'}, "
            f"mean delay {'n/a' if delay is None else f'{delay:.1f} ms'}, "
            f"stability {report.stability.verdict.value}")


def cmd_run(args) -> int:
    cfg = _base_config(args)
    if args.configset:
        if len(args.configset) != 1:
            raise ConfigError("run takes a single configuration; use compare for several")
        cfg = set_param(cfg, "configuration", args.configset[0])
    if args.seed is not None:
        cfg = set_param(cfg, "seed", str(args.seed))
    series, report = run_experiment(cfg)
    doc = report.to_dict()
    paths = export.export(series, doc, args.out, _stem(cfg.configuration, cfg.seed))
    print(_summary(report))
    for p in paths.values():
        print(f"wrote {p}")
    if report.diverged_at is not None:
        print(f"FAIL: run diverged at t = {report.diverged_at:.3f} s")
        return 1
    return 0


def cmd_compare(args) -> int:
    base = _base_config(args)
    names = args.configset or parse_configset(DEFAULT_CONFIGSET)
    seeds = args.seeds or ([args.seed] if args.seed is not None else parse_seeds(DEFAULT_SEEDS))
    comp = compare_configs(base, names, seeds, jobs=args.jobs, keep_series=True)
    out = Path(args.out)
    for (name, seed), report in sorted(comp.reports.items()):
        export.export(comp.series[(name, seed)], report.to_dict(), out, _stem(name, seed))
    doc = comp.to_dict()
    export.write_json(doc, out / "comparison.json")
    rows = [(n, doc["per_configuration"][n]["n_bumps"], doc["per_configuration"][n]["mean_pitch_rmse_deg"],
             doc["per_configuration"][n]["mean_contact_delay_ms"]) for n in dict.fromkeys(comp.names)]
    export.write_text(out / "comparison.csv", export.rows_to_csv(
        ["configuration", "n_bumps", "mean_pitch_rmse_deg", "mean_contact_delay_ms"], rows))
    for n, nb, m, d in rows:
        print(f"{n}: {nb} bumps, mean pitch RMSE {'n/a' if m is None else f'{m:.3f} deg'}, "
              f"mean delay {'n/a' if d is None else f'{d:.1f} ms'}")
    for k, v in sorted(doc["reductions_pct"].items()):
        print(f"reduction {k}: {v:.1f}%")
    print(f"wrote {out / 'comparison.json'}")
    if comp.diverged():
        print("FAIL: diverged runs: " + ", ".join(comp.diverged()))
        return 1
    return 0


def cmd_sweep(args) -> int:
    base = _base_config(args)
    if args.configset:
        if len(args.configset) != 1:
            raise ConfigError("sweep takes a single configuration")
        base = set_param(base, "configuration", args.configset[0])
    seeds = args.seeds or ([args.seed] if args.seed is not None else [base.seed])
    # parse every value up front so a typo fails before any simulation runs
    values = [parse_value(base, args.param, raw) for raw in args.values.split(",")]
    for v in values:
        set_value(base, args.param, v)
    rows = sweep(base, args.param, values, seeds, jobs=args.jobs, setter=set_value)
    out = Path(args.out)
    header = list(rows[0].keys()) if rows else ["param", "value", "seed"]
    export.write_text(out / "sweep.csv", export.rows_to_csv(header, [[r[h] for h in header] for r in rows]))
    export.write_json({"schema_version": export.SCHEMA_VERSION, "rows": rows}, out / "sweep.json")
    for r in rows:
        m = r["mean_pitch_rmse_deg"]
        print(f"{r['param']} = {r['value']} seed {r['seed']}: "
              f"mean pitch RMSE {'n/a' if m is None else f'{m:.3f} deg'}, {r['collision_count']} collisions")
    print(f"wrote {out / 'sweep.csv'}")
    bad = [r for r in rows if r["diverged_at"] is not None]
    if bad:
        print(f"FAIL: {len(bad)} diverged runs")
        return 1
    return 0


# -- validate ---------------------------------------------------------------

def _horn_ids(header: Sequence[str]) -> list:
    extra = header[len(STATE_COLUMNS):]
    ids = []
    for i in range(0, len(extra), len(HORN_COLUMNS)):
        group = extra[i:i + len(HORN_COLUMNS)]
        hid = group[0][: -len("_" + HORN_COLUMNS[0])] if group else ""
        ids.append((hid, group))
    return ids


def check_timeseries(path) -> list:
    """Invariant checks on a time-series CSV; returns (name, ok, detail) tuples."""
    header, cols = export.read_series_csv(path)
    checks = []
    n_state = len(STATE_COLUMNS)
    checks.append(("state columns in order", header[:n_state] == STATE_COLUMNS, ""))
    groups = _horn_ids(header)
    groups_ok = (len(header) - n_state) % len(HORN_COLUMNS) == 0 and all(
        g == [f"{hid}_{c}" for c in HORN_COLUMNS] for hid, g in groups)
    checks.append(("horn column groups complete", groups_ok, f"{len(groups)} horns"))
    if not checks[0][1] or not groups_ok:
        return checks
    data = np.column_stack([cols[h] for h in header]) if header else np.zeros((0, 0))
    checks.append(("all values finite", bool(np.isfinite(data).all()), ""))
    t = cols["t"]
    if t.size > 1:
        dt = np.diff(t)
        uniform = bool(dt.min() > 0 and np.allclose(dt, np.median(dt), rtol=1e-6, atol=1e-9))
        checks.append(("constant log step", uniform, f"median {np.median(dt):.6g} s"))
    else:
        checks.append(("constant log step", True, "fewer than two rows"))
    mono = True
    for name in ("e_damping", "e_friction", "e_drag"):
        v = cols[name]
        if v.size > 1 and np.min(np.diff(v)) < -1e-9 * max(1.0, float(np.max(np.abs(v)))):
            mono = False
    checks.append(("dissipation never decreases", mono, ""))
    flags_ok, force_ok, contact_ok = True, True, True
    for hid, _ in groups:
        for flag in ("in_contact", "failed", "in_event"):
            flags_ok &= bool(np.isin(cols[f"{hid}_{flag}"], (0.0, 1.0)).all())
        force_ok &= bool((cols[f"{hid}_f_n"] >= 0).all())
        contact_ok &= bool(((cols[f"{hid}_delta"] > 0) == (cols[f"{hid}_in_contact"] == 1.0)).all())
    checks.append(("flags are 0/1", flags_ok, ""))
    checks.append(("normal force non-negative", force_ok, ""))
    checks.append(("contact flag matches deflection", contact_ok, ""))
    return checks


def check_sensors(path, horn_ids: Optional[Sequence[str]] = None) -> list:
    rows = export.read_sensor_csv(path)
    checks = []
    ids = sorted({r["horn_id"] for r in rows})
    if horn_ids is not None:
        checks.append(("sensor horns match time series", ids == sorted(horn_ids) or not rows, ", ".join(ids)))
    ok = True
    for hid in ids:
        t = np.array([r["t"] for r in rows if r["horn_id"] == hid])
        if t.size > 1:
            dt = np.diff(t)
            ok &= bool(dt.min() > 0 and np.allclose(dt, np.median(dt), rtol=1e-6, atol=1e-9))
    checks.append(("constant sample step per horn", ok, ""))
    checks.append(("ADC codes non-negative", all(r["code"] >= 0 for r in rows), ""))
    finite = all(np.isfinite(r["resistance_ohm"]) and np.isfinite(r["filtered_ohm"]) for r in rows)
    checks.append(("sensor values finite", finite, ""))
    return checks


def check_metrics(path) -> list:
    doc = export.read_json(path)
    try:
        export.validate_report(doc)
        checks = [("metrics match schema", True, f"schema_version {doc.get('schema_version')}")]
    except jsonschema.ValidationError as err:
        return [("metrics match schema", False, err.message)]
    n_upper = len(doc.get("events", {}).get("upper", []))
    if "events" in doc:
        checks.append(("collision count equals upper events", doc["collision_count"] == n_upper,
                       f"{doc['collision_count']} vs {n_upper}"))
    checks.append(("one RMSE per collision", len(doc["pitch_rmse_deg"]) in (0, doc["collision_count"]), ""))
    return checks


def cmd_validate(args) -> int:
    checks = []
    ts = Path(args.csv)
    horn_ids = None
    try:
        ts_checks = check_timeseries(ts)
        checks += ts_checks
        header, _ = export.read_series_csv(ts)
        horn_ids = [h for h, _ in _horn_ids(header)]
    except (export.ExportError, ValueError) as err:
        checks.append(("time series readable", False, str(err)))
    sensors = Path(args.sensors) if args.sensors else _sibling(ts, "_sensors.csv")
    metrics_path = Path(args.metrics) if args.metrics else _sibling(ts, "_metrics.json")
    for path, fn, label in ((sensors, lambda p: check_sensors(p, horn_ids), "sensor CSV"),
                            (metrics_path, check_metrics, "metrics JSON")):
        if path is None:
            continue
        try:
            checks += fn(path)
        except (export.ExportError, ValueError, KeyError) as err:
            checks.append((f"{label} readable", False, str(err)))
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else ""))
    n_fail = sum(not ok for _, ok, _ in checks)
    print(f"{len(checks) - n_fail}/{len(checks)} checks passed")
    return 0 if n_fail == 0 else 1


def _sibling(ts: Path, suffix: str) -> Optional[Path]:
    name = ts.name
    if not name.endswith("_timeseries.csv"):
        return None
    p = ts.with_name(name[: -len("_timeseries.csv")] + suffix)
    return p if p.exists() else None


# -- argument parsing ---------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hornsim", description="Planar quadrotor with elastic horns: wall-contact experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seeds: bool):
        sp.add_argument("--config", metavar="PATH", help="key = value config file")
        sp.add_argument("--scenario", metavar="NAME", type=_scenario, help="TouchAndGo, Pushing or Scripted")
        sp.add_argument("--configset", metavar="NAME[,NAME...]", type=parse_configset,
                        help=f"horn configurations ({', '.join(CONFIG_NAMES)})")
        sp.add_argument("--seed", metavar="N", type=int, help="random seed")
        if seeds:
            sp.add_argument("--seeds", metavar="N..M", type=parse_seeds, help="inclusive seed range")
            sp.add_argument("--jobs", type=int, default=1, help="worker processes")
        sp.add_argument("--out", metavar="DIR", default="out", help="output directory (default: out)")
        sp.add_argument("--set", metavar="SECTION.KEY=VALUE", action="append",
                        help="override one config value (repeatable)")

    run = sub.add_parser("run", help="one experiment")
    common(run, seeds=False)
    run.set_defaults(func=cmd_run)

    comp = sub.add_parser("compare", help="several configurations over several seeds")
    common(comp, seeds=True)
    comp.set_defaults(func=cmd_compare)

    sw = sub.add_parser("sweep", help="one parameter over a list of values")
    common(sw, seeds=True)
    sw.add_argument("--param", required=True, metavar="SECTION.KEY")
    sw.add_argument("--values", required=True, metavar="V1,V2,...")
    sw.set_defaults(func=cmd_sweep)

    val = sub.add_parser("validate", help="invariant checks on a finished run")
    val.add_argument("csv", metavar="TIMESERIES_CSV")
    val.add_argument("--sensors", metavar="PATH", help="sensor CSV (default: sibling file if present)")
    val.add_argument("--metrics", metavar="PATH", help="metrics JSON (default: sibling file if present)")
    val.set_defaults(func=cmd_validate)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "seeds", None) and args.seed is not None:
        parser.error("--seed and --seeds are mutually exclusive")
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except export.ExportError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
