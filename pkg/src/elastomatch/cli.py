"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 solver or localization
failure, 4 acceptance failure in ``reproduce``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import harness
from .config import INDICATOR_MODES, ExperimentConfig, load_config
from .errors import ConfigError, CoverageError, LocalizationError, SolverError
from .forward import KINDS

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_ACCEPTANCE = 0, 2, 3, 4


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment configuration")
    common.add_argument("--seed", type=int, help="override rng_seed")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--kind", choices=KINDS, help="override the scatterer kind")
    common.add_argument("--indicator", choices=INDICATOR_MODES, help="override the location indicator")

    ap = argparse.ArgumentParser(prog="elastomatch", description="Locate and identify elastic scatterers.")
    sub = ap.add_subparsers(dest="command", required=True)

    d = sub.add_parser("dict", help="dictionary operations")
    dsub = d.add_subparsers(dest="dict_command", required=True)
    dsub.add_parser("build", parents=[common], help="precompute entries for all shapes")

    f = sub.add_parser("forward", parents=[common], help="simulate a measurement")
    f.add_argument("--tag", choices=harness.FREQUENCY_TAGS, default="omega1")

    lo = sub.add_parser("locate", parents=[common], help="stage one: find the scatterer")
    lo.add_argument("--measurement", required=True)

    ident = sub.add_parser("identify", parents=[common], help="stage two: match against the dictionary")
    ident.add_argument("--measurement", required=True)
    where = ident.add_mutually_exclusive_group(required=True)
    where.add_argument("--z", help="located point as x,y,z")
    where.add_argument("--location", help="location.json written by locate")
    ident.add_argument("--store", help="dictionary root (default: --out)")

    rep = sub.add_parser("reproduce", parents=[common], help="rerun one of the tables T1..T8")
    rep.add_argument("table", choices=sorted(harness.TABLES))
    return ap


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    return cfg.with_overrides(rng_seed=args.seed, kind=args.kind, indicator=args.indicator)


def _write(path: str, text: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _read_measurement(path: str) -> harness.MeasurementSet:
    try:
        with open(path, encoding="utf-8") as fh:
            return harness.measurement_from_json(fh.read())
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot read measurement {path}: {exc}") from exc


def _parse_point(text: str) -> np.ndarray:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"bad point {text!r}") from exc
    if len(vals) != 3:
        raise ConfigError("point needs three comma-separated values")
    return np.array(vals)


def cmd_dict_build(args, cfg: ExperimentConfig) -> int:
    store = harness.open_store(cfg, args.out)
    t0 = time.perf_counter()
    _, built = harness.ensure_entries(cfg, store, harness.nominal_direction(cfg), args.out)
    where = harness.store_directory(args.out, cfg.kind)
    if built == 0:
        print(f"dictionary up to date ({len(store.entries)} entries, hash {store.hash[:12]}) in {where}")
    else:
        print(f"built {built} entries in {time.perf_counter() - t0:.2f} s into {where}")
    return EXIT_OK


def cmd_forward(args, cfg: ExperimentConfig) -> int:
    ms = harness.simulate(cfg, args.tag)
    path = os.path.join(args.out, f"measurement_{args.tag}.json")
    prov = harness.provenance(cfg) | {"kind": cfg.kind, "true_shape": cfg.true_shape, "noise": cfg.noise}
    _write(path, harness.measurement_to_json(ms, prov) + "\n")
    print(path)
    return EXIT_OK


def cmd_locate(args, cfg: ExperimentConfig) -> int:
    ms = _read_measurement(args.measurement)
    which = harness.location_indicator(cfg)
    res = harness.run_locate(cfg, ms, which)
    _write(os.path.join(args.out, "indicator_coarse.csv"), harness.indicator_map_csv(res.coarse.keys, res.coarse.values))
    _write(os.path.join(args.out, "indicator_fine.csv"), harness.indicator_map_csv(res.fine.keys, res.fine.values))
    doc = {"indicator": which, "z": res.z.tolist(), "value": res.value, "provenance": harness.provenance(cfg)}
    _write(os.path.join(args.out, "location.json"), json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(f"located at ({res.z[0]:.4f}, {res.z[1]:.4f}, {res.z[2]:.4f}) with {which} = {res.value:.6f}")
    return EXIT_OK


def cmd_identify(args, cfg: ExperimentConfig) -> int:
    ms = _read_measurement(args.measurement)
    if args.z is not None:
        z_ring = _parse_point(args.z)
    else:
        try:
            with open(args.location, encoding="utf-8") as fh:
                z_ring = np.asarray(json.load(fh)["z"], dtype=float)
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"cannot read location {args.location}: {exc}") from exc
    root = args.store or args.out
    store = harness.open_store(cfg, root)
    entries, _ = harness.ensure_entries(cfg, store, z_ring / np.linalg.norm(z_ring), root)
    which = harness.shape_indicator(cfg)
    res = harness.run_identify(cfg, ms, entries, z_ring, which)
    table = harness.ResultTable(
        f"shape determination using {which}",
        ["indicator"] + [f"D{j}" for j in res.shape_ids],
        [[which] + [float(v) for v in res.normalized]],
        harness.provenance(cfg, store),
    )
    harness.write_table(table, args.out, "identification")
    tie = f" (tied with {list(res.ties)})" if res.ties else ""
    print(f"identified shape {res.shape_id}{tie}")
    return EXIT_OK


def cmd_reproduce(args, cfg: ExperimentConfig) -> int:
    table = harness.reproduce(args.table, cfg, args.out)
    harness.write_table(table, os.path.join(args.out, args.table), args.table)
    print(table.to_csv(), end="")
    line = harness.summary_line(args.table, table)
    print(line)
    return EXIT_OK if table.passed else EXIT_ACCEPTANCE


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _config(args)
        if args.command == "dict":
            return cmd_dict_build(args, cfg)
        handler = {"forward": cmd_forward, "locate": cmd_locate, "identify": cmd_identify, "reproduce": cmd_reproduce}
        return handler[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, LocalizationError, CoverageError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
