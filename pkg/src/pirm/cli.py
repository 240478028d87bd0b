"""Command-line front end: configuration, workloads, single ops, calibration.

Exit codes are the machine contract: 0 on success (oracle match), 1 on
usage or configuration errors, 2 on oracle mismatch or calibration
failure.  Reports are files (``report.json`` / ``report.csv``); standard
output is for humans.
"""

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from pirm import arithmetic, cost, packing, workloads
from pirm.dbc import DBC, AddLayout
from pirm.errors import CalibrationMismatch, ConfigError, PirmError
from pirm.hierarchy import Engine, Geometry
from pirm.kvformat import parse_kv_lines

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_MISMATCH = 2

#: Config keys with defaults; file values override these, flags override both.
CONFIG_DEFAULTS = {
    "trd": 7,
    "seed": 0,
    "x": 512,
    "y": 32,
    "banks": 32,
    "subarrays_per_bank": 64,
    "tiles_per_subarray": 16,
    "dbcs_per_tile": 16,
    "pim_tiles_per_subarray": 1,
    "devices_per_rank": 8,
    "cost_table": "",
    "out": "pirm-out",
    "trace": False,
    "jobs": 1,
}


def load_config(path: str | None, overrides: dict) -> dict:
    cfg = dict(CONFIG_DEFAULTS)
    if path:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        for key, value in parse_kv_lines(text).items():
            if key not in cfg:
                raise ConfigError(f"unknown config key {key!r}")
            if isinstance(cfg[key], bool):
                cfg[key] = value.lower() in ("1", "true", "yes")
            elif isinstance(cfg[key], int):
                cfg[key] = int(value)
            else:
                cfg[key] = value
    for key, value in overrides.items():
        if value is not None:
            cfg[key] = value
    return cfg


def build_engine(cfg: dict, trace: bool = False) -> Engine:
    geo_counts = dict(
        banks=cfg["banks"],
        subarrays_per_bank=cfg["subarrays_per_bank"],
        tiles_per_subarray=cfg["tiles_per_subarray"],
        dbcs_per_tile=cfg["dbcs_per_tile"],
        pim_tiles_per_subarray=cfg["pim_tiles_per_subarray"],
        x=cfg["x"],
        y=cfg["y"],
        trd=cfg["trd"],
        devices_per_rank=cfg["devices_per_rank"],
    )
    bits = (
        geo_counts["banks"] * geo_counts["subarrays_per_bank"]
        * geo_counts["tiles_per_subarray"] * geo_counts["dbcs_per_tile"]
        * geo_counts["x"] * geo_counts["y"]
    )
    geometry = Geometry(
        memory_bytes=bits * geo_counts["devices_per_rank"] // 8, **geo_counts
    )
    table = (
        cost.CostTable.load(cfg["cost_table"])
        if cfg["cost_table"]
        else cost.CostTable.default()
    )
    return Engine(geometry=geometry, table=table, trace=trace)


def _write_reports(out_dir: Path, reports: list[workloads.RunReport]) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = [r.as_dict() for r in reports]
    (out_dir / "report.json").write_text(
        json.dumps(payload[0] if len(payload) == 1 else payload,
                   indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    with open(out_dir / "report.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["workload", "params", "seed", "cycles", "energy_pj",
             "oracle_match", "energy_ratio"]
        )
        for r in reports:
            ratio = r.baseline["energy_ratio"] if r.baseline else ""
            writer.writerow(
                [r.workload, json.dumps(r.params, sort_keys=True), r.seed,
                 r.cycles, r.energy_pj, r.oracle_match, ratio]
            )


def _write_trace(out_dir: Path, engine: Engine) -> str | None:
    if engine.trace is None:
        return None
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "trace.txt").write_text(engine.trace.to_text(), encoding="utf-8")
    (out_dir / "trace.json").write_text(engine.trace.to_json(), encoding="utf-8")
    return str(out_dir / "trace.txt")


def _run_single(cfg: dict, workload: str, args, sweep_value: int | None) -> workloads.RunReport:
    engine = build_engine(cfg, trace=cfg["trace"])
    seed = cfg["seed"]
    if workload == "bitmap":
        k = sweep_value if sweep_value is not None else args.criteria_list[0]
        ds = workloads.BitmapDataset.random(
            args.records, max(k, args.columns), density=args.density, seed=seed
        )
        names = [f"c{i}" for i in range(k)]
        count, report = workloads.bitmap_query(engine, ds, names)
    elif workload == "cnn":
        rng = np.random.default_rng(seed)
        n, kdim, win = args.n, args.k, args.window
        feat = ((n - kdim + 1) // win) ** 2
        spec = workloads.CnnSpec(
            conv_kernel=tuple(map(tuple, rng.integers(-3, 4, size=(kdim, kdim)))),
            pool_window=win,
            fc_weights=tuple(map(tuple, rng.integers(-3, 4, size=(args.outputs, feat)))),
            fc_bias=tuple(int(v) for v in rng.integers(-10, 10, size=args.outputs)),
            width=args.w,
        )
        image = rng.integers(0, 16, size=(n, n))
        _, report = workloads.run_cnn_forward(engine, spec, image)
    else:
        dims = {
            "madd": lambda: {"m": args.m, "n": args.n},
            "gemm": lambda: {"m": args.m, "n": args.n, "k": args.k,
                             "alpha": args.alpha, "beta": args.beta},
            "conv": lambda: {"n": args.n, "k": args.k},
            "maxpool": lambda: {"n": args.n, "window": args.window},
            "fc": lambda: {"n_in": args.n_in, "n_out": args.n_out},
        }[workload]()
        spec = workloads.KernelSpec(workload, dims, width=args.w)
        report = workloads.run_kernel(engine, spec, seed=seed)
    if getattr(args, "inject_fault", False):
        report.oracle_match = False
        report.extra["injected_fault"] = True
    report.trace_path = _write_trace(Path(cfg["out"]), engine)
    return report


def _run_single_job(payload):
    cfg, workload, argv, sweep_value = payload
    parser = build_parser()
    args = parser.parse_args(argv)
    return _run_single(cfg, workload, args, sweep_value)


def cmd_run(cfg: dict, args, argv: list[str]) -> int:
    workload = args.workload
    known = ("bitmap", "madd", "gemm", "conv", "maxpool", "fc", "cnn")
    if workload not in known:
        print(f"error: unknown workload {workload!r}; expected one of {known}",
              file=sys.stderr)
        return EXIT_USAGE
    if workload == "bitmap":
        args.criteria_list = [int(tok) for tok in str(args.criteria).split(",")]
        sweep = args.criteria_list if len(args.criteria_list) > 1 else [None]
    else:
        sweep = [None]
    jobs = cfg["jobs"]
    if jobs > 1 and len(sweep) > 1:
        payloads = [(cfg, workload, argv, sv) for sv in sweep]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(_run_single_job, payloads))
    else:
        reports = [_run_single(cfg, workload, args, sv) for sv in sweep]
    _write_reports(Path(cfg["out"]), reports)
    for r in reports:
        status = "ok" if r.oracle_match else "MISMATCH"
        print(f"{r.workload}: {status}, {r.cycles:g} cycles, "
              f"{r.energy_pj:.2f} pJ -> {cfg['out']}/report.json")
    return EXIT_OK if all(r.oracle_match for r in reports) else EXIT_MISMATCH


def _op_engine(cfg: dict) -> tuple[Engine, DBC, DBC]:
    engine = build_engine(cfg)
    return engine, engine.pim_dbc(0, 0, 0), engine.pim_dbc(0, 0, 1)


def cmd_op(cfg: dict, args) -> int:
    """Run one operation on literal operands; print result plus costs."""
    engine, main, scratch = _op_engine(cfg)
    w = args.w
    stride = 2 * w
    name = args.op_name
    operands = [int(tok, 0) for tok in args.operands]
    if name == "add5":
        if len(operands) > main.trd - 2:
            print(f"error: at most {main.trd - 2} operands", file=sys.stderr)
            return EXIT_USAGE
        for i, v in enumerate(operands):
            main.write_row(1 + i, packing.pack_words([v], main.x, w, main.x))
        for i in range(len(operands), main.trd - 2):
            main.write_row(1 + i, np.zeros(main.x, dtype=np.uint8))
        row = main.add_multi(
            AddLayout(k_operands=max(len(operands), 2), n_bits=w), base=0
        )
        result = packing.unpack_words(row, main.x, w + 3, 1)[0]
    elif name == "mulc":
        schedule = arithmetic.plan_const_mul(args.const, main.trd)
        main.write_row(20, packing.pack_words([operands[0]], stride, w, main.x))
        row = arithmetic.execute_mul_schedule(main, 20, schedule, w, 1)
        result = packing.unpack_words(row, stride, stride, 1)[0]
        print(f"schedule: {len(schedule.steps)} addition steps")
    elif name == "mul":
        a, b = operands
        a_row = packing.pack_words([a], stride, w, main.x)
        b_row = packing.pack_words([b], stride, w, main.x)
        row = arithmetic.mul_optimized(main, scratch, a_row, b_row, w)
        result = packing.unpack_words(row, stride, stride, 1)[0]
    elif name == "bbop":
        op = args.operands[0].upper()
        vals = [int(tok, 0) for tok in args.operands[1:]]
        bits = max(v.bit_length() for v in vals) if vals else 1
        for i, v in enumerate(vals):
            main.write_row(i, packing.pack_words([v], main.x, max(bits, 1), main.x))
        row = main.bulk_bitwise(op, list(range(len(vals))))
        result = packing.unpack_words(row, main.x, max(bits, 1), 1)[0]
        print(f"0x{result:X}")
        print(f"cycles: {engine.counters.cycles:g}  "
              f"energy: {engine.counters.energy_pj:.4f} pJ")
        return EXIT_OK
    elif name == "max":
        if len(operands) > main.trd - 2:
            print(f"error: at most {main.trd - 2} operands", file=sys.stderr)
            return EXIT_USAGE
        for i, v in enumerate(operands):
            main.write_row(1 + i, packing.pack_words([v], main.x, w, main.x))
        row = arithmetic.max_reduce(main, len(operands), w, base=0)
        result = packing.unpack_words(row, main.x, w, 1)[0]
    else:
        print(f"error: unknown op {name!r}; expected add5|mulc|mul|bbop|max",
              file=sys.stderr)
        return EXIT_USAGE
    print(result)
    print(f"cycles: {engine.counters.cycles:g}  "
          f"energy: {engine.counters.energy_pj:.4f} pJ")
    return EXIT_OK


def cmd_calibrate(cfg: dict) -> int:
    try:
        table = (
            cost.CostTable.load(cfg["cost_table"])
            if cfg["cost_table"]
            else cost.CostTable.default()
        )
    except OSError as e:
        print(f"error: cannot read cost table: {e}", file=sys.stderr)
        return EXIT_USAGE
    engine = build_engine(cfg)
    report = cost.calibrate_check(table, geometry=engine.geometry)
    for c in report.checks:
        status = "ok" if c.ok else "MISMATCH"
        print(f"{c.name}: {c.actual_cycles:g} cycles "
              f"(target {c.expected_cycles:g}), {c.actual_energy:.4f} pJ "
              f"(target {c.expected_energy:.4f}) [{status}]")
        if not c.ok:
            for prim, d in sorted(c.breakdown.items()):
                print(f"    {prim}: {d['cycles']:g} cycles, "
                      f"{d['energy_pj']:.4f} pJ")
    print(f"area overhead: {report.area_pct:.2f}% "
          f"[{'ok' if report.area_ok else 'MISMATCH'}]")
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "calibration.json").write_text(
        json.dumps(report.as_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    return EXIT_OK if report.ok else EXIT_MISMATCH


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pirm",
        description="Transverse-read processing-in-memory simulator",
    )
    parser.add_argument("--config", help="key = value configuration file")
    parser.add_argument("--trd", type=int, help="transverse read distance")
    parser.add_argument("--seed", type=int, help="workload RNG seed")
    parser.add_argument("--out", help="output directory for reports")
    parser.add_argument("--trace", action="store_true", default=None,
                        help="dump per-micro-op trace files")
    parser.add_argument("--jobs", type=int, help="parallel sweep workers")
    sub = parser.add_subparsers(dest="command")

    run_p = sub.add_parser("run", help="execute a workload against its oracle")
    run_p.add_argument("workload")
    run_p.add_argument("--records", type=int, default=65536)
    run_p.add_argument("--columns", type=int, default=8)
    run_p.add_argument("--criteria", default="5",
                       help="criteria count, or comma list to sweep")
    run_p.add_argument("--density", type=float, default=0.5)
    run_p.add_argument("--m", type=int, default=8)
    run_p.add_argument("--n", type=int, default=8)
    run_p.add_argument("--k", type=int, default=3)
    run_p.add_argument("--alpha", type=int, default=1)
    run_p.add_argument("--beta", type=int, default=1)
    run_p.add_argument("--window", type=int, default=2)
    run_p.add_argument("--n-in", type=int, default=4)
    run_p.add_argument("--n-out", type=int, default=4)
    run_p.add_argument("--outputs", type=int, default=4)
    run_p.add_argument("--w", type=int, default=8)
    run_p.add_argument("--inject-fault", action="store_true",
                       help="corrupt the result to exercise the mismatch path")

    op_p = sub.add_parser("op", help="one operation on literal operands")
    op_p.add_argument("op_name")
    op_p.add_argument("operands", nargs="*")
    op_p.add_argument("--w", type=int, default=8)
    op_p.add_argument("--const", type=int, default=0)

    sub.add_parser("calibrate", help="check the cost table against its locks")
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    if args.command is None:
        parser.print_help()
        return EXIT_USAGE
    overrides = {
        "trd": args.trd,
        "seed": args.seed,
        "out": args.out,
        "trace": args.trace,
        "jobs": args.jobs,
    }
    try:
        cfg = load_config(args.config, overrides)
        if args.command == "run":
            return cmd_run(cfg, args, argv)
        if args.command == "op":
            return cmd_op(cfg, args)
        if args.command == "calibrate":
            return cmd_calibrate(cfg)
    except CalibrationMismatch as e:
        print(f"calibration mismatch: {e}", file=sys.stderr)
        return EXIT_MISMATCH
    except (ConfigError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except PirmError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
