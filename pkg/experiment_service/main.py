# experiment_service/main.py
import argparse
import json
import os
import pathlib
import sys
import time
import traceback
from typing import List, Optional

from common_utils.errors import ToolkitError, UsageError
from common_utils.logger.client import LoggerClient
from common_utils.report.client import ReportClient
from construction_service.gf2matrix import read_alist, write_alist
from construction_service.graphmetrics import compute_metrics
from experiment_service.experiments import (
    TEMPLATE_DIR,
    ExperimentSpec,
    build_code,
    code_metrics,
    list_presets,
    load_spec,
    preset,
    run_experiment,
    run_pareto,
    write_pareto_csv,
)
from experiment_service.manifest import RunManifest, config_digest, write_manifest
from simulation_service.montecarlo import (
    parse_snr_grid,
    read_curve_csv,
    run_sweep,
    snr_at_bler,
    snr_gain,
    write_curve_csv,
)

logger = LoggerClient("cli")

METHODS = {"hybrid": "hybrid", "peg": "peg", "random": "random", "block-peg": "block_peg"}


# Runtime configuration
class RuntimeSettings:
    def __init__(self):
        self.output_dir = pathlib.Path(os.environ.get("LDPC_OUTPUT_DIR", "./results"))
        threads = os.environ.get("LDPC_THREADS", "").strip()
        try:
            self.threads = int(threads) if threads else (os.cpu_count() or 1)
        except ValueError:
            raise UsageError(f"LDPC_THREADS must be an integer, got {threads!r}")


def _resolve_spec(args) -> ExperimentSpec:
    if args.config:
        return load_spec(args.config)
    if args.preset:
        return preset(args.preset)
    raise UsageError("one of --preset or --config is required")


def _threads(args, settings: RuntimeSettings) -> int:
    threads = args.threads if args.threads is not None else settings.threads
    if threads < 1:
        raise UsageError("--threads must be >= 1")
    return threads


def _out_dir(args, settings: RuntimeSettings) -> pathlib.Path:
    return pathlib.Path(args.out) if args.out else settings.output_dir


def cmd_construct(args, settings: RuntimeSettings, argv: List[str]) -> int:
    spec = _resolve_spec(args)
    method = METHODS[args.method]
    seed = args.seed if args.seed is not None else spec.seeds[0]
    out = _out_dir(args, settings)
    out.mkdir(parents=True, exist_ok=True)

    H, timings = build_code(method, spec, seed, _threads(args, settings))
    alist_path = out / f"{method}-{seed}.alist"
    write_alist(H, alist_path)
    record = {"method": method, "seed": seed, "alist": alist_path.name,
              "construct_seconds": round(sum(timings.values()), 3),
              "metrics": code_metrics(H, spec, seed)}
    (out / "metrics.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    write_manifest(out, RunManifest(command=argv, config_digest=config_digest(spec),
                                    seeds=[seed], phase_seconds=timings))
    print(str(alist_path))
    return 0


def cmd_metrics(args, settings: RuntimeSettings, argv: List[str]) -> int:
    H = read_alist(args.input)
    metrics = compute_metrics(H, block_size=args.block_size, trap42=args.trap42)
    print(metrics.model_dump_json(indent=2))
    return 0


def cmd_simulate(args, settings: RuntimeSettings, argv: List[str]) -> int:
    H = read_alist(args.input)
    grid = parse_snr_grid(args.snr_grid)
    code_id = args.code_id or pathlib.Path(args.input).stem
    start = time.perf_counter()
    curve = run_sweep(H, grid, args.trials, args.seed, args.mode, _threads(args, settings), code_id=code_id)
    elapsed = time.perf_counter() - start

    out = pathlib.Path(args.out) if args.out else settings.output_dir / f"{code_id}.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_curve_csv(curve, out)
    write_manifest(out.parent, RunManifest(
        command=argv,
        config_digest=config_digest({"grid": grid, "trials": args.trials, "mode": args.mode}),
        seeds=[args.seed],
        phase_seconds={"simulate": elapsed},
    ))
    print(str(out))
    return 0


def cmd_compare(args, settings: RuntimeSettings, argv: List[str]) -> int:
    curve_a = read_curve_csv(args.a, args.code_a)
    curve_b = read_curve_csv(args.b, args.code_b)
    gain = snr_gain(curve_a, curve_b, args.target_bler)
    report = ReportClient(TEMPLATE_DIR).render("compare", {
        "target_bler": args.target_bler,
        "label_a": curve_a.code_id or args.a,
        "label_b": curve_b.code_id or args.b,
        "snr_a": snr_at_bler(curve_a, args.target_bler),
        "snr_b": snr_at_bler(curve_b, args.target_bler),
        "gain": gain,
    })
    sys.stdout.write(report)
    return 0


def cmd_pareto(args, settings: RuntimeSettings, argv: List[str]) -> int:
    spec = _resolve_spec(args)
    out = _out_dir(args, settings)
    start = time.perf_counter()
    points = run_pareto(spec, out_dir=out, workers=_threads(args, settings), seed=args.seed)
    write_pareto_csv(points, out / "pareto.csv")
    write_manifest(out, RunManifest(
        command=argv,
        config_digest=config_digest(spec),
        seeds=[args.seed if args.seed is not None else spec.seeds[0]],
        phase_seconds={"construct": time.perf_counter() - start},
    ))
    print(str(out / "pareto.csv"))
    return 0


def cmd_run(args, settings: RuntimeSettings, argv: List[str]) -> int:
    spec = _resolve_spec(args)
    summary = run_experiment(spec, _out_dir(args, settings), _threads(args, settings), command=argv)
    print(summary.model_dump_json(indent=2))
    return 0


def cmd_presets(args, settings: RuntimeSettings, argv: List[str]) -> int:
    for name in list_presets():
        print(name)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ldpc-tasa", description="LDPC parity-check matrix construction and evaluation")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_threads(p):
        p.add_argument("--threads", type=int, default=None, help="worker cap (default: LDPC_THREADS or CPU count)")

    def add_spec(p):
        group = p.add_mutually_exclusive_group()
        group.add_argument("--preset", help="named preset, see `presets`")
        group.add_argument("--config", help="JSON experiment config")

    p = sub.add_parser("construct", help="build one parity-check matrix")
    p.add_argument("--method", choices=sorted(METHODS), required=True)
    add_spec(p)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", help="output directory")
    add_threads(p)
    p.set_defaults(handler=cmd_construct)

    p = sub.add_parser("metrics", help="structural metrics of an alist matrix")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--block-size", type=int, default=None)
    p.add_argument("--trap42", action="store_true")
    add_threads(p)
    p.set_defaults(handler=cmd_metrics)

    p = sub.add_parser("simulate", help="BLER sweep over BPSK/AWGN")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--snr-grid", default="0:7.5:0.5", help="start:stop:step or comma list")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=["zero", "systematic"], default="zero")
    p.add_argument("--code-id", default=None)
    p.add_argument("--out", help="CSV path")
    add_threads(p)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("compare", help="SNR gain of curve a over curve b")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--code-a", default=None)
    p.add_argument("--code-b", default=None)
    p.add_argument("--target-bler", type=float, default=0.01)
    add_threads(p)
    p.set_defaults(handler=cmd_compare)

    p = sub.add_parser("pareto", help="block-structure Pareto sweep")
    add_spec(p)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", help="output directory")
    add_threads(p)
    p.set_defaults(handler=cmd_pareto, preset="set4-96-b4")

    p = sub.add_parser("run", help="full experiment driver")
    add_spec(p)
    p.add_argument("--out", help="output directory")
    add_threads(p)
    p.set_defaults(handler=cmd_run)

    p = sub.add_parser("presets", help="list preset names")
    add_threads(p)
    p.set_defaults(handler=cmd_presets)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on bad flags and 0 on --help
        return int(e.code or 0)

    try:
        settings = RuntimeSettings()
        return args.handler(args, settings, argv)
    except ToolkitError as e:
        logger.error("Command failed", {"command": args.command, "detail": e.detail, "exit_code": e.exit_code})
        print(f"error: {e.detail}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        logger.error("File access failed", {"command": args.command, "error": str(e)})
        print(f"error: {e}", file=sys.stderr)
        return UsageError.exit_code
    except Exception as e:
        logger.error("Unexpected failure", {"command": args.command, "error": str(e),
                                            "traceback": traceback.format_exc()})
        print(f"internal error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
