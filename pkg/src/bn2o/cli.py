"""Command-line entry point: bn2o <subcommand> ...

Exit status is 0 on success, 1 on data errors and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import aisbn, pipeline
from .evaluation import evaluate_benchmark
from .files import (RunManifest, atomic_write, load_benchmark, load_network, marginals_line,
                    read_marginals)
from .model import ObservationModel
from .netgen import NetGenConfig, generate, stats
from .recog import LR, MLP, RecognitionModel, TrainerConfig, train_on_network
from .sampler import gen_benchmark

log = logging.getLogger("bn2o")


def _write_marginals(path, method, results):
    atomic_write(path, "".join(marginals_line(cid, method, z, **extra) + "\n" for cid, z, extra in results))


def cmd_gen_net(args):
    cfg = pipeline.SCALES[args.scale].net
    if args.config:
        doc = json.loads(Path(args.config).read_text())
        cfg = NetGenConfig.from_dict({**cfg.to_dict(), **doc})
    cfg = replace(cfg, seed=args.seed)
    manifest = RunManifest("gen-net", cfg.to_dict(), args.seed)
    if args.config:
        manifest.add_input(args.config)
    net = generate(cfg)
    atomic_write(args.out, net.to_json())
    manifest.write_beside(args.out)
    print(json.dumps(stats(net), indent=1))


def cmd_stats(args):
    print(json.dumps(stats(load_network(args.net)), indent=1))


def cmd_gen_bench(args):
    net = load_network(args.net)
    manifest = RunManifest("gen-bench", vars_of(args), args.seed)
    manifest.add_input(args.net)
    bench = gen_benchmark(net, ObservationModel(args.p_plus, args.p_minus), args.cases, args.diseases,
                          args.seed, workers=pipeline.worker_count())
    atomic_write(args.out, bench.to_jsonl())
    manifest.config["net_hash"] = bench.net_hash
    manifest.write_beside(args.out)


def cmd_train(args):
    net = load_network(args.net)
    manifest = RunManifest("train", vars_of(args), args.seed)
    manifest.add_input(args.net)
    base = None
    if args.init_from:
        base = RecognitionModel.from_json(Path(args.init_from).read_text())
        manifest.add_input(args.init_from)
    cfg = TrainerConfig(samples=args.samples, p_plus=args.p_plus, p_minus=args.p_minus, seed=args.seed,
                        batch_size=args.batch_size, lr0=args.lr0)
    result = train_on_network(net, cfg, args.kind, hidden=args.hidden, init_from=base)
    atomic_write(args.out, result.model.to_json())
    manifest.config["final_loss"] = result.loss_trace[-1] if result.loss_trace else None
    manifest.write_beside(args.out)


def cmd_infer(args):
    net = load_network(args.net)
    bench = load_benchmark(args.cases, net)
    manifest = RunManifest("infer", vars_of(args), args.seed)
    manifest.add_input(args.net)
    manifest.add_input(args.cases)
    label = args.label or args.method
    if args.method == "jj99":
        results = pipeline.infer_jj99(net, bench, args.tol)
    elif args.method == "aisbn":
        if args.seed is None:
            raise UsageError("--seed is required for aisbn")
        cfg = aisbn.AisbnConfig(phase1=args.phase1, phase2=args.phase2, seed=args.seed)
        results = pipeline.infer_aisbn(net, bench, cfg)
    elif args.method == "recog":
        if not args.model:
            raise UsageError("--model is required for recog")
        manifest.add_input(args.model)
        results = pipeline.infer_recog(RecognitionModel.from_json(Path(args.model).read_text()), bench)
    else:
        results = pipeline.infer_prior(net, bench)
    _write_marginals(args.out, label, results)
    manifest.write_beside(args.out)


def cmd_oracle(args):
    net = load_network(args.net)
    bench = load_benchmark(args.case_file, net)
    manifest = RunManifest("oracle", vars_of(args), None)
    manifest.add_input(args.net)
    manifest.add_input(args.case_file)
    results = pipeline.infer_exact(net, bench, args.mode, augmented=not args.unaugmented)
    _write_marginals(args.out, args.label or f"exact_{args.mode}", results)
    manifest.write_beside(args.out)


def cmd_eval(args):
    net = load_network(args.net)
    bench = load_benchmark(args.cases, net)
    manifest = RunManifest("eval", vars_of(args), None)
    manifest.add_input(args.net)
    manifest.add_input(args.cases)
    tables = {}
    for path in args.marginals:
        manifest.add_input(path)
        method, table = read_marginals(path)
        if method in tables:
            method = f"{method}:{Path(path).stem}"
        tables[method] = table
    curves, records = evaluate_benchmark(net, bench, tables, args.n)
    atomic_write(args.out, curves.to_csv())
    if args.per_case:
        atomic_write(args.per_case, "".join(json.dumps(r, sort_keys=True) + "\n" for r in records))
    manifest.write_beside(args.out)


def cmd_reproduce(args):
    scale = pipeline.SCALES[args.scale]
    if args.cases:
        scale = replace(scale, cases=args.cases)
    if args.samples:
        scale = replace(scale, samples=args.samples)
    echo = {"scale": scale.name, "cases": scale.cases, "training_samples": scale.samples,
            "hidden": scale.hidden, "network": scale.net.to_dict(), "seed": args.seed}
    if scale.long_running and not args.confirm_long:
        print(json.dumps(echo, indent=1))
        print("full-size scale runs for days; rerun with --confirm-long to execute", file=sys.stderr)
        return
    out_dir = Path(args.out_dir)
    for (pp, pm), table, records in pipeline.reproduce_grid(scale, args.seed, with_mlp=args.mlp,
                                                            with_aisbn=not args.no_aisbn):
        stem = f"grid_pplus{pp:g}_pminus{pm:g}"
        atomic_write(out_dir / f"{stem}.csv", table.to_csv())
        atomic_write(out_dir / f"{stem}.cases.jsonl",
                     "".join(json.dumps(r, sort_keys=True) + "\n" for r in records))
        log.info("wrote %s (%d usable cases)", stem, table.n_cases)
    manifest = RunManifest("reproduce-grid", echo, args.seed)
    manifest.write_beside(out_dir / "grid")


class UsageError(Exception):
    pass


def vars_of(args) -> dict:
    return {k: v for k, v in vars(args).items() if k != "func"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bn2o", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-net", help="generate a synthetic network")
    p.add_argument("--config", help="JSON file overriding NetGenConfig fields")
    p.add_argument("--scale", choices=sorted(pipeline.SCALES), default="paper")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_net)

    p = sub.add_parser("stats", help="print network statistics")
    p.add_argument("--net", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("gen-bench", help="sample a benchmark of biased test cases")
    p.add_argument("--net", required=True)
    p.add_argument("--p-plus", type=float, required=True)
    p.add_argument("--p-minus", type=float, required=True)
    p.add_argument("--cases", type=int, default=1000)
    p.add_argument("--diseases", type=int, default=5)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_bench)

    p = sub.add_parser("train", help="train a recognition network")
    p.add_argument("--net", required=True)
    p.add_argument("--p-plus", type=float, default=0.5)
    p.add_argument("--p-minus", type=float, default=1.0)
    p.add_argument("--kind", choices=(LR, MLP), default=LR)
    p.add_argument("--init-from", help="LR model whose W is frozen into the MLP")
    p.add_argument("--hidden", type=int, default=100)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--batch-size", type=int, default=100)
    p.add_argument("--lr0", type=float, default=0.01)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="approximate posterior marginals for a benchmark")
    p.add_argument("--method", choices=("jj99", "aisbn", "recog", "prior"), required=True)
    p.add_argument("--net", required=True)
    p.add_argument("--cases", required=True)
    p.add_argument("--model")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--phase1", type=int, default=25_000)
    p.add_argument("--phase2", type=int, default=75_000)
    p.add_argument("--seed", type=int)
    p.add_argument("--label", help="method name recorded in the output")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("oracle", help="exact posterior marginals")
    p.add_argument("--net", required=True)
    p.add_argument("--case-file", required=True)
    p.add_argument("--mode", choices=("enum", "quickscore"), default="enum")
    p.add_argument("--unaugmented", action="store_true", help="enumerate ignoring unobserved findings")
    p.add_argument("--label")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("eval", help="average cumulative ratio curves")
    p.add_argument("--net", required=True)
    p.add_argument("--cases", required=True)
    p.add_argument("--marginals", nargs="+", required=True)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--per-case")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("reproduce-grid", help="run the full observation-bias grid")
    p.add_argument("--scale", choices=sorted(pipeline.SCALES), default="desk")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--cases", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--mlp", action="store_true", help="also train and evaluate the MLP")
    p.add_argument("--no-aisbn", action="store_true")
    p.add_argument("--confirm-long", action="store_true")
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"bn2o: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError, ArithmeticError, RuntimeError) as exc:
        print(f"bn2o: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
