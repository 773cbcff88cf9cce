"""Per-benchmark inference runners and the observation-bias experiment grid."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import aisbn, exact, jj99
from .evaluation import CurveTable, evaluate_benchmark
from .model import Bn2oNetwork, ObservationModel
from .netgen import DESK, FULL, NetGenConfig, generate
from .recog import LR, MLP, RecognitionModel, TrainerConfig, predict_case, train_on_network
from .sampler import BenchmarkSet, case_rng, gen_benchmark

log = logging.getLogger(__name__)

P_PLUS_GRID = (0.0, 0.5, 0.75, 0.9)
P_MINUS_GRID = (0.5, 1.0)
TRAIN_BIAS = (0.5, 1.0)


def worker_count() -> int:
    return max(1, int(os.environ.get("BN2O_THREADS", "1")))


def _map_cases(fn, cases, workers=None):
    workers = worker_count() if workers is None else workers
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(fn, cases))
    return [fn(c) for c in cases]


def infer_recog(model: RecognitionModel, bench: BenchmarkSet):
    return [(c.id, predict_case(model, c.obs), {}) for c in bench.cases]


def infer_prior(net: Bn2oNetwork, bench: BenchmarkSet):
    return [(c.id, np.array(net.prior), {}) for c in bench.cases]


def infer_jj99(net: Bn2oNetwork, bench: BenchmarkSet, tol: float = 1e-8, workers=None):
    def one(case):
        state = jj99.optimize(net, case.obs.pos, case.obs.neg, tol)
        if not state.converged:
            log.warning("jj99 hit the iteration cap on case %d (|grad| = %.3g)", case.id, state.grad_norm)
        return case.id, state.marginals, {"bound": state.bound, "iterations": state.iterations,
                                          "converged": state.converged}
    return _map_cases(one, bench.cases, workers)


def infer_aisbn(net: Bn2oNetwork, bench: BenchmarkSet, cfg: aisbn.AisbnConfig, workers=None):
    def one(case):
        rng = case_rng(cfg.seed, case.id, stream=2)
        try:
            res = aisbn.run(net, case.obs.pos, case.obs.neg, cfg, rng)
        except aisbn.EstimationFailure as exc:
            log.warning("aisbn failed on case %d: %s", case.id, exc)
            return case.id, None, {"error": str(exc)}
        return case.id, res.marginals, {"ess": res.ess, "log_evidence": res.log_evidence}
    return _map_cases(one, bench.cases, workers)


def infer_exact(net: Bn2oNetwork, bench: BenchmarkSet, mode: str = "enum", augmented: bool = True, workers=None):
    def one(case):
        try:
            if mode == "enum":
                post = exact.enumerate_posterior(net, case.obsmodel if augmented else None, case.obs)
            elif mode == "quickscore":
                post = exact.quickscore(net, case.obs.pos, case.obs.neg)
            else:
                raise ValueError(f"unknown oracle mode {mode!r}")
        except (exact.ImpossibleEvidence, exact.CancellationError) as exc:
            return case.id, None, {"error": str(exc)}
        return case.id, post.marginals, {"log_evidence": post.log_evidence}
    return _map_cases(one, bench.cases, workers)


@dataclass(frozen=True)
class Scale:
    name: str
    net: NetGenConfig
    cases: int
    samples: int
    hidden: int
    aisbn: aisbn.AisbnConfig
    dlist_length: int = 100
    long_running: bool = False


SCALES = {
    "desk": Scale("desk", DESK, cases=100, samples=100_000, hidden=100, aisbn=aisbn.AisbnConfig()),
    "paper": Scale("paper", FULL, cases=1000, samples=10_000_000, hidden=1000, aisbn=aisbn.AisbnConfig(),
                   long_running=True),
}


def train_lr(net: Bn2oNetwork, p_plus: float, p_minus: float, samples: int, seed: int) -> RecognitionModel:
    cfg = TrainerConfig(samples=samples, p_plus=p_plus, p_minus=p_minus, seed=seed)
    return train_on_network(net, cfg, LR).model


def train_mlp(net: Bn2oNetwork, base: RecognitionModel, hidden: int, samples: int, seed: int) -> RecognitionModel:
    cfg = TrainerConfig(samples=samples, p_plus=TRAIN_BIAS[0], p_minus=TRAIN_BIAS[1], seed=seed)
    return train_on_network(net, cfg, MLP, hidden=hidden, init_from=base).model


def run_cell(net: Bn2oNetwork, bench: BenchmarkSet, methods: dict, n: int = 100) -> tuple[CurveTable, list]:
    """Evaluate named marginal producers on one benchmark.

    ``methods`` maps a label to a callable bench -> [(case id, z, extras)].
    """
    marginals = {}
    for label, fn in methods.items():
        log.info("running %s on %d cases", label, len(bench))
        marginals[label] = {cid: z for cid, z, _ in fn(bench)}
    return evaluate_benchmark(net, bench, marginals, n)


def reproduce_grid(scale: Scale, seed: int, with_mlp: bool = False, with_aisbn: bool = True,
                   cells=None, net: Bn2oNetwork | None = None):
    """Curve tables for every (p_plus, p_minus) cell of the bias grid.

    Every cell gets the main LR (trained at p_plus=0.5, p_minus=1), JJ99,
    optionally AIS-BN and the MLP, and a bias-matched LR trained at the
    cell's own (p_plus, p_minus). Yields ((p_plus, p_minus), table, records).
    """
    net = net or generate(replace(scale.net, seed=seed))
    models = {}

    def lr_for(bias):
        if bias not in models:
            log.info("training LR at p_plus=%g p_minus=%g on %d samples", *bias, scale.samples)
            models[bias] = train_lr(net, *bias, scale.samples, seed)
        return models[bias]

    main = lr_for(TRAIN_BIAS)
    mlp = train_mlp(net, main, scale.hidden, scale.samples, seed) if with_mlp else None
    cells = cells or [(pp, pm) for pp in P_PLUS_GRID for pm in P_MINUS_GRID]
    for index, (pp, pm) in enumerate(cells):
        bench = gen_benchmark(net, ObservationModel(pp, pm), scale.cases, 5, seed + 1000 * (index + 1))
        methods = {"lr": lambda b: infer_recog(main, b)}
        if mlp is not None:
            methods["mlp"] = lambda b: infer_recog(mlp, b)
        methods["jj99"] = lambda b: infer_jj99(net, b)
        if with_aisbn:
            methods["aisbn"] = lambda b: infer_aisbn(net, b, replace(scale.aisbn, seed=seed))
        matched = lr_for((pp, pm))
        methods["lr_matched"] = lambda b, m=matched: infer_recog(m, b)
        table, records = run_cell(net, bench, methods, scale.dlist_length)
        yield (pp, pm), table, records
