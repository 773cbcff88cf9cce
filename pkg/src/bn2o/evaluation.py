"""D-lists and average cumulative ratio curves.

A D-list is the N most probable diagnoses under a factorized posterior. Each
diagnosis is scored by its exact joint probability with the observations, and
a case's cumulative ratio curve is the running sum of those joints divided by
Z = max(best joint found by any compared method, joint of the reference
diagnosis).
"""

from __future__ import annotations

import csv
import heapq
import io
from dataclasses import dataclass, field

import numpy as np

from .model import Bn2oNetwork, ObservationModel, ObservationVector, log_joint_batch

Z_CLIP = 1e-9


@dataclass
class DList:
    configs: np.ndarray  # (M, K) bool, best first
    log_q: np.ndarray
    scores: np.ndarray | None = None  # ln P(d^m, o)
    method: str = ""
    case_id: int | None = None

    def __len__(self):
        return len(self.configs)


@dataclass
class CurveTable:
    curves: dict  # method -> (N,) average curve
    n_cases: int
    log_z: list = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["rank", "method", "mean_cumulative_ratio", "n_cases"])
        for method, curve in self.curves.items():
            for r, value in enumerate(curve, start=1):
                writer.writerow([r, method, repr(float(value)), self.n_cases])
        return buf.getvalue()


def top_n(z, n: int) -> tuple[np.ndarray, np.ndarray]:
    """The n most probable configurations of prod_k z_k^d_k (1 - z_k)^(1 - d_k), in order.

    Best-first search over flip sets relative to the mode. Flip costs are
    sorted ascending; a flip set ending at sorted position j has two children,
    one appending j + 1 and one replacing j by j + 1, so every subset is
    reached exactly once and popped in nondecreasing cost. Equal costs pop in
    lexicographic order of their sorted-position tuples.
    Returns (configs, log_q).
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    z = np.clip(np.asarray(z, dtype=float), Z_CLIP, 1.0 - Z_CLIP)
    K = len(z)
    log_on, log_off = np.log(z), np.log1p(-z)
    mode = z > 0.5
    mode_log_q = float(np.where(mode, log_on, log_off).sum())
    cost = np.abs(log_on - log_off)
    order = np.argsort(cost, kind="stable")
    sorted_cost = cost[order]
    n = min(n, 1 << K) if K < 63 else n

    configs, log_qs = [], []
    heap = [(0.0, ())]
    while heap and len(configs) < n:
        c, flips = heapq.heappop(heap)
        d = mode.copy()
        idx = order[list(flips)]
        d[idx] = ~d[idx]
        configs.append(d)
        log_qs.append(mode_log_q - c)
        last = flips[-1] if flips else -1
        nxt = last + 1
        if nxt < K:
            heapq.heappush(heap, (c + sorted_cost[nxt], flips + (nxt,)))
            if flips:
                heapq.heappush(heap, (c - sorted_cost[last] + sorted_cost[nxt], flips[:-1] + (nxt,)))
    return np.array(configs, dtype=bool).reshape(-1, K), np.array(log_qs)


def make_dlist(z, n: int, method: str = "", case_id=None) -> DList:
    configs, log_q = top_n(z, n)
    return DList(configs, log_q, method=method, case_id=case_id)


def score_dlist(net: Bn2oNetwork, obsmodel: ObservationModel, dlist: DList, o: ObservationVector) -> DList:
    """Attach ln P(d^m, o) under the generative (augmented) model."""
    dlist.scores = log_joint_batch(net, obsmodel, dlist.configs, o)
    return dlist


class UnusableCase(ValueError):
    pass


def cumulative_curve(scored: dict, reference_score: float) -> tuple[dict, float]:
    """Per-method cumulative ratio curves for one case and the case's ln Z.

    ``scored`` maps method name to its scored D-list (or directly to its array
    of log joint scores in D-list order).
    """
    scores = {m: np.asarray(dl.scores if isinstance(dl, DList) else dl, dtype=float)
              for m, dl in scored.items()}
    best = max([reference_score] + [float(s.max()) for s in scores.values() if s.size])
    if not np.isfinite(best):
        raise UnusableCase("every diagnosis has zero joint probability")
    curves = {m: np.cumsum(np.exp(s - best)) for m, s in scores.items()}
    return curves, best


def average_curves(per_case: list, n: int | None = None) -> CurveTable:
    """Mean curve per rank per method; shorter curves are held at their last value."""
    if not per_case:
        raise ValueError("no usable cases to average")
    methods = list(per_case[0].keys())
    if n is None:
        n = max(len(c[m]) for c in per_case for m in methods)
    averaged = {}
    for m in methods:
        rows = []
        for c in per_case:
            curve = np.asarray(c[m], dtype=float)[:n]
            if len(curve) < n:
                curve = np.concatenate([curve, np.full(n - len(curve), curve[-1] if len(curve) else 0.0)])
            rows.append(curve)
        averaged[m] = np.mean(rows, axis=0)
    return CurveTable(averaged, len(per_case))


def evaluate_case(net: Bn2oNetwork, obsmodel: ObservationModel, o: ObservationVector, reference,
                  marginals: dict, n: int = 100):
    """D-lists for every method's marginals on one case, scored and turned into curves."""
    ref = np.zeros(net.num_diseases, dtype=bool)
    ref[np.asarray(reference)] = True
    ref_score = float(log_joint_batch(net, obsmodel, ref[None, :], o)[0])
    scored = {m: score_dlist(net, obsmodel, make_dlist(z, n, m), o) for m, z in marginals.items()}
    curves, log_z = cumulative_curve(scored, ref_score)
    return curves, log_z, ref_score, scored


def evaluate_benchmark(net: Bn2oNetwork, bench, marginals_by_method: dict, n: int = 100):
    """Average curves over a benchmark; ``marginals_by_method[m][case_id]`` is a z vector.

    Returns the CurveTable and per-case records (ln Z, reference score, top-1 scores).
    """
    per_case, records = [], []
    for case in bench.cases:
        zs = {m: table[case.id] for m, table in marginals_by_method.items() if table.get(case.id) is not None}
        if len(zs) != len(marginals_by_method):
            records.append({"id": int(case.id), "usable": False, "reason": "missing marginals"})
            continue
        try:
            curves, log_z, ref_score, scored = evaluate_case(net, case.obsmodel, case.obs, case.d, zs, n)
        except UnusableCase as exc:
            records.append({"id": int(case.id), "usable": False, "reason": str(exc)})
            continue
        per_case.append(curves)
        records.append({
            "id": int(case.id),
            "usable": True,
            "log_Z": log_z,
            "reference_score": ref_score,
            "top1_score": {m: float(dl.scores[0]) for m, dl in scored.items()},
        })
    table = average_curves(per_case, n)
    table.log_z = [r["log_Z"] for r in records if r["usable"]]
    return table, records
