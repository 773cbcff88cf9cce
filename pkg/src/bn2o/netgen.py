"""Synthetic QMR-DT-like network generation.

Only summary statistics of the real network are public: prior and leak
ranges, the five-value strength support and a mean disease degree of 70.
Everything else here is an assumption: log-uniform priors and leaks, a
uniform integer degree around the mean, and uniform strength choice.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import asdict, dataclass

import numpy as np

from .model import GENERATOR_VERSION, Bn2oNetwork

STRENGTHS = (0.025, 0.2, 0.5, 0.8, 0.985)


@dataclass(frozen=True)
class NetGenConfig:
    K: int = 600
    I: int = 4000
    prior_range: tuple = (2e-5, 2e-2)
    leak_range: tuple = (5.8e-8, 0.153)
    strengths: tuple = STRENGTHS
    mean_degree: int = 70
    degree_half_width: int = 35
    seed: int = 0

    def check(self) -> None:
        lo, hi = self.prior_range
        if not 0 < lo <= hi < 1:
            raise ValueError(f"bad prior range {self.prior_range}")
        lo, hi = self.leak_range
        if not 0 < lo <= hi < 1:
            raise ValueError(f"bad leak range {self.leak_range}")
        if not self.strengths or not all(0 < s < 1 for s in self.strengths):
            raise ValueError("strengths must lie in (0, 1)")
        if self.K < 1 or self.I < 1:
            raise ValueError("K and I must be positive")
        if self.mean_degree - self.degree_half_width < 1:
            raise ValueError("minimum disease degree must be at least 1")
        if self.mean_degree + self.degree_half_width > self.I:
            raise ValueError("maximum disease degree exceeds the number of findings")

    @classmethod
    def from_dict(cls, doc: dict) -> "NetGenConfig":
        doc = dict(doc)
        for key in ("prior_range", "leak_range", "strengths"):
            if key in doc:
                doc[key] = tuple(doc[key])
        return cls(**doc)

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("prior_range", "leak_range", "strengths"):
            d[key] = list(d[key])
        return d


DESK = NetGenConfig(K=60, I=400)
FULL = NetGenConfig()


def _log_uniform(rng, lo, hi, size):
    return np.exp(rng.uniform(np.log(lo), np.log(hi), size=size))


def generate(cfg: NetGenConfig) -> Bn2oNetwork:
    cfg.check()
    rng = np.random.default_rng(cfg.seed)
    strengths = np.asarray(cfg.strengths, dtype=float)

    prior = _log_uniform(rng, *cfg.prior_range, cfg.K)
    leak = _log_uniform(rng, *cfg.leak_range, cfg.I)
    degrees = rng.integers(cfg.mean_degree - cfg.degree_half_width,
                           cfg.mean_degree + cfg.degree_half_width + 1, size=cfg.K)

    parents = [[] for _ in range(cfg.I)]
    qs = [[] for _ in range(cfg.I)]
    for k in range(cfg.K):
        partners = rng.choice(cfg.I, size=degrees[k], replace=False)
        values = strengths[rng.integers(len(strengths), size=degrees[k])]
        for i, q in zip(partners, values):
            parents[i].append(k)
            qs[i].append(q)

    # repair: every finding needs a cause
    repaired = 0
    for i in range(cfg.I):
        if not parents[i]:
            parents[i].append(int(rng.integers(cfg.K)))
            qs[i].append(strengths[rng.integers(len(strengths))])
            repaired += 1

    # diseases were visited in increasing order, so parent lists are sorted
    meta = {"seed": cfg.seed, "generator": GENERATOR_VERSION, "config": cfg.to_dict(),
            "repaired_findings": repaired}
    return Bn2oNetwork.build(prior, leak, parents, qs, meta=meta)


def _histogram(values, bins):
    counts, edges = np.histogram(values, bins=bins)
    return {"edges": [float(e) for e in edges], "counts": [int(c) for c in counts]}


def stats(net: Bn2oNetwork) -> dict:
    """Structural summary of a network, JSON-serializable."""
    finding_degree = np.array([len(pa) for pa in net.parents])
    disease_degree = np.bincount(np.concatenate(net.parents), minlength=net.num_diseases)
    all_q = np.concatenate(net.q)
    # expected positives caused by one active disease: sum of its strengths
    q_per_disease = np.bincount(np.concatenate(net.parents), weights=all_q, minlength=net.num_diseases)
    log_bins = lambda x: np.logspace(np.log10(x.min()), np.log10(x.max()), 11) if x.min() < x.max() else 10
    return {
        "K": net.num_diseases,
        "I": net.num_findings,
        "num_edges": int(all_q.size),
        "parentless_findings": int(np.sum(finding_degree == 0)),
        "mean_disease_degree": float(disease_degree.mean()),
        "mean_finding_degree": float(finding_degree.mean()),
        "disease_degree_hist": dict(sorted(Counter(int(x) for x in disease_degree).items())),
        "finding_degree_hist": dict(sorted(Counter(int(x) for x in finding_degree).items())),
        "strength_hist": {repr(float(k)): v for k, v in sorted(Counter(float(x) for x in all_q).items())},
        "prior_hist": _histogram(net.prior, log_bins(net.prior)),
        "leak_hist": _histogram(net.leak, log_bins(net.leak)),
        "expected_positives_per_disease": float(q_per_disease.mean()),
    }


def small_network(K: int, I: int, seed: int = 0, prior_range=(0.05, 0.5), leak_range=(0.0, 0.2),
                  max_parents: int = 4, strength_range=(0.05, 0.95)) -> Bn2oNetwork:
    """Dense toy network with non-negligible priors, for checks against enumeration."""
    rng = np.random.default_rng(seed)
    prior = rng.uniform(*prior_range, size=K)
    leak = rng.uniform(*leak_range, size=I)
    parents, qs = [], []
    for _ in range(I):
        n = int(rng.integers(1, min(K, max_parents) + 1))
        parents.append(np.sort(rng.choice(K, size=n, replace=False)))
        qs.append(rng.uniform(*strength_range, size=n))
    return Bn2oNetwork.build(prior, leak, parents, qs, meta={"seed": seed, "generator": "small"})


def tiny_config(seed: int = 0) -> NetGenConfig:
    """K=10, I=40 preset with QMR-like strengths and priors high enough to matter."""
    return NetGenConfig(K=10, I=40, prior_range=(0.02, 0.2), leak_range=(1e-3, 0.05),
                        mean_degree=8, degree_half_width=4, seed=seed)
