"""Forward sampling from the augmented network and benchmark generation."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .model import NEG, POS, UNK, Bn2oNetwork, ObservationModel, ObservationVector


def case_rng(seed: int, index: int, stream: int = 0) -> np.random.Generator:
    """Independent generator for case ``index`` derived from the master seed."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(stream), int(index)]))


@dataclass(eq=False)
class TestCase:
    __test__ = False  # keep pytest from collecting this class

    id: int
    d: np.ndarray  # active disease indices
    obs: ObservationVector
    p_plus: float
    p_minus: float
    seed: int | None = None

    def __post_init__(self):
        if not (0 <= self.p_plus <= 1 and 0 < self.p_minus <= 1):
            raise ValueError("recorded observation probabilities out of range")

    @property
    def obsmodel(self) -> ObservationModel:
        return ObservationModel(self.p_plus, self.p_minus)

    def disease_vector(self, K: int) -> np.ndarray:
        d = np.zeros(K, dtype=bool)
        d[self.d] = True
        return d

    def to_json(self) -> str:
        return json.dumps({
            "id": int(self.id),
            "d": [int(k) for k in self.d],
            "pos": [int(i) for i in self.obs.pos],
            "neg": [int(i) for i in self.obs.neg],
            "p_plus": float(self.p_plus),
            "p_minus": float(self.p_minus),
        }, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str, num_findings: int) -> "TestCase":
        doc = json.loads(line)
        obs = ObservationVector.from_sets(num_findings, doc["pos"], doc["neg"])
        return cls(doc["id"], np.asarray(doc["d"], dtype=np.int64), obs, doc["p_plus"], doc["p_minus"])


@dataclass(eq=False)
class BenchmarkSet:
    cases: list
    obsmodel: ObservationModel
    net_hash: str = ""
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.cases)

    def to_jsonl(self) -> str:
        return "".join(c.to_json() + "\n" for c in self.cases)

    @classmethod
    def from_jsonl(cls, text: str, net: Bn2oNetwork) -> "BenchmarkSet":
        cases = [TestCase.from_json(line, net.num_findings) for line in text.splitlines() if line.strip()]
        models = {(c.p_plus, c.p_minus) for c in cases}
        if len(models) > 1:
            raise ValueError("benchmark mixes observation models")
        om = ObservationModel(*models.pop()) if models else ObservationModel(0.0, 1.0)
        return cls(cases, om, net.digest())


def sample_prior(net: Bn2oNetwork, rng: np.random.Generator):
    """One joint draw (d, f) from the unaugmented network, as bool vectors."""
    D, F = sample_prior_batch(net, 1, rng)
    return D[0], F[0]


def sample_prior_batch(net: Bn2oNetwork, n: int, rng: np.random.Generator):
    D = rng.random((n, net.num_diseases)) < net.prior
    F = sample_findings(net, D, rng)
    return D, F


def sample_findings(net: Bn2oNetwork, D, rng: np.random.Generator) -> np.ndarray:
    D = np.atleast_2d(D)
    s = net.theta0 + D.astype(float) @ net.theta_matrix.T
    # f_i is negative with probability exp(-s)
    return rng.random(s.shape) >= np.exp(-s)


def hide_findings(F, obsmodel: ObservationModel, rng: np.random.Generator) -> np.ndarray:
    """Apply the observation process to finding states; returns int8 codes."""
    F = np.asarray(F, dtype=bool)
    hidden = rng.random(F.shape) < np.where(F, obsmodel.p_plus, obsmodel.p_minus)
    codes = np.where(F, POS, NEG).astype(np.int8)
    codes[hidden] = UNK
    return codes


def sample_augmented_batch(net: Bn2oNetwork, obsmodel: ObservationModel, n: int, rng: np.random.Generator):
    """n draws (d, o) from the augmented network; o as an (n, I) code matrix."""
    D, F = sample_prior_batch(net, n, rng)
    return D, hide_findings(F, obsmodel, rng)


def count_tail_table(prior, m: int) -> np.ndarray:
    """T[k, s] = P(sum_{j >= k} d_j = s) for s = 0..m under independent priors."""
    K = len(prior)
    T = np.zeros((K + 1, m + 1))
    T[K, 0] = 1.0
    for k in range(K - 1, -1, -1):
        p = prior[k]
        T[k] = (1.0 - p) * T[k + 1]
        T[k, 1:] += p * T[k + 1, :-1]
    return T


def sample_d_given_count(net: Bn2oNetwork, m: int, rng: np.random.Generator) -> np.ndarray:
    """Exact draw from P(d | sum_k d_k = m) by sequential Poisson-binomial conditioning."""
    K = net.num_diseases
    if not 0 <= m <= K:
        raise ValueError(f"count {m} outside [0, {K}]")
    T = count_tail_table(net.prior, m)
    if T[0, m] <= 0.0:
        raise ValueError(f"a configuration with {m} active diseases has zero prior probability")
    d = np.zeros(K, dtype=bool)
    remaining = m
    u = rng.random(K)
    for k in range(K):
        if remaining == 0:
            break
        p_on = net.prior[k] * T[k + 1, remaining - 1] / T[k, remaining]
        if u[k] < p_on:
            d[k] = True
            remaining -= 1
    return d


def sample_observation(net: Bn2oNetwork, obsmodel: ObservationModel, d, rng: np.random.Generator) -> ObservationVector:
    F = sample_findings(net, np.asarray(d, dtype=bool)[None, :], rng)[0]
    return ObservationVector(hide_findings(F, obsmodel, rng))


def _make_case(net, obsmodel, disease_count, seed, index):
    rng = case_rng(seed, index)
    d = sample_d_given_count(net, disease_count, rng)
    obs = sample_observation(net, obsmodel, d, rng)
    return TestCase(index, np.flatnonzero(d), obs, obsmodel.p_plus, obsmodel.p_minus, seed)


def gen_benchmark(net: Bn2oNetwork, obsmodel: ObservationModel, n_cases: int = 1000,
                  disease_count: int = 5, seed: int = 0, workers: int = 1) -> BenchmarkSet:
    """Independent test cases, each on its own substream so order and threading don't matter."""
    if n_cases < 0:
        raise ValueError("n_cases must be non-negative")
    make = lambda idx: _make_case(net, obsmodel, disease_count, seed, idx)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            cases = list(pool.map(make, range(n_cases)))
    else:
        cases = [make(idx) for idx in range(n_cases)]
    return BenchmarkSet(cases, obsmodel, net.digest(),
                        {"seed": seed, "disease_count": disease_count})
