"""BN2O network representation, observation model and exact log-probabilities.

A network has K independent binary diseases and I binary findings. Each
finding is a noisy-OR of its parent diseases plus a leak:

    P(f_i = - | d) = (1 - q_i0) * prod_k (1 - q_ik)^d_k = exp(-theta_i0 - sum_k theta_ik d_k)

Each finding has one observation child o_i in {POS, NEG, UNK}. An observed
finding reports its true state; a finding is hidden (UNK) with probability
p_plus if positive and p_minus if negative.

All joint probabilities are returned in the log domain. Impossible events are
``NEG_INFINITY`` (-inf), which is absorbing under addition.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

NEG_INFINITY = float("-inf")

UNK = 0
POS = 1
NEG = 2

GENERATOR_VERSION = "bn2o-0.1"


def _log1mexp(s):
    """ln(1 - exp(-s)) for s >= 0, stable at both ends; -inf at s == 0."""
    s = np.asarray(s, dtype=float)
    out = np.empty_like(s)
    small = s < np.log(2.0)
    with np.errstate(divide="ignore"):
        out[small] = np.log(-np.expm1(-s[small]))
        out[~small] = np.log1p(-np.exp(-s[~small]))
    return out


def _safe_log(x):
    with np.errstate(divide="ignore"):
        return np.log(x)


@dataclass(frozen=True, eq=False)
class Bn2oNetwork:
    """Binary two-layer noisy-OR network.

    ``parents[i]`` holds the disease indices of finding i, ``q[i]`` the matching
    causal strengths and ``theta[i]`` the log-domain parameters -ln(1 - q).
    Construct through :meth:`build` so theta is derived from q and the result
    validated; the raw constructor exists to let tests inject broken networks.
    """

    prior: np.ndarray
    leak: np.ndarray
    parents: tuple
    q: tuple
    theta0: np.ndarray
    theta: tuple
    meta: dict = field(default_factory=dict)

    @classmethod
    def build(cls, prior, leak, parents, q, meta=None) -> "Bn2oNetwork":
        prior = np.array(prior, dtype=float)
        leak = np.array(leak, dtype=float)
        parents = tuple(np.array(p, dtype=np.int64) for p in parents)
        q = tuple(np.array(s, dtype=float) for s in q)
        with np.errstate(divide="ignore"):
            theta0 = -np.log1p(-leak)
            theta = tuple(-np.log1p(-s) for s in q)
        net = cls(prior, leak, parents, q, theta0, theta, dict(meta or {}))
        problems = validate(net)
        if problems:
            raise ValueError("invalid network: " + "; ".join(problems[:5]))
        for arr in (prior, leak, theta0, *parents, *q, *theta):
            arr.setflags(write=False)
        return net

    @property
    def num_diseases(self) -> int:
        return len(self.prior)

    @property
    def num_findings(self) -> int:
        return len(self.leak)

    K = num_diseases
    I = num_findings

    @cached_property
    def theta_matrix(self) -> np.ndarray:
        """Dense (I, K) matrix of theta_ik, zero where there is no edge."""
        mat = np.zeros((self.num_findings, self.num_diseases))
        for i, (pa, th) in enumerate(zip(self.parents, self.theta)):
            mat[i, pa] = th
        mat.setflags(write=False)
        return mat

    @cached_property
    def prior_log_odds(self) -> np.ndarray:
        return np.log(self.prior) - np.log1p(-self.prior)

    def to_dict(self) -> dict:
        return {
            "K": self.num_diseases,
            "I": self.num_findings,
            "prior": [float(x) for x in self.prior],
            "leak": [float(x) for x in self.leak],
            "findings": [
                {"parents": [int(k) for k in pa], "q": [float(x) for x in s]}
                for pa, s in zip(self.parents, self.q)
            ],
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Bn2oNetwork":
        findings = doc["findings"]
        if len(doc["prior"]) != doc["K"] or len(findings) != doc["I"] or len(doc["leak"]) != doc["I"]:
            raise ValueError("network document sizes disagree with K/I header")
        return cls.build(
            doc["prior"],
            doc["leak"],
            [f["parents"] for f in findings],
            [f["q"] for f in findings],
            meta=doc.get("meta", {}),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Bn2oNetwork":
        return cls.from_dict(json.loads(text))

    @cached_property
    def _digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    def digest(self) -> str:
        return self._digest


@dataclass(frozen=True)
class ObservationModel:
    """Probabilities that a positive / negative finding goes unobserved."""

    p_plus: float
    p_minus: float

    def __post_init__(self):
        if not 0.0 <= self.p_plus <= 1.0:
            raise ValueError(f"p_plus must lie in [0, 1], got {self.p_plus}")
        if not 0.0 < self.p_minus <= 1.0:
            raise ValueError(f"p_minus must lie in (0, 1], got {self.p_minus}")

    @property
    def bias_ratio(self) -> float:
        return self.p_plus / self.p_minus


@dataclass(frozen=True, eq=False)
class ObservationVector:
    """Dense {UNK, POS, NEG} vector with cached positive/negative index sets."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.int8)
        if vals.ndim != 1 or not np.isin(vals, (UNK, POS, NEG)).all():
            raise ValueError("observation entries must be UNK, POS or NEG")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_sets(cls, num_findings: int, pos=(), neg=()) -> "ObservationVector":
        vals = np.full(num_findings, UNK, dtype=np.int8)
        pos = np.asarray(pos, dtype=np.int64)
        neg = np.asarray(neg, dtype=np.int64)
        if np.intersect1d(pos, neg).size:
            raise ValueError("a finding cannot be both positive and negative")
        vals[pos] = POS
        vals[neg] = NEG
        return cls(vals)

    def __len__(self):
        return len(self.values)

    @cached_property
    def pos(self) -> np.ndarray:
        return np.flatnonzero(self.values == POS)

    @cached_property
    def neg(self) -> np.ndarray:
        return np.flatnonzero(self.values == NEG)


def _check_finding(net: Bn2oNetwork, i: int) -> None:
    if not 0 <= i < net.num_findings:
        raise IndexError(f"finding index {i} out of range [0, {net.num_findings})")


def log_p_finding_neg(net: Bn2oNetwork, i: int, d) -> float:
    """ln P(f_i = - | d) = -theta_i0 - sum over active parents of theta_ik."""
    _check_finding(net, i)
    d = np.asarray(d)
    if d.shape != (net.num_diseases,):
        raise ValueError("disease vector has wrong length")
    return float(-net.theta0[i] - np.sum(net.theta[i] * d[net.parents[i]]))


def _obs_log_terms(s, codes, obsmodel: ObservationModel | None):
    """Per-finding ln P(o_i | d) given s = -ln P(f_i = - | d) (broadcast over rows)."""
    log_pos = _log1mexp(s)
    log_neg = -s
    if obsmodel is None:
        # unaugmented network: unobserved findings are marginalized out
        unk = np.zeros_like(s)
        pos = log_pos
        neg = log_neg
    else:
        lp_plus = _safe_log(obsmodel.p_plus)
        lp_minus = _safe_log(obsmodel.p_minus)
        unk = np.logaddexp(lp_plus + log_pos, lp_minus + log_neg)
        pos = _safe_log(1.0 - obsmodel.p_plus) + log_pos
        neg = _safe_log(1.0 - obsmodel.p_minus) + log_neg
    return np.where(codes == POS, pos, np.where(codes == NEG, neg, unk))


def log_p_obs_given_d(net: Bn2oNetwork, obsmodel: ObservationModel, i: int, o_i: int, d) -> float:
    s = -log_p_finding_neg(net, i, d)
    return float(_obs_log_terms(np.array([s]), np.array([o_i]), obsmodel)[0])


def log_prior(net: Bn2oNetwork, D) -> np.ndarray:
    D = np.asarray(D, dtype=bool)
    with np.errstate(divide="ignore"):
        lp1 = np.log(net.prior)
        lp0 = np.log1p(-net.prior)
    return np.where(D, lp1, lp0).sum(axis=-1)


def log_joint_batch(net: Bn2oNetwork, obsmodel: ObservationModel | None, D, o: ObservationVector) -> np.ndarray:
    """ln P(d, o) for each row of the (M, K) disease matrix ``D``.

    ``obsmodel=None`` scores against the unaugmented network, where UNK findings
    contribute nothing and observed findings contribute ln P(f_i | d).
    """
    D = np.atleast_2d(np.asarray(D))
    if D.shape[1] != net.num_diseases or len(o) != net.num_findings:
        raise ValueError("dimension mismatch between network, diagnoses and observations")
    lp = log_prior(net, D)
    if obsmodel is None:
        idx = np.concatenate([o.pos, o.neg])
        if idx.size == 0:
            return lp
        s = net.theta0[idx] + D.astype(float) @ net.theta_matrix[idx].T
        return lp + _obs_log_terms(s, o.values[idx], None).sum(axis=1)
    s = net.theta0 + D.astype(float) @ net.theta_matrix.T
    return lp + _obs_log_terms(s, o.values, obsmodel).sum(axis=1)


def log_joint(net: Bn2oNetwork, obsmodel: ObservationModel | None, d, o: ObservationVector) -> float:
    d = np.asarray(d)
    if d.shape != (net.num_diseases,):
        raise ValueError("disease vector has wrong length")
    return float(log_joint_batch(net, obsmodel, d[None, :], o)[0])


def validate(net: Bn2oNetwork, tol: float = 1e-12) -> list[str]:
    """Return a list of invariant violations; empty means the network is valid."""
    problems = []
    K, I = net.num_diseases, net.num_findings
    prior = np.asarray(net.prior)
    if prior.shape != (K,) or not np.all((prior > 0) & (prior < 1)):
        problems.append("priors must lie strictly inside (0, 1)")
    leak = np.asarray(net.leak)
    if not np.all((leak >= 0) & (leak < 1)):
        problems.append("leaks must lie in [0, 1)")
    if not (len(net.parents) == len(net.q) == len(net.theta) == len(net.theta0) == I):
        problems.append("per-finding arrays disagree in length")
        return problems
    with np.errstate(divide="ignore", invalid="ignore"):
        if np.any(np.abs(net.theta0 - (-np.log1p(-leak))) > tol) or np.any(net.theta0 < 0):
            problems.append("leak theta disagrees with q")
        for i, (pa, qs, th) in enumerate(zip(net.parents, net.q, net.theta)):
            if len(pa) == 0:
                problems.append(f"finding {i} has no parents")
                continue
            if len(pa) != len(qs) or len(qs) != len(th):
                problems.append(f"finding {i}: parents/q/theta length mismatch")
                continue
            if np.any((pa < 0) | (pa >= K)):
                problems.append(f"finding {i}: disease index out of range")
            uniq, counts = np.unique(pa, return_counts=True)
            for k in uniq[counts > 1]:
                problems.append(f"duplicate edge (i={i}, k={int(k)})")
            if np.any((qs <= 0) | (qs >= 1)):
                problems.append(f"finding {i}: strength outside (0, 1)")
            if np.any(th < 0) or np.any(np.abs(th - (-np.log1p(-qs))) > tol):
                problems.append(f"finding {i}: theta disagrees with q")
    return problems
