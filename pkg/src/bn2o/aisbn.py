"""Two-phase adaptive importance sampling (AIS-BN) on the unaugmented network.

Diseases are parentless, so the importance function is just K independent
Bernoulli probabilities. Phase 1 moves them toward the running posterior
estimate; phase 2 keeps them fixed and produces the reported marginals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .model import Bn2oNetwork, _log1mexp

PROPOSAL_FLOOR = 0.04
CLAMP = 1e-6


class EstimationFailure(ArithmeticError):
    """Every phase-2 sample had zero weight."""


@dataclass(frozen=True)
class AisbnConfig:
    phase1: int = 25_000
    phase2: int = 75_000
    update_interval: int = 2_500
    lr_start: float = 0.4
    lr_end: float = 0.14
    floor: float = PROPOSAL_FLOOR
    seed: int = 0

    def check(self) -> None:
        if self.phase1 < 0 or self.phase2 < 1 or self.update_interval < 1:
            raise ValueError("sample counts must be positive")
        if not (0 < self.lr_start < 1 and 0 < self.lr_end < 1):
            raise ValueError("learning-rate constants must lie in (0, 1)")


@dataclass
class AisbnResult:
    marginals: np.ndarray
    proposal: np.ndarray
    log_weight_sum: float
    log_evidence: float
    ess: float
    samples: int


def init_proposal(net: Bn2oNetwork, floor: float = PROPOSAL_FLOOR) -> np.ndarray:
    """P~(d_k = 1) = P(d_k = 1) if that exceeds the floor, else the floor."""
    prior = np.asarray(net.prior, dtype=float)
    return np.where(prior > floor, prior, floor)


class _Evidence:
    def __init__(self, net: Bn2oNetwork, F_plus, F_minus):
        F_plus = np.asarray(F_plus, dtype=np.int64)
        F_minus = np.asarray(F_minus, dtype=np.int64)
        self.pos_leak = net.theta0[F_plus]
        self.pos_theta = net.theta_matrix[F_plus].T.copy()  # (K, |F+|)
        # negative findings contribute a term linear in d
        self.neg_const = -float(net.theta0[F_minus].sum())
        self.neg_theta = net.theta_matrix[F_minus].sum(axis=0)
        self.lp1 = np.log(net.prior)
        self.lp0 = np.log1p(-net.prior)

    def log_weights(self, D, proposal) -> np.ndarray:
        Df = D.astype(float)
        log_ratio = np.where(D, self.lp1 - np.log(proposal), self.lp0 - np.log1p(-proposal)).sum(axis=1)
        lw = log_ratio + self.neg_const - Df @ self.neg_theta
        if self.pos_leak.size:
            s = self.pos_leak + Df @ self.pos_theta
            lw = lw + _log1mexp(s).sum(axis=1)
        return lw


def weighted_sample(net: Bn2oNetwork, proposal, F_plus, F_minus, rng: np.random.Generator):
    """One draw d from the proposal and its importance weight P(d, F) / P~(d)."""
    proposal = np.asarray(proposal, dtype=float)
    d = rng.random(net.num_diseases) < proposal
    lw = _Evidence(net, F_plus, F_minus).log_weights(d[None, :], proposal)[0]
    return d, float(np.exp(lw))


def weighted_samples(net: Bn2oNetwork, proposal, F_plus, F_minus, n: int, rng: np.random.Generator):
    """n draws; returns the (n, K) disease matrix and the log weights."""
    proposal = np.asarray(proposal, dtype=float)
    D = rng.random((n, net.num_diseases)) < proposal
    return D, _Evidence(net, F_plus, F_minus).log_weights(D, proposal)


def _weighted_log_sums(D, lw):
    """ln sum w and ln sum w * d_k over a block."""
    total = logsumexp(lw)
    per_k = logsumexp(np.broadcast_to(lw[:, None], D.shape), b=D, axis=0)
    return total, per_k


def run(net: Bn2oNetwork, F_plus, F_minus, cfg: AisbnConfig = AisbnConfig(),
        rng: np.random.Generator | None = None) -> AisbnResult:
    cfg.check()
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    evidence = _Evidence(net, F_plus, F_minus)
    proposal = init_proposal(net, cfg.floor)
    K = net.num_diseases

    # phase 1: adapt on cumulative weighted estimates
    n_blocks = -(-cfg.phase1 // cfg.update_interval) if cfg.phase1 else 0
    log_total = -np.inf
    log_per_k = np.full(K, -np.inf)
    for t in range(n_blocks):
        n = min(cfg.update_interval, cfg.phase1 - t * cfg.update_interval)
        D = rng.random((n, K)) < proposal
        lw = evidence.log_weights(D, proposal)
        tot, per_k = _weighted_log_sums(D, lw)
        log_total = np.logaddexp(log_total, tot)
        log_per_k = np.logaddexp(log_per_k, per_k)
        if not np.isfinite(log_total):
            continue
        estimate = np.exp(log_per_k - log_total)
        rate = cfg.lr_start * (cfg.lr_end / cfg.lr_start) ** (t / n_blocks)
        proposal = np.clip(proposal + rate * (estimate - proposal), CLAMP, 1.0 - CLAMP)

    # phase 2: fixed proposal
    D = rng.random((cfg.phase2, K)) < proposal
    lw = evidence.log_weights(D, proposal)
    log_total, log_per_k = _weighted_log_sums(D, lw)
    if not np.isfinite(log_total):
        raise EstimationFailure("all phase-2 importance weights are zero")
    ess = float(np.exp(2 * log_total - logsumexp(2 * lw)))
    return AisbnResult(
        marginals=np.exp(log_per_k - log_total),
        proposal=proposal,
        log_weight_sum=float(log_total),
        log_evidence=float(log_total - np.log(cfg.phase2)),
        ess=ess,
        samples=cfg.phase1 + cfg.phase2,
    )
