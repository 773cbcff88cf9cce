"""Exact posterior oracles: brute-force enumeration and Quickscore."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .model import Bn2oNetwork, ObservationModel, ObservationVector, log_joint_batch

ENUM_MAX_DISEASES = 20
QUICKSCORE_MAX_POSITIVES = 18
_CHUNK = 1 << 14


class ImpossibleEvidence(ValueError):
    """The evidence has zero probability under the model."""


class CancellationError(ArithmeticError):
    """Inclusion-exclusion lost all precision and produced a negative probability."""


@dataclass
class ExactPosterior:
    marginals: np.ndarray
    log_evidence: float
    evidence: object = None


def all_configurations(K: int, start: int = 0, stop: int | None = None) -> np.ndarray:
    """Rows are disease vectors; row r has d_k = bit k of (start + r)."""
    stop = (1 << K) if stop is None else stop
    idx = np.arange(start, stop, dtype=np.int64)
    return ((idx[:, None] >> np.arange(K)) & 1).astype(bool)


def enumerate_log_joint(net: Bn2oNetwork, obsmodel: ObservationModel | None, o: ObservationVector,
                        max_diseases: int = ENUM_MAX_DISEASES):
    """Yield (configs, log joints) chunks over all 2^K disease vectors."""
    K = net.num_diseases
    if K > max_diseases:
        raise ValueError(f"enumeration over K={K} diseases exceeds the cap of {max_diseases}")
    total = 1 << K
    for start in range(0, total, _CHUNK):
        D = all_configurations(K, start, min(start + _CHUNK, total))
        yield D, log_joint_batch(net, obsmodel, D, o)


def enumerate_posterior(net: Bn2oNetwork, obsmodel: ObservationModel | None, o: ObservationVector,
                        max_diseases: int = ENUM_MAX_DISEASES) -> ExactPosterior:
    """Posterior marginals and ln P(o) by summing the joint over every disease vector.

    ``obsmodel=None`` uses the unaugmented network (unobserved findings ignored).
    """
    totals, per_disease = [], []
    for D, lj in enumerate_log_joint(net, obsmodel, o, max_diseases):
        totals.append(logsumexp(lj))
        per_disease.append(logsumexp(np.broadcast_to(lj[:, None], D.shape), b=D, axis=0))
    log_ev = float(logsumexp(totals))
    if not np.isfinite(log_ev):
        raise ImpossibleEvidence("P(o) = 0 under the model")
    log_k = logsumexp(np.array(per_disease), axis=0)
    return ExactPosterior(np.exp(log_k - log_ev), log_ev, o)


def top_posterior_configurations(net, obsmodel, o, n: int, max_diseases: int = ENUM_MAX_DISEASES):
    """The n highest-joint disease vectors (ties by configuration index), with their log joints."""
    best_D, best_lj = None, None
    for D, lj in enumerate_log_joint(net, obsmodel, o, max_diseases):
        if best_D is not None:
            D = np.vstack([best_D, D])
            lj = np.concatenate([best_lj, lj])
        order = np.argsort(-lj, kind="stable")[:n]
        best_D, best_lj = D[order], lj[order]
    return best_D, best_lj


def _subset_masks(n: int, start: int, stop: int) -> np.ndarray:
    idx = np.arange(start, stop, dtype=np.int64)
    return ((idx[:, None] >> np.arange(n)) & 1).astype(bool)


def quickscore(net: Bn2oNetwork, F_plus, F_minus, max_positives: int = QUICKSCORE_MAX_POSITIVES) -> ExactPosterior:
    """Exact P(F+, F-) and posterior marginals on the unaugmented network.

    Inclusion-exclusion over subsets S of the positive findings:

        P(F+, F-) = sum_S (-1)^|S| exp(-sum_{i in S u F-} theta_i0)
                    * prod_k [P(d_k=0) + P(d_k=1) exp(-sum_{i in S u F-} theta_ik)]

    The joint with d_k = 1 replaces the k-th bracket by its second term. The
    alternating sum can cancel by many orders of magnitude, so terms are
    formed and accumulated in extended precision, positives and negatives
    summed separately and subtracted once at the end.
    """
    F_plus = np.asarray(F_plus, dtype=np.int64)
    F_minus = np.asarray(F_minus, dtype=np.int64)
    n = len(F_plus)
    if n > max_positives:
        raise ValueError(f"{n} positive findings exceeds the Quickscore cap of {max_positives}")
    LD = np.longdouble
    theta = net.theta_matrix
    p1 = net.prior.astype(LD)
    p0 = 1 - p1

    base_leak = net.theta0[F_minus].astype(LD).sum()
    base_theta = theta[F_minus].astype(LD).sum(axis=0)
    pos_leak = net.theta0[F_plus].astype(LD)
    pos_theta = theta[F_plus].astype(LD)

    K = net.num_diseases
    totals = {1.0: LD(0), -1.0: LD(0)}
    parts = {1.0: np.zeros(K, dtype=LD), -1.0: np.zeros(K, dtype=LD)}
    total = 1 << n
    for start in range(0, total, _CHUNK):
        S = _subset_masks(n, start, min(start + _CHUNK, total))
        sign = np.where(S.sum(axis=1) % 2 == 0, 1.0, -1.0)
        SL = S.astype(LD)
        on = p1 * np.exp(-(base_theta + SL @ pos_theta))  # (chunk, K)
        bracket = p0 + on
        term = np.exp(-(base_leak + SL @ pos_leak)) * np.prod(bracket, axis=1)
        clamped = term[:, None] * (on / bracket)
        for sg in (1.0, -1.0):
            mask = sign == sg
            totals[sg] += term[mask].sum()
            parts[sg] += clamped[mask].sum(axis=0)

    evidence = totals[1.0] - totals[-1.0]
    if evidence < 0:
        raise CancellationError(f"inclusion-exclusion returned negative probability {float(evidence):g}")
    if evidence == 0:
        raise ImpossibleEvidence("P(F+, F-) = 0 under the model")
    joint_on = parts[1.0] - parts[-1.0]
    if np.any(joint_on < -1e-15 * parts[1.0]):
        raise CancellationError("negative disease-clamped joint from inclusion-exclusion")
    marginals = np.maximum(joint_on / evidence, 0).astype(float)
    return ExactPosterior(marginals, float(np.log(evidence)), (F_plus, F_minus))
