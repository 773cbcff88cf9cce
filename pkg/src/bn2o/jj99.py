"""Variational upper bound on the evidence for positive findings (JJ99).

Each positive-finding likelihood 1 - exp(-x) is bounded through the concave
conjugate of f(x) = ln(1 - exp(-x)):

    f(x) <= xi * x - fstar(xi),   fstar(xi) = (1 + xi) ln(1 + xi) - xi ln xi

which turns the positive findings into factors exponential in d and lets the
sum over diseases factorize. The bound is convex in xi and is minimized over
eta = ln xi. Runs on the unaugmented network; unobserved findings are ignored.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, xlogy

from .model import Bn2oNetwork


def conjugate(xi):
    """fstar(xi) = (1 + xi) ln(1 + xi) - xi ln xi."""
    xi = np.asarray(xi, dtype=float)
    return (1.0 + xi) * np.log1p(xi) - xlogy(xi, xi)


def conjugate_grad(xi):
    xi = np.asarray(xi, dtype=float)
    return np.log1p(xi) - np.log(xi)


@dataclass
class VariationalState:
    eta: np.ndarray  # ln xi, one per positive finding
    bound: float
    log_odds: np.ndarray
    prior_log_odds: np.ndarray
    iterations: int = 0
    converged: bool = True
    grad_norm: float = 0.0

    @property
    def xi(self) -> np.ndarray:
        return np.exp(self.eta)

    @property
    def marginals(self) -> np.ndarray:
        return expit(self.log_odds)


class _Case:
    """Precomputed per-case quantities shared by the bound and its gradient."""

    def __init__(self, net: Bn2oNetwork, F_plus, F_minus):
        self.F_plus = np.asarray(F_plus, dtype=np.int64)
        self.F_minus = np.asarray(F_minus, dtype=np.int64)
        theta = net.theta_matrix
        self.pos_leak = net.theta0[self.F_plus]
        self.pos_theta = theta[self.F_plus]  # (|F+|, K)
        self.neg_const = -float(net.theta0[self.F_minus].sum())
        self.neg_theta = theta[self.F_minus].sum(axis=0)
        self.prior_log_odds = net.prior_log_odds
        self.log_p0 = np.log1p(-net.prior)

    def exponents(self, xi):
        """s_k = sum_{F+} xi_i theta_ik - sum_{F-} theta_jk."""
        return xi @ self.pos_theta - self.neg_theta

    def value_and_grad_xi(self, xi):
        s = self.exponents(xi)
        # ln[(1 - pi) + pi e^s] = ln(1 - pi) + softplus(prior_log_odds + s)
        u = self.prior_log_odds + s
        value = (np.sum(xi * self.pos_leak - conjugate(xi)) + self.neg_const
                 + np.sum(self.log_p0 + np.logaddexp(0.0, u)))
        grad = self.pos_leak - conjugate_grad(xi) + self.pos_theta @ expit(u)
        return float(value), grad


def bound_log(net: Bn2oNetwork, F_plus, F_minus, xi) -> float:
    """Log of the variational upper bound on P(F+, F-) at the given xi."""
    xi = np.asarray(xi, dtype=float)
    if len(xi) != len(F_plus):
        raise ValueError("need one variational parameter per positive finding")
    if np.any(xi <= 0):
        raise ValueError("variational parameters must be strictly positive")
    return _Case(net, F_plus, F_minus).value_and_grad_xi(xi)[0]


def bound_grad(net: Bn2oNetwork, F_plus, F_minus, xi) -> np.ndarray:
    """Gradient of :func:`bound_log` with respect to xi."""
    return _Case(net, F_plus, F_minus).value_and_grad_xi(np.asarray(xi, dtype=float))[1]


def posterior_log_odds(net: Bn2oNetwork, state_or_xi, F_plus, F_minus) -> np.ndarray:
    """Approximate posterior log-odds p_k + sum_{F+} xi_i theta_ik - sum_{F-} theta_jk."""
    xi = state_or_xi.xi if isinstance(state_or_xi, VariationalState) else np.asarray(state_or_xi, dtype=float)
    case = _Case(net, F_plus, F_minus)
    return case.prior_log_odds + case.exponents(xi)


def optimize(net: Bn2oNetwork, F_plus, F_minus, tol: float = 1e-8, max_iter: int = 1000) -> VariationalState:
    """Minimize the bound over eta = ln xi starting from xi = 1."""
    case = _Case(net, F_plus, F_minus)
    n = len(case.F_plus)
    if n == 0:
        value, _ = case.value_and_grad_xi(np.zeros(0))
        return VariationalState(np.zeros(0), value, case.prior_log_odds - case.neg_theta,
                                case.prior_log_odds)

    def objective(eta):
        xi = np.exp(eta)
        value, g = case.value_and_grad_xi(xi)
        return value, g * xi

    res = minimize(objective, np.zeros(n), jac=True, method="L-BFGS-B",
                   options={"ftol": tol, "gtol": 1e-10, "maxiter": max_iter})
    eta = res.x
    value, g = objective(eta)
    start_value, _ = objective(np.zeros(n))
    if value > start_value:  # never return worse than the feasible start
        eta, value, g = np.zeros(n), start_value, objective(np.zeros(n))[1]
    converged = bool(res.success) or res.nit < max_iter
    return VariationalState(eta, value, case.prior_log_odds + case.exponents(np.exp(eta)),
                            case.prior_log_odds, int(res.nit), converged, float(np.linalg.norm(g)))
