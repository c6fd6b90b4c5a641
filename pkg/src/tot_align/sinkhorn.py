"""Entropic and temporal-order-preserving optimal transport via Sinkhorn scaling."""

import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_marginal, check_matrix
from .geometry import combined_cost_beta, cosine_cost, log_prior

#: below this temperature the log-domain solver is selected automatically
STABILIZE_BELOW = 0.05

#: best dev-set and test-set settings of the regularisation temperature and adapter scale
PRESETS = {
    "dev-best": {"epsilon": 0.5, "s": 0.1},
    "test-best": {"epsilon": 0.01, "s": 0.1},
}


class SinkhornOverflowError(ArithmeticError):
    """The kernel ``exp(-C / epsilon)`` under- or overflowed in the plain solver."""


@dataclass(frozen=True)
class SinkhornConfig:
    """Solver settings.

    ``stabilized=None`` picks the log-domain solver when
    ``epsilon < STABILIZE_BELOW``.
    """

    epsilon: float = 0.5
    max_iterations: int = 10_000
    tolerance: float = 1e-9
    stabilized: bool | None = None

    def __post_init__(self):
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ValueError(f"epsilon must be positive, got {self.epsilon!r}")
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance!r}")
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations!r}")

    @property
    def use_log_domain(self):
        if self.stabilized is None:
            return self.epsilon < STABILIZE_BELOW
        return bool(self.stabilized)


@dataclass(frozen=True, eq=False)
class Coupling:
    """Transport plan together with the marginals it was solved for."""

    plan: np.ndarray
    a: np.ndarray
    b: np.ndarray
    n_iter: int
    violation: float
    converged: bool
    epsilon: float
    stabilized: bool
    extra: dict = field(default_factory=dict)

    def __array__(self, dtype=None, copy=None):
        return self.plan if dtype is None else self.plan.astype(dtype)

    @property
    def shape(self):
        return self.plan.shape

    @property
    def T(self):
        return self.plan.T


def _as_plan(gamma):
    return gamma.plan if isinstance(gamma, Coupling) else np.asarray(gamma, dtype=np.float64)


def marginal_violation(plan, a, b):
    """Max of the row-sum and column-sum L1 errors."""
    return max(np.abs(plan.sum(1) - a).sum(), np.abs(plan.sum(0) - b).sum())


def _sinkhorn_plain(C, a, b, eps, max_iter, tol):
    K = np.exp(-C / eps)
    if not np.all(np.isfinite(K)) or np.any(K.sum(1) == 0) or np.any(K.sum(0) == 0):
        raise SinkhornOverflowError(
            f"kernel exp(-C/{eps}) has vanishing rows or columns; use the stabilized solver"
        )
    v = np.ones_like(b)
    Kv = K @ v
    it = 0
    for it in range(1, max_iter + 1):
        u = a / Kv
        Ktu = K.T @ u
        v = b / Ktu
        Kv = K @ v
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v)) and np.all(Kv > 0)):
            raise SinkhornOverflowError(
                f"scaling vectors became non-finite at iteration {it}; use the stabilized solver"
            )
        # row sums of diag(u) K diag(v) are u * Kv; column sums are v * K^T u
        err = max(np.abs(u * Kv - a).sum(), np.abs(v * Ktu - b).sum())
        if err < tol:
            break
    return u[:, None] * K * v[None, :], it, err < tol


def _lse(X, axis):
    m = X.max(axis=axis, keepdims=True)
    return (m + np.log(np.exp(X - m).sum(axis=axis, keepdims=True))).squeeze(axis)


#: intermediate temperatures in the log-domain solver stop at this marginal error
ANNEAL_TOLERANCE = 1e-3
#: iteration cap for each intermediate temperature
ANNEAL_STAGE_ITERATIONS = 200


def _log_sweeps(M, log_a, log_b, f, g, max_iter, tol):
    # scaled dual potentials f, g: plan = exp(f_i + g_j + M_ij)
    a, b = np.exp(log_a), np.exp(log_b)
    row_lse = _lse(M + g[None, :], axis=1)
    err, it = math.inf, 0
    for it in range(1, max_iter + 1):
        f = log_a - row_lse
        col_lse = _lse(M + f[:, None], axis=0)
        g = log_b - col_lse
        row_lse = _lse(M + g[None, :], axis=1)
        err = max(np.abs(np.exp(f + row_lse) - a).sum(), np.abs(np.exp(g + col_lse) - b).sum())
        if err < tol:
            break
    return f, g, it, err


def _sinkhorn_log(C, a, b, eps, max_iter, tol):
    # Warm-start the potentials along a halving temperature schedule that
    # begins near the cost range; the final stage runs at ``eps`` with the
    # full tolerance. Without this, small temperatures can stall for
    # thousands of sweeps far from the fixed point.
    log_a, log_b = np.log(a), np.log(b)
    spread = float(C.max() - C.min())
    n_stages = max(0, math.ceil(math.log2(spread / eps))) if spread > eps else 0
    F, G = np.zeros_like(a), np.zeros_like(b)
    used = 0
    for k in range(n_stages, -1, -1):
        stage_eps = eps * 2.0**k
        final = k == 0
        budget = max_iter - used if final else min(ANNEAL_STAGE_ITERATIONS, max_iter - used - 1)
        if budget < 1:
            continue
        f, g, it, err = _log_sweeps(-C / stage_eps, log_a, log_b, F / stage_eps, G / stage_eps,
                                    budget, tol if final else max(tol, ANNEAL_TOLERANCE))
        F, G = stage_eps * f, stage_eps * g
        used += it
    return np.exp((F[:, None] + G[None, :] - C) / eps), used, err < tol


def sinkhorn(C, a=None, b=None, config=None):
    r"""Solve :math:`\min_\gamma \langle\gamma, C\rangle - \epsilon H(\gamma)` over couplings of ``a`` and ``b``.

    Each sweep rescales rows and then columns; the plan is assembled as
    ``diag(u) K diag(v)`` with ``K = exp(-C / epsilon)`` (or the equivalent
    log-domain form). Iteration stops once the larger of the row and column
    L1 marginal errors falls below ``config.tolerance``.

    Parameters
    ----------
    C : array-like, shape (l_a, l_t)
        Ground cost.
    a, b : array-like, optional
        Row and column marginals; uniform when omitted.
    config : SinkhornConfig, optional

    Returns
    -------
    Coupling
        ``converged`` is False when ``max_iterations`` ran out first.

    Raises
    ------
    SinkhornOverflowError
        The plain solver hit under/overflow. Retry with ``stabilized=True``.
    """
    config = config or SinkhornConfig()
    C = check_matrix(C, "C")
    a = check_marginal(a, C.shape[0], "a")
    b = check_marginal(b, C.shape[1], "b")
    solve = _sinkhorn_log if config.use_log_domain else _sinkhorn_plain
    plan, n_iter, converged = solve(C, a, b, config.epsilon, int(config.max_iterations),
                                    config.tolerance)
    return Coupling(
        plan=plan,
        a=a,
        b=b,
        n_iter=n_iter,
        violation=float(marginal_violation(plan, a, b)),
        converged=bool(converged),
        epsilon=config.epsilon,
        stabilized=config.use_log_domain,
    )


def tot_cost(H, Z, beta=0.5):
    """Cosine cost plus the quadratic temporal penalty ``beta * d**2``."""
    C = cosine_cost(H, Z)
    return combined_cost_beta(C, beta)


def tot_coupling(H, Z, beta=0.5, config=None):
    """Temporal-order-preserving coupling between two sequences under uniform marginals."""
    return sinkhorn(tot_cost(H, Z, beta), config=config)


def ot_objective(gamma, C):
    """Transport cost ``<gamma, C>``."""
    plan = _as_plan(gamma)
    C = np.asarray(C, dtype=np.float64)
    if plan.shape != C.shape:
        raise ValueError(f"shape mismatch: coupling {plan.shape} vs cost {C.shape}")
    return float(np.sum(plan * C))


def _xlogy(x, y):
    out = np.zeros_like(x)
    nz = x > 0
    out[nz] = x[nz] * np.log(y[nz])
    return out


def entropy(gamma):
    """Shannon entropy ``-sum gamma log gamma`` with ``0 log 0 = 0``."""
    plan = _as_plan(gamma)
    if np.any(plan < 0):
        raise ValueError("coupling has negative entries")
    return float(-_xlogy(plan, plan).sum())


def kl_divergence(gamma, P):
    """``sum gamma log(gamma / P)``; zero-mass cells contribute nothing.

    ``P`` is a :class:`~tot_align.geometry.TemporalPrior` or a positive matrix.
    """
    plan = _as_plan(gamma)
    logP = log_prior(P)
    if plan.shape != logP.shape:
        raise ValueError(f"shape mismatch: coupling {plan.shape} vs prior {logP.shape}")
    if np.any(plan < 0):
        raise ValueError("coupling has negative entries")
    nz = plan > 0
    return float(np.sum(plan[nz] * (np.log(plan[nz]) - logP[nz])))


def tot_objective(gamma, C, P, alpha1, alpha2):
    """Regularised objective ``<gamma, C> - alpha1 H(gamma) + alpha2 KL(gamma || P)``."""
    return ot_objective(gamma, C) - alpha1 * entropy(gamma) + alpha2 * kl_divergence(gamma, P)
