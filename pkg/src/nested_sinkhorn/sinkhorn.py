"""Entropy-regularized discrete transport.

The fixed-point scaling iteration is provided in two numerically distinct
flavours: the plain multiplicative form on the kernel ``exp(-lam * cost)``
and a log-domain form that survives arbitrarily large ``lam * cost`` via
log-sum-exp.  Both stop on the max-norm marginal violation, normalize the
scaling pair so the largest row scaling is one, and report the plan, its
cost, its entropy, and the entropic objective.  Dual multipliers recovered
from the scalings certify the result against the exact linear program.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .transport import LpSolution, TransportPlan, _as_marginal

__all__ = [
    "BOUND_SLACK",
    "BoundReport",
    "CheckResult",
    "DualCertificate",
    "KernelUnderflowError",
    "SinkhornResult",
    "bound_certificates",
    "bounded_check",
    "dual_from_scalings",
    "entropy",
    "gibbs_kernel",
    "sinkhorn",
    "sinkhorn_auto",
    "sinkhorn_stabilized",
]

STABILIZE_THRESHOLD = 600.0  # |lam * cost| beyond which exp() risks under/overflow
BOUND_SLACK = 1e-8           # tolerance granted to every checked inequality


class KernelUnderflowError(FloatingPointError):
    """The multiplicative iteration hit a zero kernel row or column sum;
    switch to the log-domain variant (``sinkhorn_stabilized``)."""


@dataclass
class SinkhornResult:
    """Converged (or truncated) state of the scaling iteration.

    ``d_s`` is the transport cost of the plan, ``entropy`` its Shannon
    entropy in nats and ``de_s = d_s - entropy / lam`` the full regularized
    objective, which may be negative for small ``lam``.  The plan factors as
    ``diag(scaling_row) @ exp(-lam * cost) @ diag(scaling_col)``; the log
    scalings are kept alongside because the plain scalings can overflow in
    extreme regimes.
    """

    plan: TransportPlan
    scaling_row: np.ndarray
    scaling_col: np.ndarray
    log_scaling_row: np.ndarray
    log_scaling_col: np.ndarray
    d_s: float
    entropy: float
    de_s: float
    lam: float
    iterations: int
    marginal_error: float
    converged: bool
    stabilized: bool = False


@dataclass
class DualCertificate:
    """Dual multipliers recovered from the scalings.

    Feasible for the relaxed dual constraint ``beta_i + gamma_j <=
    cost[i, j] + 1/lam`` and normalized so the Gibbs reconstruction of the
    plan has unit mass.
    """

    beta: np.ndarray
    gamma: np.ndarray
    dual_value: float


@dataclass
class CheckResult:
    """One verified inequality: ``lower <= value <= upper`` up to a slack."""

    name: str
    value: float
    lower: float
    upper: float
    slack: float
    passed: bool


def bounded_check(name: str, value: float, upper: float, lower: float = -math.inf,
                  slack_tol: float = BOUND_SLACK) -> CheckResult:
    slack = min(value - lower, upper - value)
    return CheckResult(name, value, lower, upper, slack, slack >= -slack_tol)


@dataclass
class BoundReport:
    """Comparison of a regularized solution against the exact optimum."""

    d_w: float
    d_s: float
    de_s: float
    entropy_regularized: float
    entropy_exact: float
    lam: float
    checks: list[CheckResult] = field(default_factory=list)
    all_passed: bool = True


def gibbs_kernel(cost, lam: float) -> np.ndarray:
    """Elementwise kernel ``exp(-lam * cost)``.

    Doubling ``lam`` squares the kernel entrywise, so a kernel for one
    regularization level can be reused for its multiples.
    """
    if lam <= 0.0:
        raise ValueError(f"regularization parameter must be positive, got {lam}")
    return np.exp(-lam * np.asarray(cost, dtype=float))


def entropy(plan) -> float:
    """Shannon entropy ``-sum(x * log(x))`` of a plan, with 0 log 0 = 0."""
    x = np.asarray(plan, dtype=float)
    if x.size and (x.min() < -1e-12 or x.max() > 1.0 + 1e-12):
        raise ValueError(
            f"plan entries must lie in [0, 1], found range [{x.min()!r}, {x.max()!r}]"
        )
    x = np.clip(x, 0.0, 1.0)
    positive = x > 0.0
    return float(-(x[positive] * np.log(x[positive])).sum())


def _validate_inputs(p, q, cost, lam, tol, max_iter):
    p = _as_marginal(p, "p")
    q = _as_marginal(q, "q")
    C = np.asarray(cost, dtype=float)
    if C.shape != (p.size, q.size):
        raise ValueError(f"cost shape {C.shape} does not match marginals ({p.size}, {q.size})")
    if not np.all(np.isfinite(C)):
        raise ValueError("cost matrix must be finite")
    if lam <= 0.0:
        raise ValueError(f"regularization parameter must be positive, got {lam}")
    if tol <= 0.0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be at least 1, got {max_iter}")
    return p, q, C


def _finalize(p, q, C, lam, plan, log_u, log_v, iterations, tol, stabilized,
              log_plan=None) -> SinkhornResult:
    row_err = float(np.abs(plan.sum(axis=1) - p).max())
    col_err = float(np.abs(plan.sum(axis=0) - q).max())
    marginal_error = max(row_err, col_err)
    if log_plan is None:
        h = entropy(plan)
    else:
        positive = plan > 0.0
        h = float(-(plan[positive] * log_plan[positive]).sum())
    d_s = float((plan * C).sum())
    # the plain scalings may overflow to inf in extreme regimes; the log
    # fields below are the reliable carriers there
    with np.errstate(over="ignore"):
        scaling_row = np.exp(log_u)
        scaling_col = np.exp(log_v)
    return SinkhornResult(
        plan=TransportPlan(plan, p, q),
        scaling_row=scaling_row,
        scaling_col=scaling_col,
        log_scaling_row=log_u,
        log_scaling_col=log_v,
        d_s=d_s,
        entropy=h,
        de_s=d_s - h / lam,
        lam=lam,
        iterations=iterations,
        marginal_error=marginal_error,
        converged=marginal_error <= tol,
        stabilized=stabilized,
    )


def sinkhorn(p, q, cost, lam: float, tol: float = 1e-9, max_iter: int = 100_000) -> SinkhornResult:
    """Multiplicative scaling iteration on the kernel ``exp(-lam * cost)``.

    Alternates row and column scaling updates from an all-ones column
    scaling until the max-norm marginal violation drops to ``tol`` or
    ``max_iter`` update pairs have run (then ``converged`` is False).
    Raises :class:`KernelUnderflowError` when the kernel numerically loses a
    whole row or column; use :func:`sinkhorn_stabilized` in that regime.
    """
    p, q, C = _validate_inputs(p, q, cost, lam, tol, max_iter)
    K = gibbs_kernel(C, lam)
    if not (np.all(K.sum(axis=1) > 0.0) and np.all(K.sum(axis=0) > 0.0)):
        raise KernelUnderflowError(
            "kernel has an all-zero row or column; switch to sinkhorn_stabilized"
        )
    u = np.ones(p.size)
    v = np.ones(q.size)
    it = 0
    while True:
        t = K @ v
        if it > 0:
            err = float(np.abs(u * t - p).max())
            if err <= tol or it >= max_iter:
                break
        if not np.all(t > 0.0) or not np.all(np.isfinite(t)):
            raise KernelUnderflowError(
                "row sums of the scaled kernel underflowed; switch to sinkhorn_stabilized"
            )
        u = p / t
        s = K.T @ u
        if not np.all(s > 0.0) or not np.all(np.isfinite(s)):
            raise KernelUnderflowError(
                "column sums of the scaled kernel underflowed; switch to sinkhorn_stabilized"
            )
        v = q / s
        it += 1
    scale = u.max()
    u = u / scale
    v = v * scale
    plan = u[:, None] * K * v[None, :]
    return _finalize(p, q, C, lam, plan, np.log(u), np.log(v), it, tol, stabilized=False)


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    peak = a.max(axis=axis, keepdims=True)
    return peak.squeeze(axis) + np.log(np.exp(a - peak).sum(axis=axis))


def sinkhorn_stabilized(p, q, cost, lam: float, tol: float = 1e-9,
                        max_iter: int = 100_000) -> SinkhornResult:
    """Log-domain scaling iteration; same contract as :func:`sinkhorn`.

    Scalings are carried as logs and kernel products evaluated by
    log-sum-exp, so no magnitude of ``lam * cost`` can underflow the
    iteration.  Agrees with the plain variant wherever both converge.
    """
    p, q, C = _validate_inputs(p, q, cost, lam, tol, max_iter)
    km = -lam * C
    log_p = np.log(p)
    log_q = np.log(q)
    f = np.zeros(p.size)
    g = np.zeros(q.size)
    it = 0
    while True:
        t = _logsumexp(km + g[None, :], axis=1)
        if it > 0:
            err = float(np.abs(np.exp(f + t) - p).max())
            if err <= tol or it >= max_iter:
                break
        f = log_p - t
        g = log_q - _logsumexp(km + f[:, None], axis=0)
        it += 1
    shift = f.max()
    f = f - shift
    g = g + shift
    log_plan = f[:, None] + km + g[None, :]
    plan = np.exp(log_plan)
    return _finalize(p, q, C, lam, plan, f, g, it, tol, stabilized=True, log_plan=log_plan)


def sinkhorn_auto(p, q, cost, lam: float, tol: float = 1e-9,
                  max_iter: int = 100_000) -> SinkhornResult:
    """Dispatch to the plain or log-domain iteration by kernel magnitude.

    The plain form is used while ``max |lam * cost|`` stays inside the safe
    exponent range; beyond that (or on a detected underflow) the log-domain
    form takes over.
    """
    C = np.asarray(cost, dtype=float)
    if C.size and np.all(np.isfinite(C)) and float(np.abs(lam * C).max()) > STABILIZE_THRESHOLD:
        return sinkhorn_stabilized(p, q, C, lam, tol, max_iter)
    try:
        return sinkhorn(p, q, C, lam, tol, max_iter)
    except KernelUnderflowError:
        return sinkhorn_stabilized(p, q, C, lam, tol, max_iter)


def dual_from_scalings(result: SinkhornResult) -> DualCertificate:
    """Recover dual multipliers from the scaling vectors.

    Uses ``beta = (log(scaling_row) + 1/2) / lam`` and symmetrically for
    ``gamma``; the reported ``dual_value`` is the marginal-weighted sum of
    the multipliers, which exceeds the entropic objective by exactly
    ``1 / lam`` at the fixed point.
    """
    if not (np.all(np.isfinite(result.log_scaling_row))
            and np.all(np.isfinite(result.log_scaling_col))):
        raise ValueError("scalings must be positive and finite")
    lam = result.lam
    beta = (result.log_scaling_row + 0.5) / lam
    gamma = (result.log_scaling_col + 0.5) / lam
    p = result.plan.row_marginal
    q = result.plan.col_marginal
    return DualCertificate(beta=beta, gamma=gamma, dual_value=float(p @ beta + q @ gamma))


def bound_certificates(p, q, cost, lam: float, sink: SinkhornResult,
                       lp: LpSolution) -> BoundReport:
    """Check the comparison inequalities between the regularized and exact
    solutions of one instance.

    Verifies, each up to :data:`BOUND_SLACK`:
    the cost gap ``0 <= d_s - d_w <= (H_s - H_w) / lam``, the objective gap
    ``0 <= d_w - de_s <= H_s / lam``, and the entropy caps
    ``H_s <= H(p q^T)`` and ``H_s <= log(n) + log(m)``.
    """
    p = _as_marginal(p, "p")
    q = _as_marginal(q, "q")
    C = np.asarray(cost, dtype=float)
    if C.shape != (p.size, q.size) or sink.plan.matrix.shape != C.shape \
            or lp.plan.matrix.shape != C.shape:
        raise ValueError("instance dimensions do not match between the two solutions")
    h_s = sink.entropy
    h_w = entropy(lp.plan.matrix)
    d_w = lp.value
    checks = [
        bounded_check("cost gap vs entropy difference", sink.d_s - d_w,
                      upper=(h_s - h_w) / lam, lower=0.0),
        bounded_check("objective gap vs plan entropy", d_w - sink.de_s,
                      upper=h_s / lam, lower=0.0),
        bounded_check("plan entropy vs product coupling", h_s,
                      upper=entropy(np.outer(p, q)), lower=0.0),
        bounded_check("plan entropy vs support size", h_s,
                      upper=math.log(p.size) + math.log(q.size), lower=0.0),
    ]
    return BoundReport(
        d_w=d_w,
        d_s=sink.d_s,
        de_s=sink.de_s,
        entropy_regularized=h_s,
        entropy_exact=h_w,
        lam=lam,
        checks=checks,
        all_passed=all(c.passed for c in checks),
    )
