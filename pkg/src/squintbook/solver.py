"""Convex codebook subproblem: quadratic objective, per-subcarrier coverage constraints.

The subproblem solved for either codebook ``X`` (N x M) is

    minimize    ||L X||_F^2
    subject to  ||N 1 - diag(A[k]^H X)||^2 <= sigma2 * N^2 * M   for every k
                |X_ij| <= 1

where ``L`` collapses the sum over subcarriers of ``||W^H H[k] X||_F^2``
(or its receive-side analogue) into a single Gram factor.

Internally the objective is divided by the largest eigenvalue of ``L^H L``
and each constraint is written in coverage-variance units,
``g_k(X) = ||N 1 - diag(A[k]^H X)||^2 / (N^2 M) - sigma2``.  Multipliers and
KKT residuals are reported in those units.  Gradients follow the Wirtinger
convention (the gradient of ``||L X||^2`` is ``2 L^H L X``).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .channel import ChannelTensor
from .quantize import box_project

__all__ = [
    "QuadraticForm",
    "CoverageConstraintSet",
    "SolverConfig",
    "SolveReport",
    "InfeasibleBudgetError",
    "build_quadratic_form",
    "solve_subproblem",
    "kkt_residual",
    "wideband_objective",
]

logger = logging.getLogger(__name__)

BOX_TOL = 1e-12
# violation is measured relative to max(sigma2, floor) so sigma2 = 0 stays well defined
VIOLATION_FLOOR = 1e-8


class InfeasibleBudgetError(RuntimeError):
    """The coverage budget admits no box-feasible codebook."""

    def __init__(self, message: str, violation: float):
        super().__init__(message)
        self.violation = violation


@dataclass(frozen=True)
class QuadraticForm:
    """Objective ``||L X||_F^2`` with ``L = Lambda^{1/2} Q^H``."""

    factor: np.ndarray
    raw_eigenvalues: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.factor.shape[1]

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.maximum(self.raw_eigenvalues, 0.0)

    def gram(self) -> np.ndarray:
        return self.factor.conj().T @ self.factor

    def value(self, x: np.ndarray) -> float:
        return float(np.sum(np.abs(self.factor @ x) ** 2))


def build_quadratic_form(
    channel: ChannelTensor | np.ndarray,
    fixed: np.ndarray,
    side: Literal["for-F", "for-W"],
    subcarriers: Sequence[int] | None = None,
) -> QuadraticForm:
    """Gram factor of ``sum_k ||W^H H[k] F||_F^2`` with one codebook held fixed.

    ``side="for-F"`` fixes the receive codebook ``W`` and accumulates
    ``sum_k H[k]^H W W^H H[k]``; ``side="for-W"`` fixes ``F`` and accumulates
    ``sum_k H[k] F F^H H[k]^H`` (cyclic-trace form).  ``subcarriers``
    restricts the sum, e.g. to the center subcarrier for narrowband designs.
    """
    h = channel.entries if isinstance(channel, ChannelTensor) else np.asarray(channel, dtype=complex)
    if subcarriers is not None:
        h = h[list(subcarriers)]
    fixed = np.asarray(fixed, dtype=complex)
    if side == "for-F":
        if fixed.shape[0] != h.shape[1]:
            raise ValueError(f"receive codebook has {fixed.shape[0]} rows, channel has Nr={h.shape[1]}")
        # rows of W^H H[k], stacked over k
        b = np.einsum("nm,knt->kmt", fixed.conj(), h).reshape(-1, h.shape[2])
    elif side == "for-W":
        if fixed.shape[0] != h.shape[2]:
            raise ValueError(f"transmit codebook has {fixed.shape[0]} rows, channel has Nt={h.shape[2]}")
        # rows of (H[k] F)^H, stacked over k
        b = np.einsum("krt,tm->kmr", h, fixed).conj().reshape(-1, h.shape[1])
    else:
        raise ValueError(f"unknown side {side!r}")
    gram = b.conj().T @ b
    gram = 0.5 * (gram + gram.conj().T)
    if not np.all(np.isfinite(gram)):
        raise np.linalg.LinAlgError("non-finite Gram matrix")
    evals, evecs = np.linalg.eigh(gram)
    lam = np.maximum(evals, 0.0)
    factor = np.sqrt(lam)[:, None] * evecs.conj().T
    return QuadraticForm(factor=factor, raw_eigenvalues=evals)


def wideband_objective(channel: ChannelTensor | np.ndarray, f: np.ndarray, w: np.ndarray,
                       subcarriers: Sequence[int] | None = None) -> float:
    """Direct evaluation of ``sum_k ||W^H H[k] F||_F^2``."""
    h = channel.entries if isinstance(channel, ChannelTensor) else np.asarray(channel)
    if subcarriers is not None:
        h = h[list(subcarriers)]
    coupling = np.einsum("rm,krt,tn->kmn", np.conj(w), h, f)
    return float(np.sum(np.abs(coupling) ** 2))


@dataclass(frozen=True)
class CoverageConstraintSet:
    """``||N 1 - diag(A[k]^H X)||^2 <= sigma2 N^2 M`` for each stacked ``A[k]``."""

    steering: np.ndarray  # (K, N, M)
    variance_budget: float

    def __post_init__(self) -> None:
        a = np.array(self.steering, dtype=complex)
        if a.ndim == 2:
            a = a[None]
        if a.ndim != 3:
            raise ValueError("steering must have shape (K, N, M)")
        if not self.variance_budget >= 0:
            raise ValueError("variance budget must be >= 0")
        a.setflags(write=False)
        object.__setattr__(self, "steering", a)

    @property
    def n(self) -> int:
        return self.steering.shape[1]

    @property
    def m(self) -> int:
        return self.steering.shape[2]

    @property
    def num_constraints(self) -> int:
        return self.steering.shape[0]

    @property
    def rhs(self) -> float:
        return self.variance_budget * self.n ** 2 * self.m

    def residuals(self, x: np.ndarray) -> np.ndarray:
        """``N - a_kj^H x_j`` for every (k, j); shape (K, M)."""
        return self.n - np.einsum("knm,nm->km", self.steering.conj(), x)

    def lhs(self, x: np.ndarray) -> np.ndarray:
        return np.sum(np.abs(self.residuals(x)) ** 2, axis=1)

    def coverage_variance(self, x: np.ndarray) -> np.ndarray:
        return self.lhs(x) / (self.n ** 2 * self.m)

    def relative_violation(self, x: np.ndarray) -> float:
        excess = np.max(self.coverage_variance(x) - self.variance_budget)
        return max(0.0, float(excess)) / max(self.variance_budget, VIOLATION_FLOOR)


@dataclass(frozen=True)
class SolverConfig:
    max_outer_iters: int = 60
    max_inner_iters: int = 3000
    penalty_init: float = 1.0
    penalty_growth: float = 10.0
    feasibility_tol: float = 1e-6
    objective_rel_tol: float = 1e-8
    kkt_tol: float = 1e-6
    inner_tol_init: float = 1e-2
    step_min: float = 1e-12
    step_max: float = 1e12
    lipschitz_relax: float = 0.9  # per-iteration shrink of the Lipschitz estimate
    seed: int = 0  # only used to draw a start point when no warm start is given

    def __post_init__(self) -> None:
        for name in ("max_outer_iters", "max_inner_iters", "penalty_init", "feasibility_tol",
                     "objective_rel_tol", "kkt_tol", "inner_tol_init", "step_min", "step_max", "lipschitz_relax"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.penalty_growth > 1:
            raise ValueError("penalty_growth must exceed 1")
        for name in ("feasibility_tol", "objective_rel_tol", "kkt_tol"):
            if not getattr(self, name) < 1:
                raise ValueError(f"{name} must be < 1")
        if self.lipschitz_relax > 1:
            raise ValueError("lipschitz_relax must be <= 1")


@dataclass
class SolveReport:
    solution: np.ndarray
    objective: float
    violation: float
    kkt_residual: float
    multipliers: np.ndarray
    outer_iterations: int
    inner_iterations: int
    converged: bool
    status: str = "converged"

    @property
    def iterations(self) -> int:
        return self.inner_iterations


class _Scaled:
    """Problem data in solver units (objective / lambda_max, coverage-variance constraints)."""

    def __init__(self, form: QuadraticForm, cons: CoverageConstraintSet):
        if form.dim != cons.n:
            raise ValueError(f"objective acts on {form.dim} rows, constraints on {cons.n}")
        gram = form.gram()
        lam_max = float(np.max(form.eigenvalues)) if form.eigenvalues.size else 0.0
        self.obj_scale = lam_max if lam_max > 0 else 1.0
        self.gram = gram / self.obj_scale
        self.cons = cons
        self.n = cons.n
        # per-column layouts so the contractions run as batched matrix products
        self.a_h = np.ascontiguousarray(cons.steering.conj().transpose(2, 0, 1))  # (M, K, N)
        self.a_t = np.ascontiguousarray(cons.steering.transpose(2, 1, 0))  # (M, N, K)
        self.norm = float(cons.n ** 2 * cons.m)
        self.budget = cons.variance_budget

    def objective(self, x):
        return float(np.real(np.vdot(x, self.gram @ x)))

    def constraints(self, x):
        # r[k, j] = N - a_kj^H x_j
        r = self.n - np.matmul(self.a_h, x.T[:, :, None])[:, :, 0].T
        return np.sum(r.real ** 2 + r.imag ** 2, axis=1) / self.norm - self.budget, r

    def constraint_grad(self, r, weights):
        # sum_k weights_k * grad g_k, grad g_k = -2 A[k] * r_k / norm (columnwise)
        wr = (weights[:, None] * r).T[:, :, None]  # (M, K, 1)
        return -2.0 / self.norm * np.matmul(self.a_t, wr)[:, :, 0].T

    def lagrangian_grad(self, x, lam):
        g, r = self.constraints(x)
        return 2.0 * (self.gram @ x) + self.constraint_grad(r, lam), g

    def al_value_grad(self, x, lam, rho):
        gx = self.gram @ x
        f = float(np.real(np.vdot(x, gx)))
        g, r = self.constraints(x)
        t = np.maximum(0.0, lam + rho * g)
        val = f + float(np.sum(t ** 2 - lam ** 2)) / (2.0 * rho)
        grad = 2.0 * gx + self.constraint_grad(r, t)
        return val, grad


def _rdot(u, v) -> float:
    return float(np.real(np.vdot(u, v)))


def kkt_residual(form: QuadraticForm, constraints: CoverageConstraintSet, x: np.ndarray,
                 multipliers: np.ndarray) -> float:
    """Projected stationarity + complementarity + primal infeasibility, solver units.

    Zero exactly at a KKT point of the subproblem.  ``multipliers`` are in the
    coverage-variance units used by :func:`solve_subproblem`.
    """
    lam = np.asarray(multipliers, dtype=float)
    if lam.shape != (constraints.num_constraints,):
        raise ValueError("one multiplier per constraint required")
    if np.any(lam < 0):
        raise ValueError("multipliers must be nonnegative")
    x = np.asarray(x, dtype=complex)
    return _kkt(_Scaled(form, constraints), x, lam)


def _kkt(prob: _Scaled, x: np.ndarray, lam: np.ndarray) -> float:
    grad, g = prob.lagrangian_grad(x, lam)
    stationarity = float(np.linalg.norm(x - box_project(x - grad)))
    complementarity = float(np.sum(np.abs(lam * g)))
    infeasibility = float(np.sum(np.maximum(g, 0.0)))
    return stationarity + complementarity + infeasibility


def _inner_solve(prob, x, lam, rho, tol, cfg, step, history):
    """Monotone accelerated projected gradient on the augmented Lagrangian.

    FISTA extrapolation with backtracking on the local Lipschitz estimate;
    a trial point is accepted only if it lowers the augmented Lagrangian,
    otherwise the momentum restarts from the current iterate.
    """
    val, grad = prob.al_value_grad(x, lam, rho)
    if history is not None:
        history.append(val)
    lip = 1.0 / step
    y, val_y, grad_y = x, val, grad
    t = 1.0
    iters = 0
    for iters in range(1, cfg.max_inner_iters + 1):
        if np.linalg.norm(x - box_project(x - grad)) <= tol:
            break
        while True:
            z = box_project(y - grad_y / lip)
            d = z - y
            val_z, grad_z = prob.al_value_grad(z, lam, rho)
            model = val_y + _rdot(grad_y, d) + 0.5 * lip * _rdot(d, d)
            if val_z <= model + 1e-15 * abs(val_y):
                break
            lip *= 2.0
            if lip > 1.0 / cfg.step_min:
                return x, val, grad, iters, cfg.step_min, True
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        if val_z <= val:
            y = z + ((t - 1.0) / t_next) * (z - x)
            x, val, grad = z, val_z, grad_z
            val_y, grad_y = prob.al_value_grad(y, lam, rho)
            t = t_next
        else:
            # no decrease: keep x and restart the momentum there
            y, val_y, grad_y = x, val, grad
            t = 1.0
        lip = max(lip * cfg.lipschitz_relax, 1.0 / cfg.step_max)
        if history is not None:
            history.append(val)
    return x, val, grad, iters, 1.0 / lip, False


def solve_subproblem(
    form: QuadraticForm,
    constraints: CoverageConstraintSet,
    config: SolverConfig | None = None,
    warm_start: np.ndarray | None = None,
    history: list | None = None,
    raise_on_infeasible: bool = True,
) -> SolveReport:
    """Augmented-Lagrangian solve with a projected-gradient inner loop.

    ``history``, if given, receives the augmented-Lagrangian value after every
    accepted inner step (the sequence is non-increasing within an outer
    iteration).  Raises :class:`InfeasibleBudgetError` when the violation
    plateaus across three consecutive penalty increases.
    """
    cfg = config or SolverConfig()
    prob = _Scaled(form, constraints)
    n, m = constraints.n, constraints.m
    kcons = constraints.num_constraints

    if warm_start is None:
        rng = np.random.default_rng(cfg.seed)
        x = box_project(rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m)))
    else:
        x = np.array(warm_start, dtype=complex)
        if x.shape != (n, m):
            raise ValueError(f"warm start shape {x.shape} != {(n, m)}")
        if np.max(np.abs(x), initial=0.0) > 1 + BOX_TOL:
            raise ValueError("warm start violates the unit-modulus box; apply box_project first")

    lam = np.zeros(kcons)
    # 0 is globally optimal whenever it is feasible (objective is PSD, f(0) = 0)
    if constraints.variance_budget >= 1.0:
        zero = np.zeros((n, m), dtype=complex)
        return SolveReport(zero, 0.0, 0.0, _kkt(prob, zero, lam), lam, 0, 0, True)

    rho = cfg.penalty_init
    step = 1.0
    tol = cfg.inner_tol_init
    prev_violation = math.inf
    stalled_growths = 0
    total_inner = 0
    best = None
    status = "max-iterations"
    converged = False
    prev_obj = None

    for outer in range(1, cfg.max_outer_iters + 1):
        if history is not None:
            history.append(None)  # outer-iteration boundary marker
        x, _, _, inner, step, stuck = _inner_solve(prob, x, lam, rho, tol, cfg, max(step, 1e-6), history)
        total_inner += inner
        g, _ = prob.constraints(x)
        lam = np.maximum(0.0, lam + rho * g)
        violation = constraints.relative_violation(x)
        kkt = _kkt(prob, x, lam)
        obj = prob.objective(x)
        logger.debug("outer %d: rho=%.3g viol=%.3e kkt=%.3e obj=%.6e inner=%d",
                     outer, rho, violation, kkt, obj, inner)
        if best is None or kkt < best[0]:
            best = (kkt, x.copy(), lam.copy(), violation)

        obj_stable = prev_obj is not None and abs(obj - prev_obj) <= cfg.objective_rel_tol * max(abs(obj), 1e-300) + 1e-300
        if violation <= cfg.feasibility_tol and (kkt <= cfg.kkt_tol or (obj_stable and kkt <= 10 * cfg.kkt_tol)):
            converged = True
            status = "converged"
            best = (kkt, x.copy(), lam.copy(), violation)
            break
        prev_obj = obj

        if violation > cfg.feasibility_tol and violation > 0.5 * prev_violation:
            rho *= cfg.penalty_growth
            if violation > 0.9 * prev_violation:
                stalled_growths += 1
            else:
                stalled_growths = 0
            if stalled_growths >= 3 and rho >= 1e4 * cfg.penalty_init:
                msg = (f"coverage budget sigma2={constraints.variance_budget:.4g} appears infeasible: "
                       f"relative violation stalled at {violation:.3e}")
                if raise_on_infeasible:
                    raise InfeasibleBudgetError(msg, violation)
                status = "infeasible"
                break
        else:
            stalled_growths = 0
        prev_violation = violation
        tol = max(0.1 * tol, 0.1 * cfg.kkt_tol)
        if stuck and violation <= cfg.feasibility_tol:
            tol = 0.1 * cfg.kkt_tol

    kkt, x_best, lam_best, violation = best
    x_best = box_project(x_best)
    return SolveReport(
        solution=x_best,
        objective=form.value(x_best),
        violation=violation,
        kkt_residual=kkt,
        multipliers=lam_best,
        outer_iterations=outer,
        inner_iterations=total_inner,
        converged=converged,
        status=status,
    )
