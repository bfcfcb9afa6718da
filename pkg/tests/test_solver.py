import numpy as np
import pytest

from squintbook.array import ArrayGeometry, CoverageGrid, SubcarrierGrid, steering_tensor
from squintbook.channel import synth_nearfield_si
from squintbook.quantize import box_project
from squintbook.solver import (
    CoverageConstraintSet,
    InfeasibleBudgetError,
    QuadraticForm,
    SolverConfig,
    _Scaled,
    build_quadratic_form,
    kkt_residual,
    solve_subproblem,
    wideband_objective,
)

FC = 60e9


def random_codebook(rng, n, m):
    return box_project(rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m)))


def instance(n_side=2, k=4, bw=2e9, az=(-30, 30), sigma2=0.05, seed=0):
    geom = ArrayGeometry.planar(n_side, n_side, FC)
    sub = SubcarrierGrid(FC, bw, k)
    grid = CoverageGrid.from_degrees([(a, 0) for a in az])
    h = synth_nearfield_si(geom, geom, 10, sub, 10, seed=seed)
    rng = np.random.default_rng(seed)
    w = random_codebook(rng, geom.num_elements, len(az))
    form = build_quadratic_form(h, w, "for-F")
    cons = CoverageConstraintSet(steering_tensor(geom, grid, sub.frequencies), sigma2)
    return form, cons, h, w


@pytest.mark.parametrize("seed", range(6))
def test_factorization_matches_direct_sum(seed):
    rng = np.random.default_rng(seed)
    k, nr, nt, m = [int(v) for v in rng.integers(1, 6, 4)]
    h = rng.standard_normal((k, nr, nt)) + 1j * rng.standard_normal((k, nr, nt))
    f = random_codebook(rng, nt, m)
    w = random_codebook(rng, nr, m)
    direct = sum(np.linalg.norm(w.conj().T @ h[i] @ f) ** 2 for i in range(k))
    assert wideband_objective(h, f, w) == pytest.approx(direct, rel=1e-10)
    lw = build_quadratic_form(h, w, "for-F")
    lf = build_quadratic_form(h, f, "for-W")
    assert lw.value(f) == pytest.approx(direct, rel=1e-9)
    assert lf.value(w) == pytest.approx(direct, rel=1e-9)
    assert np.all(lw.eigenvalues >= 0)
    assert np.allclose(lw.factor.conj().T @ lw.factor, lw.gram(), atol=1e-9 * max(1, np.abs(lw.gram()).max()))


def test_factorization_subcarrier_subset():
    rng = np.random.default_rng(1)
    h = rng.standard_normal((5, 3, 4)) + 1j * rng.standard_normal((5, 3, 4))
    f, w = random_codebook(rng, 4, 2), random_codebook(rng, 3, 2)
    form = build_quadratic_form(h, w, "for-F", subcarriers=[2])
    assert form.value(f) == pytest.approx(np.linalg.norm(w.conj().T @ h[2] @ f) ** 2, rel=1e-9)


def test_factorization_rank_deficient_clamped():
    # rank-1 channel: negative round-off eigenvalues must be clamped
    rng = np.random.default_rng(2)
    u = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    h = np.outer(u, u.conj())[None]
    form = build_quadratic_form(h, np.eye(6), "for-F")
    assert np.all(form.eigenvalues >= 0)
    assert np.all(np.isfinite(form.factor))


def test_factorization_shape_errors():
    h = np.ones((2, 3, 4), complex)
    with pytest.raises(ValueError):
        build_quadratic_form(h, np.ones((4, 2)), "for-F")
    with pytest.raises(ValueError):
        build_quadratic_form(h, np.ones((3, 2)), "for-W")
    with pytest.raises(ValueError):
        build_quadratic_form(h, np.ones((3, 2)), "sideways")


def test_gradient_matches_finite_differences():
    form, cons, _, _ = instance(sigma2=0.02)
    prob = _Scaled(form, cons)
    rng = np.random.default_rng(7)
    x = 0.7 * random_codebook(rng, cons.n, cons.m)
    lam = np.abs(rng.standard_normal(cons.num_constraints))
    rho = 3.0
    _, grad = prob.al_value_grad(x, lam, rho)
    for _ in range(5):
        d = rng.standard_normal(x.shape) + 1j * rng.standard_normal(x.shape)
        eps = 1e-6
        fd = (prob.al_value_grad(x + eps * d, lam, rho)[0] - prob.al_value_grad(x - eps * d, lam, rho)[0]) / (2 * eps)
        assert fd == pytest.approx(np.real(np.vdot(grad, d)), rel=1e-5, abs=1e-8)


def test_huge_budget_gives_zero():
    form, _, _, _ = instance()
    geom = ArrayGeometry.planar(2, 2, FC)
    cons = CoverageConstraintSet(steering_tensor(geom, CoverageGrid.from_degrees([(-30, 0), (30, 0)]),
                                                 SubcarrierGrid(FC, 2e9, 4).frequencies), 10.0)
    rep = solve_subproblem(form, cons)
    assert rep.objective < 1e-10
    assert rep.converged


def test_zero_objective_returns_feasible_point():
    cons = instance()[1]
    form = QuadraticForm(np.zeros((4, 4), complex), np.zeros(4))
    rep = solve_subproblem(form, cons, warm_start=box_project(cons.steering[0]))
    assert rep.violation <= 1e-6
    assert rep.objective == 0.0


def test_single_beam_grid_search_oracle():
    # Nt = 2, M = 1, K = 1: exhaustive search over the unit-modulus box
    geom = ArrayGeometry([(-0.25, 0, 0), (0.25, 0, 0)], FC)
    rng = np.random.default_rng(11)
    g = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    h = g[None]
    w = np.array([[1.0], [np.exp(0.4j)]])
    form = build_quadratic_form(h, w, "for-F")
    a = steering_tensor(geom, CoverageGrid.from_degrees([(20, 0)]), [FC])
    sigma2 = 0.1
    rep = solve_subproblem(form, CoverageConstraintSet(a, sigma2))

    # a feasible point needs |x1| + |x2| >= 2 - 2 sigma, so both radii are at least 1 - 2 sigma
    radii = np.linspace(max(0.0, 1 - 2 * np.sqrt(sigma2)), 1, 65)
    angles = np.linspace(0, 2 * np.pi, 240, endpoint=False)
    pts = (radii[:, None] * np.exp(1j * angles[None])).ravel()
    a0 = a[0][:, 0]
    gram = form.gram()
    u2 = a0[1].conj() * pts
    q2 = gram[1, 1].real * np.abs(pts) ** 2
    l2 = 2 * gram[0, 1] * pts
    best = np.inf
    for blk in np.array_split(pts, pts.size // 400):
        x1 = blk[:, None]
        cov = np.abs(2 - a0[0].conj() * x1 - u2) ** 2 / 4
        obj = gram[0, 0].real * np.abs(x1) ** 2 + q2 + np.real(np.conj(x1) * l2)
        best = min(best, np.min(obj, where=cov <= sigma2, initial=np.inf))
    assert rep.converged
    assert rep.objective <= best * 1.0001
    assert rep.objective == pytest.approx(best, rel=0.01)


@pytest.mark.parametrize("seed", range(3))
def test_matches_convex_solver(seed):
    cp = pytest.importorskip("cvxpy")
    form, cons, _, _ = instance(n_side=2, k=3, az=(-40, 0, 40), sigma2=0.03, seed=seed)
    rep = solve_subproblem(form, cons)
    x = cp.Variable((cons.n, cons.m), complex=True)
    cstr = [cp.abs(x) <= 1]
    for k in range(cons.num_constraints):
        gains = cp.sum(cp.multiply(np.conj(cons.steering[k]), x), axis=0)
        cstr.append(cp.sum_squares(cons.n - gains) <= cons.rhs)
    prob = cp.Problem(cp.Minimize(cp.sum_squares(form.factor @ x)), cstr)
    prob.solve(solver=cp.CLARABEL)
    assert rep.converged
    assert rep.objective == pytest.approx(prob.value, rel=1e-4)


def test_kkt_residual_small_at_convergence():
    for seed in range(5):
        form, cons, _, _ = instance(k=8, az=(-45, -15, 15, 45), sigma2=0.05, seed=seed)
        rep = solve_subproblem(form, cons)
        assert rep.converged
        assert rep.kkt_residual <= 1e-5
        assert kkt_residual(form, cons, rep.solution, rep.multipliers) <= 1e-5
        assert np.max(np.abs(rep.solution)) <= 1 + 1e-12


def test_kkt_residual_rejects_negative_multipliers():
    form, cons, _, _ = instance()
    with pytest.raises(ValueError):
        kkt_residual(form, cons, np.zeros((4, 2)), -np.ones(cons.num_constraints))


def test_augmented_lagrangian_monotone_within_outer_iterations():
    form, cons, _, _ = instance(sigma2=0.03, seed=4)
    history = []
    solve_subproblem(form, cons, history=history)
    segment = []
    for v in history + [None]:
        if v is None:
            assert all(b <= a + 1e-12 * max(1, abs(a)) for a, b in zip(segment, segment[1:]))
            segment = []
        else:
            segment.append(v)


def test_warm_start_rejected_outside_box():
    form, cons, _, _ = instance()
    with pytest.raises(ValueError, match="box"):
        solve_subproblem(form, cons, warm_start=2 * np.ones((cons.n, cons.m)))
    with pytest.raises(ValueError, match="shape"):
        solve_subproblem(form, cons, warm_start=np.ones((cons.n + 1, cons.m)))


def test_infeasible_budget_detected():
    # zero coverage variance across a wide band cannot be met by one flat beam
    form, _, _, _ = instance()
    geom = ArrayGeometry.planar(2, 2, FC)
    a = steering_tensor(geom, CoverageGrid.from_degrees([(60, 0)]), SubcarrierGrid(FC, 20e9, 4).frequencies)
    cons = CoverageConstraintSet(a, 1e-6)
    with pytest.raises(InfeasibleBudgetError) as info:
        solve_subproblem(form, cons, SolverConfig(max_outer_iters=40))
    assert info.value.violation > 0
    rep = solve_subproblem(form, cons, SolverConfig(max_outer_iters=40), raise_on_infeasible=False)
    assert rep.status == "infeasible" and not rep.converged


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(penalty_growth=1.0)
    with pytest.raises(ValueError):
        SolverConfig(kkt_tol=0)
    with pytest.raises(ValueError):
        CoverageConstraintSet(np.ones((2, 1)), -1)
