import numpy as np
import pytest

from curvfunc import (PreconditionError, compute_Lambda, conformal_deform,
                      energy_S, flat_torus, gradient_flow_run, integrate, laplacian,
                      level_set_hessian_check, perturbed_yamabe_run, product_spheres,
                      random_function, scalar_curvature, solve_perturbation_v, yamabe_flow_run)
from curvfunc.fields import normalize_volume, project_constants
from curvfunc.flows import COLUMNS, FlowTrace, perturbation_solve


@pytest.fixture(scope="module")
def conformal_t3():
    g0 = flat_torus(3, None, 16, "spectral").metric
    return normalize_volume(conformal_deform(g0, random_function(g0.chart, 0.1, 1, 42)))


@pytest.fixture(scope="module")
def conformal_t2():
    g0 = flat_torus(2, None, 32, "spectral").metric
    return normalize_volume(conformal_deform(g0, random_function(g0.chart, 0.1, 2, 42)))


def test_lambda_trivial_cases():
    assert compute_Lambda(flat_torus(3, None, 16).metric) == 0.0
    g0 = flat_torus(3, None, 16).metric
    assert compute_Lambda(g0.scaled(3.0)) == 0.0


def test_lambda_matches_direct_quadrature(conformal_t3):
    g = conformal_t3
    n = g.n
    s = scalar_curvature(g)
    pi = project_constants(s, g)
    u = pi - s
    num = integrate((s + pi) * ((2 * n - 2) * laplacian(u, g) + (n - 4) / 2 * (s - pi) * u), g)
    den = integrate((s + pi) * (s + pi), g)
    assert compute_Lambda(g) == pytest.approx(num / den, rel=1e-10)


def test_lambda_denominator_floor(conformal_t3):
    with pytest.raises(PreconditionError):
        compute_Lambda(conformal_t3, floor=1e6)


def test_v_trivial_and_n4():
    g = flat_torus(3, None, 16).metric
    assert np.all(solve_perturbation_v(g).values == 0)
    g4 = flat_torus(4, None, 16).metric
    with pytest.raises(PreconditionError, match="b_n"):
        solve_perturbation_v(g4)


def test_v_orthogonality(conformal_t3):
    sol = perturbation_solve(conformal_t3)
    assert sol.orthogonality < 1e-9
    assert sol.residual < 1e-9
    assert abs(project_constants(sol.v, conformal_t3)) < 1e-12


def test_flow_trace_schema():
    tr = FlowTrace("yamabe")
    tr.append(dict.fromkeys(COLUMNS, 0.0))
    with pytest.raises(ValueError):
        tr.append(dict.fromkeys(COLUMNS, 0.0))
    assert tr.to_csv().splitlines()[0] == ",".join(COLUMNS)
    assert COLUMNS == ("step", "t", "S", "H", "Vol", "min_s", "max_s", "Lambda", "v_norm",
                       "critical_residual", "trace_residual", "dt")


def test_gradient_flow_flat_is_stationary():
    tr = gradient_flow_run(flat_torus(2, None, 16, "spectral").metric, 5, 1e-3)
    assert np.all(tr.column("S") == 0)
    assert len(tr) == 6


def test_gradient_flow_descends(conformal_t2):
    tr = gradient_flow_run(conformal_t2, 60, 1e-3, stop_tol=1e-7)
    S = tr.column("S")
    assert np.all(np.diff(S) <= 0)
    assert S[-1] < 1e-3 * S[0]
    assert np.all(np.abs(tr.column("Vol") - 1) < 1e-8)
    assert tr.column("trace_residual")[-1] < 1e-6
    # lambda at the limit agrees with the closed form
    g = tr.final_state.metric
    s = tr.final_state.s
    pi_s2 = project_constants(s * s, g)
    from curvfunc import lambda_multiplier
    assert lambda_multiplier(g) == pytest.approx(-pi_s2 / 2, abs=1e-14)


def test_gradient_flow_rejects_spheres():
    m = product_spheres(2, 1.0, 2, 1.0, 16)
    with pytest.raises(PreconditionError):
        gradient_flow_run(m.metric, 1)


def test_yamabe_stationary_constant_s():
    tr = yamabe_flow_run(flat_torus(3, None, 16, "spectral").metric, 3, 1e-3)
    rows = np.array([[r[c] for c in COLUMNS if c not in ("step", "t")] for r in tr.rows])
    assert np.max(np.abs(rows - rows[0])) < 1e-12


def test_yamabe_flow(conformal_t3):
    tr = yamabe_flow_run(conformal_t3, 10, 2e-3)
    spread = []
    for row in tr.rows:
        spread.append(row["max_s"] - row["min_s"])
    assert spread[-1] < spread[0]
    vol = tr.column("Vol")
    assert np.max(np.abs(np.diff(vol))) < 1e-8
    # conformality: g(t) g0^{-1} is a multiple of the identity
    g, g0 = tr.final_state.metric, normalize_volume(conformal_t3)
    ratio = np.einsum("ij...,jk...->ik...", g.g, g0.ginv)
    lam = ratio[0, 0]
    eye = np.eye(3).reshape(3, 3, 1, 1, 1)
    assert np.max(np.abs(ratio - lam * eye)) < 1e-10


def test_perturbed_flow_conserves_S(conformal_t3):
    tr = perturbed_yamabe_run(conformal_t3, 10, 1e-3)
    S = tr.column("S")
    assert np.max(np.abs(S - S[0])) / max(S[0], 1) < 1e-5
    assert np.max(np.abs(tr.column("Vol") - 1)) < 1e-6
    assert tr.meta["max_orthogonality_defect"] < 1e-9
    assert tr.meta["status"] == "completed"
    assert np.all(np.diff(tr.column("t")) > 0)


def test_perturbed_flow_constant_s_stationary():
    tr = perturbed_yamabe_run(flat_torus(3, None, 16, "spectral").metric, 3, 1e-3)
    assert np.all(tr.column("Lambda") == 0) and np.all(tr.column("v_norm") == 0)


def test_perturbed_flow_n4_rejected():
    g0 = flat_torus(4, None, 16, "spectral").metric
    g = conformal_deform(g0, random_function(g0.chart, 0.05, 1, 1))
    with pytest.raises(PreconditionError, match=r"b_n = \(n - 4\)/2 = 0"):
        perturbed_yamabe_run(g, 2, 1e-3)


def test_time_integrator_order(conformal_t3):
    T, dts = 3.2e-3, (8e-4, 4e-4, 2e-4)
    fs = [perturbed_yamabe_run(conformal_t3, int(round(T / dt)), dt).final_log_factor
          for dt in dts]
    e1, e2 = np.max(np.abs(fs[0] - fs[1])), np.max(np.abs(fs[1] - fs[2]))
    assert np.log2(e1 / e2) >= 3.5


def test_level_set_hessian_check(conformal_t3):
    assert level_set_hessian_check(flat_torus(3, None, 16, "spectral").metric) == 0.0
    g0 = flat_torus(4, None, 16, "spectral").metric
    g4 = conformal_deform(g0, random_function(g0.chart, 0.05, 1, 1))
    assert level_set_hessian_check(g4) == 0.0
    g = conformal_t3
    n = g.n
    s = scalar_curvature(g)
    v = solve_perturbation_v(g)
    phi = project_constants(s, g) - s - v
    ref = (n - 4) / (2 * n) * project_constants(s * s, g) * (n - 2) / (2 * n) * integrate(
        (n * phi) * (n * phi), g)
    assert level_set_hessian_check(g) == pytest.approx(ref, rel=1e-10)
    with pytest.raises(PreconditionError):
        level_set_hessian_check(g, yamabe_flow_run(g, 1, 1e-3))


def test_deterministic_csv(conformal_t3):
    a = perturbed_yamabe_run(conformal_t3, 3, 1e-3, seed=1).to_csv()
    b = perturbed_yamabe_run(conformal_t3, 3, 1e-3, seed=1).to_csv()
    assert a == b


def test_energy_S_of_flow_start_is_unit_volume(conformal_t3):
    tr = yamabe_flow_run(conformal_t3, 0, 1e-3)
    assert tr.rows[0]["S"] == pytest.approx(energy_S(normalize_volume(conformal_t3)))
