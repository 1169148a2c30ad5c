import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import DenseScheme
from tumblekin.analysis import check_symmetry
from tumblekin.equilibrium import (NumericalFailure, SolverConfig, bump_field, convergence_metric,
                                   evolve_step, normalize, solve_equilibrium, uniform_field, upwind_weight)
from tumblekin.mesh import GridField, build_mesh, row_averages, total_mass
from tumblekin.tumbling import TumblingModel

CASES = [(1.0, 4, 4, 2.0, 0.0), (1.3, 4, 8, 0.5, 0.5), (0.8, 2, 6, 1.0, 0.3), (3.0, 5, 5, 0.7, 0.9)]


def _random_field(m, seed):
    rng = np.random.default_rng(seed)
    f = GridField(rng.random(m.shape), rng.random(m.ny), rng.random(m.ny))
    f.interior[[0, -1]] = 0.0
    f.diag_left[[0, -1]] = 0.0
    f.diag_right[[0, -1]] = 0.0
    return f


def _dense(m, model, dt):
    lam = np.broadcast_to(np.asarray(model.lambda0(m.y), dtype=float), (m.ny,))
    return DenseScheme(m, lam, dt)


@pytest.mark.parametrize("G,I,J,lam,chi", CASES)
def test_one_step_matches_dense_solve(G, I, J, lam, chi):
    m = build_mesh(G, I, J)
    model = TumblingModel(lam, chi)
    cfg = SolverConfig(dt=0.07)
    f = _random_field(m, 3)
    got = evolve_step(m, model, f, cfg)
    ds = _dense(m, model, 0.07)
    want = ds.step(ds.to_vec(f))
    np.testing.assert_allclose(ds.to_vec(got), want, rtol=0, atol=1e-12)
    # display value on the diagonal is the mean of the pair
    idx = np.arange(1, m.ny - 1)
    np.testing.assert_allclose(got.interior[idx, m.diag_columns[idx]],
                               0.5 * (got.diag_left[idx] + got.diag_right[idx]), rtol=1e-15)


@pytest.mark.parametrize("G,I,J,lam,chi", CASES)
def test_equilibrium_is_dominant_eigenvector(G, I, J, lam, chi):
    m = build_mesh(G, I, J)
    model = TumblingModel(lam, chi)
    dt = m.dy / (2 * G)
    Q0, rep = solve_equilibrium(m, model, SolverConfig(tol=1e-15))
    assert rep.converged
    q, _ = _dense(m, model, dt).equilibrium()
    np.testing.assert_allclose(_dense(m, model, dt).to_vec(Q0), q, rtol=0, atol=1e-11)


def test_default_time_step_and_validation():
    m = build_mesh(2.0, 10, 10)
    assert SolverConfig().time_step(m) == pytest.approx(0.05)
    with pytest.raises(ValueError):
        SolverConfig(dt=-1.0)
    with pytest.raises(ValueError):
        SolverConfig(cadence=0)
    with pytest.raises(ValueError):
        SolverConfig(init="random")


def test_upwind_weight_zero_on_diagonal():
    m = build_mesh(1.7, 6, 12)
    for i in range(m.ny):
        assert upwind_weight(m, i, m.diag(i)) == 0.0
    assert upwind_weight(m, 0, m.nv - 1) == pytest.approx(2 * 1.7)


@pytest.fixture(scope="module")
def solved():
    m = build_mesh(1.0, 40, 40)
    out = {}
    for lam, chi in [(2.0, 0.0), (0.5, 0.0), (1.0, 0.5)]:
        out[(lam, chi)] = solve_equilibrium(m, TumblingModel(lam, chi))
    return m, out


def test_solution_properties(solved):
    m, out = solved
    for (lam, chi), (Q0, rep) in out.items():
        assert rep.converged and rep.reason == "converged"
        assert rep.final_residual < 1e-10
        assert abs(total_mass(m, Q0) - 1.0) < 1e-13
        assert rep.mass_history_max_deviation < 1e-12
        assert Q0.min_value(m) >= -1e-12
        assert row_averages(m, Q0)[1:-1].min() > 0
        if chi == 0.0:
            assert check_symmetry(m, Q0) <= 1e-8


def test_scaled_initial_state_gives_identical_result():
    m = build_mesh(1.0, 12, 12)
    model = TumblingModel(1.0, 0.3)
    b = bump_field(m)
    Qa, _ = solve_equilibrium(m, model, SolverConfig(init=b))
    Qb, _ = solve_equilibrium(m, model, SolverConfig(init=b.scaled(2.0)))
    Qc, _ = solve_equilibrium(m, model, SolverConfig(init=b))
    assert convergence_metric(m, Qa, Qc) == 0.0
    assert convergence_metric(m, Qa, Qb) == 0.0


def test_non_convergence_is_reported():
    m = build_mesh(1.0, 10, 10)
    Q0, rep = solve_equilibrium(m, TumblingModel(1.0), SolverConfig(cadence=10, max_steps=20))
    assert not rep.converged
    assert rep.steps_taken == 20
    assert rep.reason == "max_steps reached"
    assert len(rep.residual_history) == 2


def test_non_finite_input_raises():
    m = build_mesh(1.0, 4, 4)
    f = uniform_field(m)
    f.interior[2, 1] = np.nan
    with pytest.raises(NumericalFailure):
        evolve_step(m, TumblingModel(1.0), f, SolverConfig())
    with pytest.raises(NumericalFailure):
        normalize(m, GridField.zeros(m))


def test_mismatched_init_rejected():
    with pytest.raises(ValueError):
        solve_equilibrium(build_mesh(1.0, 4, 4), TumblingModel(1.0),
                          SolverConfig(init=uniform_field(build_mesh(1.0, 2, 2))))


@settings(max_examples=15, deadline=None)
@given(st.floats(0.2, 5.0), st.floats(0.0, 0.95), st.floats(0.2, 4.0), st.floats(1e-3, 10.0),
       st.integers(0, 1000))
def test_step_preserves_positivity(lam, chi, G, dt, seed):
    # implicit loss/transport with explicit nonnegative gain: a positive state stays nonnegative
    m = build_mesh(G, 3, 6)
    f = _random_field(m, seed)
    g = evolve_step(m, TumblingModel(lam, chi), f, SolverConfig(dt=dt))
    assert g.min_value(m) >= -1e-12


@settings(max_examples=15, deadline=None)
@given(st.floats(0.2, 5.0), st.floats(0.0, 0.95), st.integers(0, 1000), st.floats(-3, 3))
def test_step_is_linear(lam, chi, seed, a):
    m = build_mesh(1.0, 3, 3)
    model = TumblingModel(lam, chi)
    f, g = _random_field(m, seed), _random_field(m, seed + 1)
    cfg = SolverConfig(dt=0.1)
    lhs = evolve_step(m, model, f.scaled(a) + g, cfg)
    rhs = evolve_step(m, model, f, cfg).scaled(a) + evolve_step(m, model, g, cfg)
    np.testing.assert_allclose(lhs.interior, rhs.interior, atol=1e-12)
    np.testing.assert_allclose(lhs.diag_left, rhs.diag_left, atol=1e-12)
