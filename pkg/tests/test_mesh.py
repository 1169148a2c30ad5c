import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from tumblekin.mesh import GridField, build_mesh, prolong, row_averages, total_mass, velocity_average, y_integral


def test_nodes_and_spacing():
    m = build_mesh(2.0, 4, 8)
    assert m.dy == 0.5 and m.dv == 1 / 8
    assert m.y[0] == -2.0 and m.y[-1] == 2.0 and m.y[4] == 0.0
    assert m.v[0] == -1.0 and m.v[-1] == 1.0 and m.v[8] == 0.0
    assert m.shape == (9, 17)


@pytest.mark.parametrize("G,I,J", [(1.0, 4, 4), (0.7, 3, 9), (5.0, 10, 30), (1e-3, 7, 7)])
def test_diagonal_nodes_lie_on_singular_line(G, I, J):
    m = build_mesh(G, I, J)
    d = m.diag_columns
    np.testing.assert_allclose(m.v[d] * G, m.y, rtol=0, atol=1e-14 * G)
    W = m.weights()
    assert np.all(W[np.arange(m.ny), d] == 0.0)
    # W > 0 right of the diagonal, W < 0 left of it
    i = I
    assert W[i, d[i] + 1] > 0 and W[i, d[i] - 1] < 0


def test_build_mesh_rejects_bad_input():
    with pytest.raises(ValueError, match="J mod I != 0"):
        build_mesh(1.0, 300, 400)
    with pytest.raises(ValueError, match="G must be positive"):
        build_mesh(0.0, 4, 4)
    with pytest.raises(ValueError):
        build_mesh(1.0, 0, 4)


def test_column_and_row_lookup():
    m = build_mesh(1.0, 4, 8)
    assert m.column(0.25) == 10
    assert m.row(-0.5) == 2
    with pytest.raises(ValueError):
        m.column(0.3)


def _hand_average(m, f, i):
    """Trapezoid on each side of the diagonal, written out term by term."""
    d = m.diag(i)
    q = f.interior[i]
    left = sum(0.5 * m.dv * (q[j] + q[j + 1]) for j in range(d - 1)) + 0.5 * m.dv * (q[d - 1] + f.diag_right[i]) if d > 0 else 0.0
    right = 0.5 * m.dv * (f.diag_left[i] + q[d + 1]) + sum(0.5 * m.dv * (q[j] + q[j + 1]) for j in range(d + 1, m.nv - 1)) if d < m.nv - 1 else 0.0
    return 0.5 * (left + right)


def test_velocity_average_matches_hand_sum():
    m = build_mesh(1.0, 3, 6)
    rng = np.random.default_rng(1)
    f = GridField(rng.random(m.shape), rng.random(m.ny), rng.random(m.ny))
    for i in range(1, m.ny - 1):
        assert velocity_average(m, f, i) == pytest.approx(_hand_average(m, f, i), rel=1e-14)
    avg = row_averages(m, f)
    assert avg[0] == 0.0 and avg[-1] == 0.0
    for i in range(1, m.ny - 1):
        assert avg[i] == pytest.approx(velocity_average(m, f, i), rel=1e-14)


def test_velocity_average_ignores_display_value():
    m = build_mesh(1.0, 2, 4)
    f = GridField.from_function(m, lambda y, v: 1.0 + v)
    g = f.copy()
    g.interior[np.arange(m.ny), m.diag_columns] = 1e6
    np.testing.assert_array_equal(row_averages(m, f), row_averages(m, g))


def test_piecewise_linear_in_v_is_integrated_exactly():
    # a jump across the diagonal, linear on each side: trapezoid is exact
    v = sp.symbols("v")
    m = build_mesh(1.0, 4, 8)
    i = 5
    vd = sp.Rational(m.diag(i) - m.J, m.J)
    left_expr, right_expr = 2 + 3 * v, 7 - v
    exact = (sp.integrate(left_expr, (v, -1, vd)) + sp.integrate(right_expr, (v, vd, 1))) / 2
    f = GridField.zeros(m)
    f.interior[i] = np.where(m.v < m.v[m.diag(i)], 2 + 3 * m.v, 7 - m.v)
    f.diag_right[i] = 2 + 3 * m.v[m.diag(i)]
    f.diag_left[i] = 7 - m.v[m.diag(i)]
    assert velocity_average(m, f, i) == pytest.approx(float(exact), rel=1e-14)


def test_simpson_exact_for_cubics():
    y = sp.symbols("y")
    m = build_mesh(1.5, 5, 5)
    poly = 1 - 2 * y + 3 * y ** 2 + 0.5 * y ** 3
    exact = float(sp.integrate(poly, (y, -1.5, 1.5)))
    vals = np.array([float(poly.subs(y, yy)) for yy in m.y])
    assert y_integral(m, vals) == pytest.approx(exact, rel=1e-13)


def test_y_integral_shape_check():
    m = build_mesh(1.0, 2, 2)
    with pytest.raises(ValueError):
        y_integral(m, np.ones(3))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(1, 4), st.floats(0.1, 10.0),
       st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 2 ** 31 - 1))
def test_quadrature_is_linear(I, r, G, a, b, seed):
    m = build_mesh(G, I, I * r)
    rng = np.random.default_rng(seed)
    f = GridField(rng.random(m.shape), rng.random(m.ny), rng.random(m.ny))
    g = GridField(rng.random(m.shape), rng.random(m.ny), rng.random(m.ny))
    lhs = total_mass(m, f.scaled(a) + g.scaled(b))
    rhs = a * total_mass(m, f) + b * total_mass(m, g)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 8), st.integers(1, 3), st.floats(0.01, 50.0))
def test_constant_field_average(I, r, G):
    m = build_mesh(G, I, I * r)
    f = GridField(np.ones(m.shape), np.ones(m.ny), np.ones(m.ny))
    avg = row_averages(m, f)
    np.testing.assert_allclose(avg[1:-1], 1.0, rtol=1e-13)


def test_min_value_skips_display_and_boundaries():
    m = build_mesh(1.0, 2, 2)
    f = GridField(np.ones(m.shape), np.ones(m.ny), np.ones(m.ny))
    f.interior[0] = -5.0
    f.interior[2, m.diag(2)] = -7.0
    assert f.min_value(m) == 1.0
    f.diag_left[1] = -0.5
    assert f.min_value(m) == -0.5


def test_prolong_reproduces_bilinear_fields_exactly():
    coarse, fine = build_mesh(2.0, 4, 8), build_mesh(2.0, 12, 24)
    # no y*v term: along the diagonal v = y/G that would be quadratic in y
    lin = lambda y, v: 1.0 + 0.3 * y - 0.7 * v
    f = prolong(coarse, GridField.from_function(coarse, lin), fine)
    want = GridField.from_function(fine, lin)
    np.testing.assert_allclose(f.interior, want.interior, atol=1e-14)
    np.testing.assert_allclose(f.diag_left, want.diag_left, atol=1e-14)
    np.testing.assert_allclose(f.diag_right, want.diag_right, atol=1e-14)


def test_prolong_rejects_non_nested_meshes():
    with pytest.raises(ValueError):
        prolong(build_mesh(1.0, 4, 4), GridField.zeros(build_mesh(1.0, 4, 4)), build_mesh(1.0, 6, 6))
    with pytest.raises(ValueError):
        prolong(build_mesh(1.0, 4, 4), GridField.zeros(build_mesh(1.0, 4, 4)), build_mesh(1.0, 8, 16))
