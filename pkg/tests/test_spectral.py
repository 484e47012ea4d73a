import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cellwave.spectral import (
    GridSampling,
    TrigSeries,
    deriv_theta,
    dtheta_hilbert_samples,
    grid_angles,
    half_grid_angles,
    hilbert,
    hilbert_quadrature_oracle,
    project,
    synthesize,
)

coeff = st.floats(-1, 1, allow_nan=False)


def trig_series(max_modes=20):
    return st.integers(1, max_modes).flatmap(
        lambda m: st.tuples(st.lists(coeff, min_size=m + 1, max_size=m + 1),
                            st.lists(coeff, min_size=m, max_size=m))
    ).map(lambda cs: TrigSeries(cs[0], cs[1]))


def test_grid_validation():
    with pytest.raises(ValueError):
        GridSampling(12, np.zeros(12))
    with pytest.raises(ValueError):
        GridSampling(8, np.zeros(8))
    with pytest.raises(ValueError):
        GridSampling(16, np.zeros(15))


def test_project_constant():
    ser = project(GridSampling.from_function(lambda t: np.ones_like(t), 64))
    assert ser.cos_coeffs[0] == pytest.approx(1.0, abs=1e-15)
    assert np.max(np.abs(ser.cos_coeffs[1:])) < 1e-15
    assert np.max(np.abs(ser.sin_coeffs)) < 1e-15


def test_project_cos3():
    ser = project(GridSampling.from_function(lambda t: np.cos(3 * t), 64))
    expected = np.zeros(ser.truncation + 1)
    expected[3] = 1.0
    np.testing.assert_allclose(ser.cos_coeffs, expected, atol=1e-15)
    np.testing.assert_allclose(ser.sin_coeffs, 0, atol=1e-15)


def test_project_cos_squared_against_quadrature():
    f = lambda t: np.cos(t) ** 2
    ser = project(GridSampling.from_function(f, 64), truncation=6)
    # independent oracle: composite trapezoid on a fine, unrelated grid
    t = np.linspace(0, 2 * np.pi, 4001)
    quad = [np.trapezoid(f(t), t) / (2 * np.pi)]
    quad += [np.trapezoid(f(t) * np.cos(n * t), t) / np.pi for n in range(1, 7)]
    np.testing.assert_allclose(ser.cos_coeffs, quad, atol=1e-12)
    assert ser.cos_coeffs[0] == pytest.approx(0.5, abs=1e-15)
    assert ser.cos_coeffs[2] == pytest.approx(0.5, abs=1e-15)


def test_project_rejects_nonfinite():
    vals = np.zeros(16)
    vals[3] = np.nan
    with pytest.raises(ValueError):
        project(GridSampling(16, vals))


def test_hilbert_examples():
    const = hilbert(TrigSeries([1.0, 0.0, 0.0], [0.0, 0.0]))
    assert np.all(const.cos_coeffs == 0) and np.all(const.sin_coeffs == 0)
    h1 = hilbert(TrigSeries([0.0, 1.0], [0.0]))
    np.testing.assert_array_equal(h1.sin_coeffs, [1.0])
    np.testing.assert_array_equal(h1.cos_coeffs, [0.0, 0.0])
    hs = hilbert(TrigSeries([0.0, 0.0], [1.0]))
    np.testing.assert_array_equal(hs.cos_coeffs, [0.0, -1.0])


def test_hilbert_cos2_matches_quadrature():
    n = 256
    g = GridSampling.from_function(lambda t: np.cos(2 * t), n)
    theta = half_grid_angles(n)
    multiplier = hilbert(project(g))(theta)
    np.testing.assert_allclose(multiplier, np.sin(2 * theta), atol=1e-13)
    np.testing.assert_allclose(hilbert_quadrature_oracle(g, theta), multiplier, atol=1e-10)


@pytest.mark.parametrize("func, expected", [
    (lambda t: np.ones_like(t), lambda t: np.zeros_like(t)),
    (np.cos, np.sin),
    (np.sin, lambda t: -np.cos(t)),
])
def test_quadrature_oracle_examples(func, expected):
    n = 512
    theta = half_grid_angles(n)
    tol = 1e-12 if func(0.0) == 1.0 and func(1.0) == 1.0 else 1e-8
    vals = hilbert_quadrature_oracle(GridSampling.from_function(func, n), theta)
    np.testing.assert_allclose(vals, expected(theta), atol=tol)


def test_quadrature_oracle_rejects_node():
    g = GridSampling.from_function(np.cos, 32)
    with pytest.raises(ValueError, match="singular"):
        hilbert_quadrature_oracle(g, grid_angles(32)[5])


def test_deriv_examples():
    d = deriv_theta(TrigSeries([3.0, 0, 0, 0, 0, 0], [0] * 5))
    assert np.all(d.cos_coeffs == 0) and np.all(d.sin_coeffs == 0)
    s5 = np.zeros(5)
    s5[4] = 1.0
    d = deriv_theta(TrigSeries(np.zeros(6), s5))
    assert d.cos_coeffs[5] == 5.0 and np.count_nonzero(d.cos_coeffs) == 1
    c2 = TrigSeries([0, 0, 1.0], [0, 0])
    dh = deriv_theta(hilbert(c2))
    np.testing.assert_array_equal(dh.cos_coeffs, [0, 0, 2.0])
    np.testing.assert_array_equal(dh.sin_coeffs, [0, 0])


@given(trig_series())
def test_hilbert_squared_is_minus_identity_on_zero_mean(ser):
    hh = hilbert(hilbert(ser))
    np.testing.assert_allclose(hh.cos_coeffs[1:], -ser.cos_coeffs[1:], atol=0)
    np.testing.assert_allclose(hh.sin_coeffs, -ser.sin_coeffs, atol=0)
    assert hh.cos_coeffs[0] == 0


@given(trig_series())
def test_hilbert_commutes_with_derivative(ser):
    a = hilbert(deriv_theta(ser))
    b = deriv_theta(hilbert(ser))
    np.testing.assert_array_equal(a.cos_coeffs, b.cos_coeffs)
    np.testing.assert_array_equal(a.sin_coeffs, b.sin_coeffs)


@given(trig_series(31))
def test_project_synthesize_round_trip(ser):
    back = project(synthesize(ser, 64), ser.truncation)
    np.testing.assert_allclose(back.cos_coeffs, ser.cos_coeffs, atol=1e-13)
    np.testing.assert_allclose(back.sin_coeffs, ser.sin_coeffs, atol=1e-13)


@settings(max_examples=25, deadline=None)
@given(trig_series(40))
def test_multiplier_matches_quadrature_at_512(ser):
    n = 512
    samples = synthesize(ser, n)
    theta = half_grid_angles(n)
    np.testing.assert_allclose(hilbert(ser)(theta), hilbert_quadrature_oracle(samples, theta),
                               atol=1e-8)


def test_dtheta_hilbert_samples_is_composed_pipeline():
    rng = np.random.default_rng(4)
    ser = TrigSeries(rng.normal(size=30), rng.normal(size=29))
    g = synthesize(ser, 128)
    ref = synthesize(deriv_theta(hilbert(project(g))), 128).values
    np.testing.assert_allclose(dtheta_hilbert_samples(g.values), ref, atol=1e-12)
