import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wsmorse.errors import ConjugateStringError, GridMismatchError, ValidationError
from wsmorse.indexform import (
    VariationField,
    index_form,
    index_form_with_breaks,
    jacobi_field_to,
    negative_mode,
    positivity_certificate,
    random_variation_field,
    sine_field,
)
from wsmorse.jacobi import TidalMatrix, integrate_jacobi

ZERO1 = TidalMatrix.explicit(0.0, 1)


def tent(taus, peak, tb):
    T = taus[-1]

    def left(t):
        return (peak * t / tb)[:, None], np.full((len(t), 1), peak / tb), np.zeros((len(t), 1))

    def right(t):
        return (peak * (T - t) / (T - tb))[:, None], np.full((len(t), 1), -peak / (T - tb)), np.zeros((len(t), 1))

    return VariationField.from_pieces(taus, [left, right], breaks=[tb])


def test_sine_field_value():
    taus = np.linspace(0, 1, 2001)
    V = sine_field(taus, 1)
    assert index_form(V, V, ZERO1) == pytest.approx(np.pi**3, abs=1e-6)


def test_zero_field_gives_exact_zero():
    taus = np.linspace(0, 2, 101)
    V = 0.0 * sine_field(taus, 2)
    W = random_variation_field(np.random.default_rng(0), taus, 2, 2)
    assert index_form(V, W, TidalMatrix.explicit(1.0, 2)) == 0.0


def test_jacobi_field_has_zero_index():
    T = 2.0
    taus = np.linspace(0, T, 2001)
    V = sine_field(taus, 1)
    M = TidalMatrix.explicit((np.pi / T) ** 2, 1)
    assert abs(index_form(V, V, M)) < 1e-8
    assert abs(index_form_with_breaks(V, V, M)) < 1e-8


def test_tent_both_forms():
    T, p = 2.0, 0.7
    taus = np.linspace(0, T, 401)
    V = tent(taus, p, T / 2)
    expected = 2 * np.pi * 4 * p * p / T
    assert index_form(V, V, ZERO1) == pytest.approx(expected, rel=1e-12)
    assert index_form_with_breaks(V, V, ZERO1) == pytest.approx(expected, rel=1e-12)
    ((tb, jump),) = V.jumps()
    assert tb == pytest.approx(1.0)
    assert jump[0] == pytest.approx(-4 * p / T)


def test_extended_jacobi_field_only_jump_survives():
    T, r = 1.5 * np.pi, np.pi
    taus = np.linspace(0, T, 3001)
    M = TidalMatrix.explicit(1.0, 1)
    J, v, _ = jacobi_field_to(M, r, taus)
    # V supported near r
    def bump(t):
        s = np.clip((t - 2.5) / (T - 2.5), 0, 1)
        w = np.sin(np.pi * s) ** 2
        dw = np.pi / (T - 2.5) * np.sin(2 * np.pi * s) * ((t > 2.5) & (t < T))
        ddw = 2 * (np.pi / (T - 2.5)) ** 2 * np.cos(2 * np.pi * s) * ((t > 2.5) & (t < T))
        return w[:, None], dw[:, None], ddw[:, None]

    V = VariationField.from_function(taus, bump)
    i = 2000
    expected = 2 * np.pi * V.values[i, 0] * J.segments[0].d1[-1, 0]
    assert index_form_with_breaks(V, J, M) == pytest.approx(expected, rel=1e-10)
    assert index_form(V, J, M) == pytest.approx(expected, rel=1e-5)


def test_with_breaks_requires_vanishing_first_field():
    taus = np.linspace(0, 1, 101)
    V = VariationField.from_function(taus, lambda t: (np.ones((len(t), 1)), np.zeros((len(t), 1)), np.zeros((len(t), 1))))
    with pytest.raises(ValidationError):
        index_form_with_breaks(V, V, ZERO1)


def test_grid_mismatch():
    a = sine_field(np.linspace(0, 1, 101), 1)
    b = sine_field(np.linspace(0, 1, 201), 1)
    with pytest.raises(GridMismatchError):
        index_form(a, b, ZERO1)
    with pytest.raises(GridMismatchError):
        index_form(sine_field(np.linspace(0, 1, 101), 2), a, ZERO1)


def test_field_validation():
    taus = np.linspace(0, 1, 101)
    with pytest.raises(ValidationError):
        VariationField.from_samples(taus, np.zeros(101), breaks=[0.1234])
    with pytest.raises(ValidationError):
        VariationField.from_samples(taus, np.zeros(101), breaks=[0.0])
    jump = np.where(taus < 0.5, 0.0, 1.0)
    with pytest.raises(ValidationError):
        VariationField.from_pieces(
            taus,
            [lambda t: (np.zeros((len(t), 1)),) * 3, lambda t: (np.ones((len(t), 1)), np.zeros((len(t), 1)), np.zeros((len(t), 1)))],
            breaks=[0.5],
        )
    assert VariationField.from_samples(taus, jump * 0.0, breaks=[0.5]).breaks == (0.5,)


def test_from_samples_converges_to_analytic():
    rng = np.random.default_rng(4)
    errs = []
    for N in (400, 800, 1600):
        taus = np.linspace(0, 2, N + 1)
        V = random_variation_field(np.random.default_rng(7), taus, 2, 2)
        W = random_variation_field(np.random.default_rng(8), taus, 2, 1)
        M = TidalMatrix.explicit(np.diag(rng.uniform(-1, 1, 2)) * 0 + np.diag([0.5, -0.3]))
        S = VariationField.from_samples(taus, V.values, V.breaks)
        errs.append(abs(index_form(S, W, M) - index_form(V, W, M)))
    slopes = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(slopes > 1.7)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.sampled_from([-1.0, 0.0, 1.0]))
def test_symmetry_and_bilinearity(seed, m, lam):
    rng = np.random.default_rng(seed)
    taus = np.linspace(0, float(rng.uniform(0.5, 3)), 801)
    M = TidalMatrix.explicit(lam, m)
    U, V, W = (random_variation_field(rng, taus, m, int(rng.integers(0, 4))) for _ in range(3))
    a, b = rng.normal(size=2)
    vw = index_form(V, W, M)
    assert abs(vw - index_form(W, V, M)) <= 1e-12 * max(1.0, abs(vw))
    lhs = index_form(a * U + b * V, W, M)
    rhs = a * index_form(U, W, M) + b * vw
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.sampled_from([-1.0, 0.0, 1.0]))
def test_integration_by_parts_identity(seed, m, lam):
    rng = np.random.default_rng(seed)
    taus = np.linspace(0, float(rng.uniform(1, 3)), 60001)
    M = TidalMatrix.explicit(lam, m)
    V = random_variation_field(rng, taus, m, int(rng.integers(0, 4)))
    W = random_variation_field(rng, taus, m, int(rng.integers(0, 4)))
    assert abs(index_form(V, W, M) - index_form_with_breaks(V, W, M)) < 1e-6


def test_certificate_matches_flat_sine():
    taus = np.linspace(0, 1, 2001)
    V = sine_field(taus, 1)
    assert positivity_certificate(ZERO1, None, V) == pytest.approx(index_form(V, V, ZERO1), rel=1e-5)


def test_certificate_of_jacobi_field_is_zero():
    M = TidalMatrix.explicit(np.diag([0.5, -1.0]))
    traj = integrate_jacobi(M, 2.0, 1e-3)
    c = np.array([0.3, -1.1])
    taus = traj.taus

    def fn(t):
        A = traj.A @ c
        return A, traj.Adot @ c, -np.einsum("ij,tj->ti", M.constant, A)

    V = VariationField.from_function(taus, fn)
    assert abs(positivity_certificate(M, traj, V)) < 1e-7


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_negative_curvature_is_positive(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 4))
    M = TidalMatrix.explicit(-float(rng.uniform(0.1, 2)), m)
    taus = np.linspace(0, float(rng.uniform(0.5, 4)), 401)
    V = random_variation_field(rng, taus, m, int(rng.integers(0, 4)))
    assert positivity_certificate(M, None, V) > 0
    assert index_form(V, V, M) > 0


def test_certificate_refuses_conjugate_string():
    M = TidalMatrix.explicit(1.0, 1)
    taus = np.linspace(0, 4.0, 4001)
    with pytest.raises(ConjugateStringError):
        positivity_certificate(M, None, sine_field(taus, 1))


def test_certificate_grid_mismatch():
    M = TidalMatrix.explicit(0.0, 1)
    traj = integrate_jacobi(M, 1.0, 1e-2)
    with pytest.raises(GridMismatchError):
        positivity_certificate(M, traj, sine_field(np.linspace(0, 1, 51), 1))


def _k(taus, c=1.0):
    T = taus[-1]
    w = np.pi / T
    s = c / np.sin(w * np.pi)
    return VariationField.from_function(taus, lambda t: ((s * np.sin(w * t))[:, None], (s * w * np.cos(w * t))[:, None], (-s * w * w * np.sin(w * t))[:, None]))


def test_negative_mode_values():
    T = 1.5 * np.pi
    taus = np.linspace(0, T, 3001)
    M = TidalMatrix.explicit(1.0, 1)
    res = negative_mode(M, np.pi, T, _k(taus))
    assert res.c == pytest.approx(1.0, rel=1e-12)
    assert res.I_kJ == pytest.approx(-2 * np.pi, rel=1e-5)
    assert res.I_kJ_with_breaks == pytest.approx(-2 * np.pi, rel=1e-9)
    assert abs(res.I_JJ) < 1e-9
    assert res.I_total_limit == pytest.approx(-4 * np.pi, rel=1e-4)
    # I(eta, eta) = eps^2 I_kk + 2 I_kJ + eps^-2 I_JJ
    e2 = np.array(res.epsilons) ** 2
    tot = np.array(res.I_total_by_eps)
    assert np.all(np.diff(tot) > 0) == (res.I_kk < 0)
    slope = np.polyfit(e2, tot, 1)[0]
    assert slope == pytest.approx(res.I_kk, rel=1e-4)


def test_negative_mode_scales_with_c():
    T = 1.5 * np.pi
    taus = np.linspace(0, T, 3001)
    M = TidalMatrix.explicit(1.0, 1)
    one = negative_mode(M, np.pi, T, _k(taus))
    two = negative_mode(M, np.pi, T, _k(taus, 2.0))
    assert two.c == pytest.approx(2 * one.c)
    assert two.I_kJ == pytest.approx(2 * one.I_kJ)
    assert two.I_total_limit == pytest.approx(2 * one.I_total_limit, rel=1e-6)
    flipped = negative_mode(M, np.pi, T, -1.0 * _k(taus))
    assert flipped.c == pytest.approx(one.c)


def test_negative_mode_errors():
    T = 1.5 * np.pi
    taus = np.linspace(0, T, 3001)
    with pytest.raises(ConjugateStringError):
        negative_mode(TidalMatrix.explicit(0.5, 1), np.pi, T, _k(taus))
    w = 3 * np.pi / T  # vanishes at r = pi
    k0 = VariationField.from_function(taus, lambda t: (np.sin(w * t)[:, None], (w * np.cos(w * t))[:, None], (-w * w * np.sin(w * t))[:, None]))
    with pytest.raises(ValidationError):
        negative_mode(TidalMatrix.explicit(1.0, 1), np.pi, T, k0)
    with pytest.raises(ValidationError):
        negative_mode(TidalMatrix.explicit(1.0, 1), 5.0, T, _k(taus))
