import warnings

import numpy as np
import pytest

from wsmorse.errors import JacobiOverflowError, ValidationError
from wsmorse.jacobi import (
    SamplingWarning,
    TidalMatrix,
    find_conjugate_strings,
    integrate_jacobi,
    reconstruct_eta,
    state_at,
    tidal_matrix_from_grid,
    wronskian_check,
)
from wsmorse.worldsheet import equator_tube


@pytest.mark.parametrize("m", [1, 2, 3])
def test_flat_determinant(m):
    tr = integrate_jacobi(TidalMatrix.explicit(0.0, m), 5.0, 1e-3)
    assert np.max(np.abs(tr.detA - tr.taus**m)) < 1e-8
    assert find_conjugate_strings(tr) == []


@pytest.mark.parametrize("lam", [0.25, 1.0, 4.0])
@pytest.mark.parametrize("m", [1, 2, 3])
def test_oscillatory_roots_and_multiplicity(lam, m):
    w = np.sqrt(lam)
    tr = integrate_jacobi(TidalMatrix.explicit(lam, m), 2.5 * np.pi / w, 1e-3)
    assert np.max(np.abs(tr.A - (np.sin(w * tr.taus) / w)[:, None, None] * np.eye(m))) < 1e-8
    found = find_conjugate_strings(tr)
    assert [round(c.tau_star * w / np.pi, 6) for c in found] == [1.0, 2.0]
    for j, c in enumerate(found, 1):
        assert abs(c.tau_star - j * np.pi / w) < 1e-6
        assert c.multiplicity == m
        assert c.tangential == (m % 2 == 0)


def test_distinct_eigenvalues():
    tr = integrate_jacobi(TidalMatrix.explicit(np.diag([1.0, 2.0])), 5.0, 1e-3)
    found = find_conjugate_strings(tr)
    expected = [np.pi / np.sqrt(2), np.pi, 2 * np.pi / np.sqrt(2)]
    assert np.allclose([c.tau_star for c in found], expected, atol=1e-6)
    assert all(c.multiplicity == 1 for c in found)


def test_hyperbolic():
    for m in (1, 2, 3):
        tr = integrate_jacobi(TidalMatrix.explicit(-1.0, m), 5.0, 1e-3)
        assert np.max(np.abs(tr.detA[1:] / np.sinh(tr.taus[1:]) ** m - 1)) < 1e-7
        assert find_conjugate_strings(tr) == []


def test_wronskian_symmetric_and_control():
    tr = integrate_jacobi(TidalMatrix.explicit(np.array([[1.0, 0.3], [0.3, 2.0]])), 4.0, 1e-3)
    assert wronskian_check(tr) < 1e-10
    bad = integrate_jacobi(TidalMatrix.explicit(np.array([[0.0, 1.0], [0.0, 0.0]])), 1.0, 1e-3)
    assert wronskian_check(bad) == pytest.approx(np.sqrt(2) / 3, rel=1e-6)


def test_time_dependent_matrix_matches_constant():
    a = integrate_jacobi(TidalMatrix.explicit(1.0, 2), 3.0, 1e-3)
    b = integrate_jacobi(TidalMatrix.from_function(lambda t: np.eye(2), 2), 3.0, 1e-3)
    assert np.max(np.abs(a.A - b.A)) < 1e-12


def test_reconstruct_and_state_at():
    tr = integrate_jacobi(TidalMatrix.explicit(1.0, 2), 3.0, 1e-2)
    eta = reconstruct_eta(tr, [1.0, -2.0])
    assert np.max(np.abs(eta - np.outer(np.sin(tr.taus), [1.0, -2.0]))) < 1e-8
    A, Ad = state_at(tr, 1.2345)
    assert np.max(np.abs(A - np.sin(1.2345) * np.eye(2))) < 1e-8
    assert np.max(np.abs(Ad - np.cos(1.2345) * np.eye(2))) < 1e-8


def test_overflow():
    with pytest.raises(JacobiOverflowError):
        integrate_jacobi(TidalMatrix.explicit(-100.0, 1), 5.0, 1e-3)


def test_validation():
    with pytest.raises(ValidationError):
        integrate_jacobi(TidalMatrix.explicit(1.0, 1), -1.0, 1e-3)
    with pytest.raises(ValidationError):
        TidalMatrix.explicit(1.0)
    with pytest.raises(ValidationError):
        TidalMatrix.explicit(np.ones((2, 3)))


def test_coarse_sampling_warns_for_close_roots():
    tr = integrate_jacobi(TidalMatrix.explicit(np.diag([1.0, 1.0 + 1e-4])), 4.0, 0.05)
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        find_conjugate_strings(tr)
    assert any(issubclass(w.category, SamplingWarning) for w in rec)


def test_equator_tidal_eigenvalue_is_computed():
    # the sign follows from the curvature convention; it is not assumed
    K = 2.0
    grid = equator_tube(K, 3.0, 301, 16, dim=4)
    r = 1 / np.sqrt(K)
    frame = np.zeros((2, 4))
    frame[0, 1] = frame[1, 2] = 1 / r
    M = tidal_matrix_from_grid(grid, frame)
    vals = M(np.linspace(0, 3, 7))
    assert np.max(np.abs(vals + np.eye(2))) < 1e-8
    assert M.asymmetry(np.linspace(0, 3, 7)) < 1e-12
    tr = integrate_jacobi(M, 3.0, 1e-2)
    assert find_conjugate_strings(tr) == []
    with pytest.raises(ValidationError):
        M(5.0)
