import numpy as np
import pytest
import sympy as sp
from dataclasses import replace

from wsmorse.errors import ChartDomainError, FrameDegeneracyError, SingularMetricError, ValidationError
from wsmorse.manifold import (
    ConstantCurvatureSpec,
    MetricChart,
    christoffel_at,
    christoffel_fd,
    constant_curvature_riemann,
    flat_chart,
    frame_gram_drift,
    hyperbolic_chart,
    lower_last,
    metric_at,
    parallel_transport_frame,
    product_time_sphere_chart,
    riemann_at,
    riemann_symmetry_errors,
    round_sphere_chart,
    sectional_curvature,
)


def _symbolic_curvature(g, coords):
    """Christoffels and R_abc^d from the commutator convention, computed symbolically."""
    n = len(coords)
    ginv = g.inv()
    G = [[[sp.simplify(sum(ginv[d, e] * (sp.diff(g[e, a], coords[c]) + sp.diff(g[e, c], coords[a]) - sp.diff(g[a, c], coords[e])) for e in range(n)) / 2)
           for c in range(n)] for a in range(n)] for d in range(n)]  # G[d][a][c] = Gamma^d_ac

    def cov_deriv_covector(w):
        # (nabla_b w)_c
        return [[sp.diff(w[c], coords[b]) - sum(G[d][b][c] * w[d] for d in range(n)) for c in range(n)] for b in range(n)]

    def cov_deriv_tensor(T):
        # nabla_a T_bc
        return [[[sp.diff(T[b][c], coords[a]) - sum(G[d][a][b] * T[d][c] + G[d][a][c] * T[b][d] for d in range(n))
                  for c in range(n)] for b in range(n)] for a in range(n)]

    w = [sp.Function(f"w{i}")(*coords) for i in range(n)]
    DDw = cov_deriv_tensor(cov_deriv_covector(w))
    R = np.empty((n, n, n, n), dtype=object)
    for a in range(n):
        for b in range(n):
            for c in range(n):
                comm = sp.expand(DDw[a][b][c] - DDw[b][a][c])
                for d in range(n):
                    R[a, b, c, d] = sp.simplify(comm.coeff(w[d]))
    return G, R


def test_commutator_convention_on_two_sphere():
    th, ph = sp.symbols("theta phi")
    _, R = _symbolic_curvature(sp.diag(1, sp.sin(th) ** 2), [th, ph])
    chart = round_sphere_chart(2, 1.0)
    x = np.array([0.7, 1.3])
    num = riemann_at(chart, x).riemann
    sym = np.array([[[[float(R[a, b, c, d].subs({th: 0.7, ph: 1.3})) for d in range(2)] for c in range(2)] for b in range(2)] for a in range(2)])
    assert np.max(np.abs(num - sym)) < 1e-12
    # pinned sign: R_{theta phi theta}^{phi} = +1 on the unit sphere
    assert num[0, 1, 0, 1] == pytest.approx(1.0, abs=1e-12)


def test_custom_metric_fd_matches_symbolic():
    u, v = sp.symbols("u v")
    g = sp.diag(1, sp.exp(2 * u) * (1 + sp.Rational(1, 3) * sp.sin(v)) ** 2)
    G, R = _symbolic_curvature(g, [u, v])
    gf = sp.lambdify((u, v), g, "numpy")
    chart = MetricChart(dim=2, signature=(1, 1), metric_fn=lambda x: np.array(gf(x[0], x[1]), dtype=float), fd_step=1e-4)
    x = np.array([0.2, 0.9])
    Gs = np.array([[[float(G[d][a][c].subs({u: 0.2, v: 0.9})) for c in range(2)] for a in range(2)] for d in range(2)])
    assert np.max(np.abs(christoffel_at(chart, x) - Gs)) < 1e-7
    Rs = np.array([[[[float(R[a, b, c, d].subs({u: 0.2, v: 0.9})) for d in range(2)] for c in range(2)] for b in range(2)] for a in range(2)])
    sample = riemann_at(chart, x)
    assert sample.mode == "finite_difference"
    assert np.max(np.abs(sample.riemann - Rs)) < 1e-6


@pytest.mark.parametrize(
    "chart,K,x",
    [
        (round_sphere_chart(3, 1.0), 1.0, [1.0, 2.0, 0.4]),
        (round_sphere_chart(4, 0.5), 0.5, [0.6, 1.1, 2.2, 5.0]),
        (hyperbolic_chart(3, -1.0), -1.0, [0.3, -0.2, 1.4]),
        (hyperbolic_chart(4, -2.0), -2.0, [0.1, 0.0, 2.0, 1.1]),
    ],
)
def test_constant_curvature_roundtrip(chart, K, x):
    x = np.asarray(x, dtype=float)
    g = metric_at(chart, x)
    ref = constant_curvature_riemann(g, K)
    analytic = riemann_at(chart, x)
    assert analytic.mode == "analytic"
    assert np.max(np.abs(analytic.riemann - ref)) < 1e-10
    fd = riemann_at(replace(chart, analytic_riemann=None, analytic_christoffel=None), x)
    assert np.max(np.abs(fd.riemann_lowered - lower_last(ref, g))) < 1e-6
    assert max(riemann_symmetry_errors(analytic).values()) < 1e-10
    assert max(riemann_symmetry_errors(fd).values()) < 1e-6


def test_sectional_curvature_recovers_K():
    rng = np.random.default_rng(3)
    chart = round_sphere_chart(3, 2.5)
    for _ in range(5):
        u, v = rng.normal(size=(2, 3))
        assert sectional_curvature(chart, np.array([1.2, 0.9, 3.0]), u, v) == pytest.approx(2.5, rel=1e-12)


def test_christoffel_fd_second_order():
    chart = round_sphere_chart(3, 1.0)
    x = np.array([1.1, 0.8, 2.0])
    exact = christoffel_at(chart, x)
    hs = np.array([1e-2, 1e-3, 1e-4])
    errs = [np.max(np.abs(christoffel_fd(chart, x, h) - exact)) for h in hs]
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert abs(slope - 2.0) < 0.1


def test_flat_chart_has_no_curvature():
    chart = flat_chart(5)
    assert chart.is_lorentzian
    x = np.random.default_rng(0).normal(size=(7, 5))
    assert not np.any(riemann_at(chart, x).riemann)
    assert not np.any(christoffel_at(chart, x))


def test_product_sphere_curvature_lives_on_sphere_block():
    chart = product_time_sphere_chart(4, 0.5)
    x = np.array([0.3, 1.0, 1.4, 2.0])
    R = riemann_at(chart, x).riemann
    assert not np.any(R[0]) and not np.any(R[:, 0]) and not np.any(R[:, :, 0]) and not np.any(R[..., 0])
    fd = riemann_at(replace(chart, analytic_riemann=None, analytic_christoffel=None), x)
    assert np.max(np.abs(fd.riemann - R)) < 1e-6


def test_singular_metric_rejected():
    chart = MetricChart(dim=2, signature=(1, 1), metric_fn=lambda x: np.diag([1.0, x[0] ** 2]))
    with pytest.raises(SingularMetricError):
        metric_at(chart, np.array([0.0, 1.0]))


def test_domain_checks():
    with pytest.raises(ChartDomainError):
        metric_at(hyperbolic_chart(3), np.array([0.0, 0.0, -1.0]))
    with pytest.raises(ChartDomainError):
        riemann_at(round_sphere_chart(3), np.array([0.0, 1.0, 1.0]))


def test_constant_curvature_validation():
    with pytest.raises(ValidationError):
        ConstantCurvatureSpec("round_sphere", -1.0, 3)
    with pytest.raises(ValidationError):
        ConstantCurvatureSpec("hyperbolic", 1.0, 3)
    with pytest.raises(ValidationError):
        ConstantCurvatureSpec("torus", 0.0, 3)
    chart = ConstantCurvatureSpec("product_time_sphere", 1.0, 3).chart()
    assert chart.is_lorentzian


def test_parallel_transport_along_great_circle():
    # unit S^2 equator: e_theta is parallel along phi
    chart = round_sphere_chart(2, 1.0)
    taus = np.linspace(0, 2 * np.pi, 401)

    def curve(t):
        return np.array([np.pi / 2, t]), np.array([0.0, 1.0])

    fr = parallel_transport_frame(chart, curve, [[1.0, 0.0]], taus)
    assert np.max(np.abs(fr.frames[:, 0] - [1.0, 0.0])) < 1e-12
    assert frame_gram_drift(chart, fr) < 1e-12


def test_parallel_transport_holonomy_on_latitude():
    # transport around the circle theta = th0 rotates a vector by 2 pi cos(th0)
    chart = round_sphere_chart(2, 1.0)
    th0 = 1.0
    taus = np.linspace(0, 2 * np.pi, 2001)

    def curve(t):
        return np.array([th0, t]), np.array([0.0, 1.0])

    fr = parallel_transport_frame(chart, curve, [[1.0, 0.0]], taus)
    e = fr.frames[-1, 0]
    angle = np.arctan2(e[1] * np.sin(th0), e[0])
    expected = -2 * np.pi * np.cos(th0)
    assert np.angle(np.exp(1j * (angle - expected))) == pytest.approx(0.0, abs=1e-8)
    assert frame_gram_drift(chart, fr) < 1e-8


def test_transport_rejects_bad_frames():
    chart = round_sphere_chart(2, 1.0)
    taus = np.linspace(0, 1, 11)

    def curve(t):
        return np.array([np.pi / 2, t]), np.array([0.0, 1.0])

    with pytest.raises(FrameDegeneracyError):
        parallel_transport_frame(chart, curve, [[2.0, 0.0]], taus)
    with pytest.raises(FrameDegeneracyError):
        parallel_transport_frame(chart, curve, [[0.0, 1.0]], taus)
