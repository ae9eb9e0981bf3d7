"""Nambu-Goto kinematics on a discretized closed-string tube.

The tube is sampled on a uniform ``tau`` grid (second-order finite
differences, one-sided at the two ends) and a uniform periodic ``sigma``
grid on ``[0, 2 pi)``.  Derivatives in ``sigma`` are spectral (FFT), which
is exact for the trigonometric embeddings used by the built-in scenarios.
An embedding may wind around a periodic chart coordinate; ``winding`` is
the jump ``X(sigma + 2 pi) - X(sigma)``.

Quadrature is the trapezoid rule in ``tau`` and the rectangle rule in
``sigma``; both reduce with numpy's pairwise summation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DegenerateTubeError, GridMismatchError, ValidationError
from .manifold import MetricChart, christoffel_at, metric_at, riemann_at

TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# discrete calculus


def sigma_derivative(F, axis: int = 1, order: int = 1) -> np.ndarray:
    """Spectral derivative of a field periodic on ``[0, 2 pi)`` along ``axis``."""
    F = np.asarray(F, dtype=float)
    N = F.shape[axis]
    k = np.fft.fftfreq(N, d=1.0 / N)
    if order == 1:
        mult = 1j * k
        if N % 2 == 0:
            mult[N // 2] = 0.0
    elif order == 2:
        mult = -(k**2)
    else:
        raise ValueError("order must be 1 or 2")
    shape = [1] * F.ndim
    shape[axis] = N
    Fh = np.fft.fft(F, axis=axis) * mult.reshape(shape)
    return np.real(np.fft.ifft(Fh, axis=axis))


def tau_derivative(F, h: float) -> np.ndarray:
    return np.gradient(np.asarray(F, dtype=float), h, axis=0, edge_order=2)


def tau_second_derivative(F, h: float) -> np.ndarray:
    F = np.asarray(F, dtype=float)
    if F.shape[0] < 4:
        raise ValidationError("need at least 4 tau samples for second derivatives")
    out = np.empty_like(F)
    out[1:-1] = F[2:] - 2.0 * F[1:-1] + F[:-2]
    out[0] = 2.0 * F[0] - 5.0 * F[1] + 4.0 * F[2] - F[3]
    out[-1] = 2.0 * F[-1] - 5.0 * F[-2] + 4.0 * F[-3] - F[-4]
    return out / (h * h)


def _trapezoid_weights(N: int, h: float) -> np.ndarray:
    w = np.full(N, h)
    w[0] = w[-1] = 0.5 * h
    return w


# ---------------------------------------------------------------------------
# grid


@dataclass(frozen=True)
class WorldsheetGrid:
    taus: np.ndarray
    X: np.ndarray  # (Nt, Ns, n)
    chart: MetricChart
    winding: np.ndarray = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        taus = np.asarray(self.taus, dtype=float)
        if X.ndim != 3 or X.shape[0] != taus.size or X.shape[2] != self.chart.dim:
            raise GridMismatchError(f"X has shape {X.shape}, expected ({taus.size}, Ns, {self.chart.dim})")
        if taus.size < 4 or X.shape[1] < 4:
            raise ValidationError("grid needs at least 4 samples in each direction")
        d = np.diff(taus)
        if np.max(np.abs(d - d[0])) > 1e-12 * max(1.0, abs(taus[-1])) or d[0] <= 0:
            raise ValidationError("tau grid must be uniform and increasing")
        w = np.zeros(self.chart.dim) if self.winding is None else np.asarray(self.winding, dtype=float)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "winding", w)

    @property
    def shape(self):
        return self.X.shape[:2]

    @property
    def dtau(self) -> float:
        return float(self.taus[1] - self.taus[0])

    @property
    def dsigma(self) -> float:
        return TWO_PI / self.X.shape[1]

    @property
    def sigmas(self) -> np.ndarray:
        return np.arange(self.X.shape[1]) * self.dsigma

    @property
    def T(self) -> float:
        return float(self.taus[-1] - self.taus[0])

    def with_X(self, X) -> "WorldsheetGrid":
        return WorldsheetGrid(self.taus, X, self.chart, self.winding, dict(self.meta))

    @classmethod
    def from_function(cls, chart, fn: Callable, T: float, Ntau: int, Nsigma: int, winding=None, **meta):
        """Sample ``fn(tau, sigma) -> (..., n)`` on a uniform grid over ``[0, T] x [0, 2 pi)``."""
        taus = np.linspace(0.0, T, Ntau)
        sig = np.arange(Nsigma) * (TWO_PI / Nsigma)
        tt, ss = np.meshgrid(taus, sig, indexing="ij")
        return cls(taus, np.asarray(fn(tt, ss), dtype=float), chart, winding, meta)


def tangents(grid: WorldsheetGrid):
    """``(xi, zeta) = (dX/dtau, dX/dsigma)``."""
    xi = tau_derivative(grid.X, grid.dtau)
    per = grid.X - grid.winding * (grid.sigmas[None, :, None] / TWO_PI)
    zeta = sigma_derivative(per, axis=1) + grid.winding / TWO_PI
    return xi, zeta


def _dot(g, u, v):
    return np.einsum("...ab,...a,...b->...", g, u, v)


def _gamma_uv(chart, X, u, v):
    """``Gamma^b_ac u^a v^c`` evaluated row by row to bound memory."""
    if chart.flat:
        return np.zeros(np.broadcast_shapes(u.shape, v.shape))
    out = np.empty(np.broadcast_shapes(u.shape, v.shape))
    for i in range(X.shape[0]):
        G = christoffel_at(chart, X[i])
        out[i] = np.einsum("...bac,...a,...c->...b", G, u[i], v[i])
    return out


def _inner_products(grid, xi, zeta):
    g = metric_at(grid.chart, grid.X)
    return g, _dot(g, xi, xi), _dot(g, zeta, zeta), _dot(g, xi, zeta)


def _integrate(grid: WorldsheetGrid, F) -> float:
    """Trapezoid in tau times periodic rectangle rule in sigma."""
    w = _trapezoid_weights(grid.X.shape[0], grid.dtau)
    return float(w @ np.sum(F, axis=1) * grid.dsigma)


# ---------------------------------------------------------------------------
# operations


def area_density(grid: WorldsheetGrid) -> np.ndarray:
    """``f = sqrt((xi.zeta)^2 - (xi.xi)(zeta.zeta))`` at every node."""
    xi, zeta = tangents(grid)
    _, xx, zz, xz = _inner_products(grid, xi, zeta)
    disc = xz**2 - xx * zz
    if not np.all(disc > 0):
        node = np.unravel_index(np.argmin(disc), disc.shape)
        raise DegenerateTubeError(
            f"tube is not timelike at node tau={grid.taus[node[0]]:.6g}, sigma={grid.sigmas[node[1]]:.6g} "
            f"(discriminant {disc[node]:.3e})",
            node=tuple(int(i) for i in node),
        )
    return np.sqrt(disc)


def action(grid: WorldsheetGrid) -> float:
    """Nambu-Goto action ``S = -int int f dtau dsigma``."""
    return -_integrate(grid, area_density(grid))


@dataclass(frozen=True)
class CurrentField:
    P_tau: np.ndarray
    P_sigma: np.ndarray


def currents(grid: WorldsheetGrid) -> CurrentField:
    xi, zeta = tangents(grid)
    f = area_density(grid)
    _, xx, zz, xz = _inner_products(grid, xi, zeta)
    P_tau = (xz[..., None] * zeta - zz[..., None] * xi) / f[..., None]
    P_sigma = (xz[..., None] * xi - xx[..., None] * zeta) / f[..., None]
    return CurrentField(P_tau, P_sigma)


def constraint_residuals(grid: WorldsheetGrid, cur: CurrentField) -> dict:
    """The four constraint identities evaluated nodewise.

    The identities are algebraic in the tangents, so for currents computed
    from the same grid they vanish to rounding; currents taken from a
    different tube expose the mismatch.
    """
    xi, zeta = tangents(grid)
    g = metric_at(grid.chart, grid.X)
    return {
        "Ptau_zeta": _dot(g, cur.P_tau, zeta),
        "Ptau_Ptau_plus_zeta_zeta": _dot(g, cur.P_tau, cur.P_tau) + _dot(g, zeta, zeta),
        "Psigma_xi": _dot(g, cur.P_sigma, xi),
        "Psigma_Psigma_plus_xi_xi": _dot(g, cur.P_sigma, cur.P_sigma) + _dot(g, xi, xi),
    }


def gauge_residuals(grid: WorldsheetGrid):
    """``(xi.zeta, xi.xi + zeta.zeta)`` nodewise; both vanish in orthonormal gauge."""
    xi, zeta = tangents(grid)
    _, xx, zz, xz = _inner_products(grid, xi, zeta)
    return xz, xx + zz


def geodesic_residual(grid: WorldsheetGrid, path: str = "auto", gauge_tol: float = 1e-6) -> np.ndarray:
    """Nodewise residual of the geodesic-surface equation.

    ``path="full"`` evaluates ``xi.grad P_tau + zeta.grad P_sigma`` by the
    product rule on the currents, so only covariant second derivatives of
    the embedding enter;
    ``path="gauge"`` uses ``-xi.grad xi + zeta.grad zeta`` and requires the
    grid to be in orthonormal gauge.  ``"auto"`` picks the gauge form when
    both gauge residuals are below ``gauge_tol``.
    """
    if path not in ("auto", "full", "gauge"):
        raise ValueError(f"unknown path '{path}'")
    area_density(grid)
    xi, zeta = tangents(grid)
    if path == "auto":
        r1, r2 = gauge_residuals(grid)
        path = "gauge" if max(np.max(np.abs(r1)), np.max(np.abs(r2))) <= gauge_tol else "full"
    X = grid.X
    chart = grid.chart
    per = X - grid.winding * (grid.sigmas[None, :, None] / TWO_PI)
    # covariant accelerations along the sheet
    a_tt = tau_second_derivative(X, grid.dtau) + _gamma_uv(chart, X, xi, xi)
    a_ss = sigma_derivative(per, axis=1, order=2) + _gamma_uv(chart, X, zeta, zeta)
    if path == "gauge":
        return a_ss - a_tt
    a_ts = sigma_derivative(xi, axis=1) + _gamma_uv(chart, X, xi, zeta)
    g = metric_at(chart, X)
    A, B, C = _dot(g, xi, zeta), _dot(g, zeta, zeta), _dot(g, xi, xi)
    f = np.sqrt(A**2 - B * C)
    # metric compatibility: grad_u (v.w) = (grad_u v).w + v.(grad_u w)
    dA_t = _dot(g, a_tt, zeta) + _dot(g, xi, a_ts)
    dB_t = 2.0 * _dot(g, zeta, a_ts)
    dC_t = 2.0 * _dot(g, xi, a_tt)
    dA_s = _dot(g, a_ts, zeta) + _dot(g, xi, a_ss)
    dB_s = 2.0 * _dot(g, zeta, a_ss)
    dC_s = 2.0 * _dot(g, xi, a_ts)
    df_t = (A * dA_t - 0.5 * (B * dC_t + C * dB_t)) / f
    df_s = (A * dA_s - 0.5 * (B * dC_s + C * dB_s)) / f
    e = lambda a: a[..., None]  # noqa: E731
    P_tau = (e(A) * zeta - e(B) * xi) / e(f)
    P_sigma = (e(A) * xi - e(C) * zeta) / e(f)
    div_tau = (e(dA_t) * zeta + e(A) * a_ts - e(dB_t) * xi - e(B) * a_tt) / e(f) - P_tau * e(df_t / f)
    div_sigma = (e(dA_s) * xi + e(A) * a_ts - e(dC_s) * zeta - e(C) * a_ss) / e(f) - P_sigma * e(df_s / f)
    return div_tau + div_sigma


def _check_field(grid, eta):
    eta = np.asarray(eta, dtype=float)
    if eta.shape != grid.X.shape:
        raise GridMismatchError(f"field has shape {eta.shape}, grid has {grid.X.shape}")
    return eta


def _check_gauge(grid, tol):
    r1, r2 = gauge_residuals(grid)
    worst = max(np.max(np.abs(r1)), np.max(np.abs(r2)))
    if worst > tol:
        raise ValidationError(f"grid is not in orthonormal gauge (residual {worst:.3e} > {tol:g})")


def deviation_operator(grid: WorldsheetGrid, eta, gauge_tol: Optional[float] = 1e-6) -> np.ndarray:
    """Gauge-fixed deviation operator applied to a chart-component field ``eta``.

    ``(L eta)^a = -xi.grad(xi.grad eta)^a + zeta.grad(zeta.grad eta)^a
    - R_bcd^a (xi^b xi^d - zeta^b zeta^d) eta^c``.
    """
    eta = _check_field(grid, eta)
    if gauge_tol is not None:
        _check_gauge(grid, gauge_tol)
    chart, X, h = grid.chart, grid.X, grid.dtau
    xi, zeta = tangents(grid)

    g_xi = _gamma_uv(chart, X, xi, eta)
    D_tau = tau_derivative(eta, h) + g_xi
    DD_tau = tau_second_derivative(eta, h) + tau_derivative(g_xi, h) + _gamma_uv(chart, X, xi, D_tau)

    g_zeta = _gamma_uv(chart, X, zeta, eta)
    D_sig = sigma_derivative(eta, axis=1) + g_zeta
    DD_sig = sigma_derivative(eta, axis=1, order=2) + sigma_derivative(g_zeta, axis=1) + _gamma_uv(chart, X, zeta, D_sig)

    curv = np.zeros_like(eta)
    if not chart.flat:
        for i in range(X.shape[0]):
            R = riemann_at(chart, X[i]).riemann
            curv[i] = -np.einsum("sbcda,sb,sd,sc->sa", R, xi[i], xi[i], eta[i]) + np.einsum(
                "sbcda,sb,sd,sc->sa", R, zeta[i], zeta[i], eta[i]
            )
    return -DD_tau + DD_sig + curv


def deviation_quadratic_form(grid: WorldsheetGrid, eta, gauge_tol: Optional[float] = 1e-6) -> float:
    """``int int eta_a (L eta)^a dtau dsigma``."""
    eta = _check_field(grid, eta)
    L = deviation_operator(grid, eta, gauge_tol)
    g = metric_at(grid.chart, grid.X)
    return _integrate(grid, _dot(g, eta, L))


def _check_endpoints(grid, eta, tol=1e-12):
    scale = max(1.0, float(np.max(np.abs(eta))))
    if np.max(np.abs(eta[0])) > tol * scale or np.max(np.abs(eta[-1])) > tol * scale:
        raise ValidationError("variation field must vanish at tau = 0 and tau = T")


def first_variation(grid: WorldsheetGrid, eta) -> float:
    """``dS/dalpha`` from the bulk current divergence and the tau boundary term."""
    eta = _check_field(grid, eta)
    xi, zeta = tangents(grid)
    cur = currents(grid)
    div = geodesic_residual(grid, path="full")
    g = metric_at(grid.chart, grid.X)
    bulk = _integrate(grid, _dot(g, eta, div))
    edge = np.sum(_dot(g[-1], cur.P_tau[-1], eta[-1])) - np.sum(_dot(g[0], cur.P_tau[0], eta[0]))
    return bulk - float(edge) * grid.dsigma


def first_variation_fd(grid: WorldsheetGrid, eta, alpha_step: float = 1e-3) -> float:
    eta = _check_field(grid, eta)
    return (action(grid.with_X(grid.X + alpha_step * eta)) - action(grid.with_X(grid.X - alpha_step * eta))) / (
        2.0 * alpha_step
    )


def second_variation_fd(grid: WorldsheetGrid, eta, alpha_step: float = 1e-3) -> float:
    """Three-point estimate of ``d^2 S / d alpha^2`` for ``X_alpha = X + alpha eta``."""
    eta = _check_field(grid, eta)
    _check_endpoints(grid, eta)
    if not np.any(eta):
        return 0.0
    s0 = action(grid)
    sp = action(grid.with_X(grid.X + alpha_step * eta))
    sm = action(grid.with_X(grid.X - alpha_step * eta))
    return (sp - 2.0 * s0 + sm) / alpha_step**2


# ---------------------------------------------------------------------------
# analytic tubes used by scenarios and tests


def static_cylinder(R: float, T: float, Ntau: int, Nsigma: int, dim: int = 4, chart=None) -> WorldsheetGrid:
    """``X = (tau, R cos sigma, R sin sigma, 0, ...)`` in Minkowski space (not a geodesic surface)."""
    from .manifold import flat_chart

    chart = chart or flat_chart(dim)

    def fn(t, s):
        X = np.zeros(t.shape + (dim,))
        X[..., 0] = t
        X[..., 1] = R * np.cos(s)
        X[..., 2] = R * np.sin(s)
        return X

    return WorldsheetGrid.from_function(chart, fn, T, Ntau, Nsigma, scenario="static_cylinder", R=R)


def breathing_ring(R: float, T: float, Ntau: int, Nsigma: int, dim: int = 4, chart=None) -> WorldsheetGrid:
    """Collapsing circular string ``X = (R tau, R cos tau cos sigma, R cos tau sin sigma, 0, ...)``.

    In orthonormal gauge; the tube degenerates at ``tau = pi/2``.
    """
    from .manifold import flat_chart

    chart = chart or flat_chart(dim)

    def fn(t, s):
        X = np.zeros(t.shape + (dim,))
        X[..., 0] = R * t
        X[..., 1] = R * np.cos(t) * np.cos(s)
        X[..., 2] = R * np.cos(t) * np.sin(s)
        return X

    return WorldsheetGrid.from_function(chart, fn, T, Ntau, Nsigma, scenario="breathing_ring", R=R)


def equator_tube(K: float, T: float, Ntau: int, Nsigma: int, dim: int = 3, chart=None) -> WorldsheetGrid:
    """Static string wrapped on a great circle of ``R x S^(dim-1)``.

    ``X = (r tau, pi/2, ..., pi/2, sigma)`` with ``r = 1/sqrt(K)``; in
    orthonormal gauge since ``xi.xi = -r^2 = -zeta.zeta``.
    """
    from .manifold import product_time_sphere_chart

    chart = chart or product_time_sphere_chart(dim, K)
    r = 1.0 / np.sqrt(K)

    def fn(t, s):
        X = np.full(t.shape + (dim,), np.pi / 2)
        X[..., 0] = r * t
        X[..., -1] = s
        return X

    winding = np.zeros(dim)
    winding[-1] = TWO_PI
    return WorldsheetGrid.from_function(chart, fn, T, Ntau, Nsigma, winding=winding, scenario="equator_tube", K=K)
