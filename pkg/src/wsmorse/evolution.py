"""Leapfrog evolution of a closed string in orthonormal gauge.

In orthonormal gauge the geodesic-surface equation becomes the nonlinear
wave equation

    d^2 X^b / dtau^2 = d^2 X^b / dsigma^2 + Gamma^b_cd (zeta^c zeta^d - xi^c xi^d).

The integrator is position Verlet (drift-kick-drift).  The Christoffel
term depends on the velocity, so the kick uses a half-step velocity
predictor; for flat charts it reduces to plain position Verlet.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import CFLError, DegenerateTubeError, GaugeDriftError, ValidationError
from .manifold import MetricChart, christoffel_at, metric_at
from .worldsheet import TWO_PI, WorldsheetGrid, geodesic_residual, sigma_derivative


@dataclass(frozen=True)
class EvolutionState:
    X: np.ndarray  # (Ns, n)
    V: np.ndarray  # (Ns, n)
    tau: float
    dt: float
    winding: np.ndarray = None

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        V = np.array(self.V, dtype=float)
        if X.ndim != 2 or X.shape != V.shape:
            raise ValidationError("X and V must both have shape (Nsigma, n)")
        if not self.dt > 0:
            raise ValidationError("dt must be positive")
        X.flags.writeable = False
        V.flags.writeable = False
        w = np.zeros(X.shape[1]) if self.winding is None else np.asarray(self.winding, dtype=float)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "winding", w)

    @property
    def dsigma(self) -> float:
        return TWO_PI / self.X.shape[0]

    @property
    def sigmas(self) -> np.ndarray:
        return np.arange(self.X.shape[0]) * self.dsigma


def _zeta(X, winding, sigmas):
    per = X - winding * (sigmas[:, None] / TWO_PI)
    return sigma_derivative(per, axis=0) + winding / TWO_PI, per


def _acceleration(chart, X, V, winding, sigmas):
    zeta, per = _zeta(X, winding, sigmas)
    acc = sigma_derivative(per, axis=0, order=2)
    if not chart.flat:
        G = christoffel_at(chart, X)
        acc = acc + np.einsum("sbcd,sc,sd->sb", G, zeta, zeta) - np.einsum("sbcd,sc,sd->sb", G, V, V)
    return acc


def slice_diagnostics(state: EvolutionState, chart: MetricChart) -> dict:
    """Gauge residuals, area discriminant and flat wave energy on one slice."""
    zeta, _ = _zeta(state.X, state.winding, state.sigmas)
    g = metric_at(chart, state.X)
    xx = np.einsum("sab,sa,sb->s", g, state.V, state.V)
    zz = np.einsum("sab,sa,sb->s", g, zeta, zeta)
    xz = np.einsum("sab,sa,sb->s", g, state.V, zeta)
    energy = float(np.sum(state.V**2 + zeta**2) * state.dsigma)
    return {
        "gauge_res1": float(np.max(np.abs(xz))),
        "gauge_res2": float(np.max(np.abs(xx + zz))),
        "min_disc": float(np.min(xz**2 - xx * zz)),
        "energy": energy,
    }


def step(state: EvolutionState, chart: MetricChart, max_gauge_drift: float = None) -> EvolutionState:
    if state.dt > state.dsigma * (1 + 1e-12):
        raise CFLError(f"CFL rule violated: dt = {state.dt:.6g} exceeds dsigma = {state.dsigma:.6g}")
    diag = slice_diagnostics(state, chart)
    if not diag["min_disc"] > 0:
        raise DegenerateTubeError(f"string slice at tau = {state.tau:.6g} is not timelike (cusp)")
    dt = state.dt
    sig = state.sigmas
    X_half = state.X + 0.5 * dt * state.V
    a = _acceleration(chart, X_half, state.V, state.winding, sig)
    if not chart.flat:
        V_mid = state.V + 0.5 * dt * a
        a = _acceleration(chart, X_half, V_mid, state.winding, sig)
    V_new = state.V + dt * a
    X_new = X_half + 0.5 * dt * V_new
    new = replace(state, X=X_new, V=V_new, tau=state.tau + dt)
    if max_gauge_drift is not None:
        d = slice_diagnostics(new, chart)
        worst = max(d["gauge_res1"], d["gauge_res2"])
        if worst > max_gauge_drift:
            raise GaugeDriftError(f"gauge residual {worst:.3e} exceeds ceiling {max_gauge_drift:g} at tau = {new.tau:.6g}")
    return new


def evolve(initial: EvolutionState, chart: MetricChart, T: float, max_gauge_drift: float = None) -> WorldsheetGrid:
    """Step from ``initial.tau`` to ``initial.tau + T`` and assemble the tube.

    The time step is shrunk if needed so that ``T`` is a whole number of
    steps.  Per-step diagnostics are attached as ``grid.meta["diagnostics"]``.
    """
    if not T > 0:
        raise ValidationError("T must be positive")
    nsteps = int(np.ceil(T / initial.dt - 1e-9))
    state = replace(initial, dt=T / nsteps)
    Xs = [state.X]
    diags = [slice_diagnostics(state, chart)]
    for _ in range(nsteps):
        state = step(state, chart, max_gauge_drift)
        Xs.append(state.X)
        diags.append(slice_diagnostics(state, chart))
    taus = initial.tau + np.arange(nsteps + 1) * state.dt
    grid = WorldsheetGrid(taus, np.array(Xs), chart, initial.winding, {"final_state": state})
    series = {k: np.array([d[k] for d in diags]) for k in ("gauge_res1", "gauge_res2", "energy")}
    series["tau"] = taus
    grid.meta["diagnostics"] = series
    return grid


def geodesic_residual_series(grid: WorldsheetGrid, path: str = "gauge") -> np.ndarray:
    """Max residual norm over sigma at each tau sample."""
    r = geodesic_residual(grid, path=path)
    return np.max(np.linalg.norm(r, axis=-1), axis=1)


def gauge_initial_state(chart: MetricChart, X0, dt: float, spatial_velocity=None, winding=None, tau: float = 0.0):
    """Initial state in orthonormal gauge for a string at constant coordinate time.

    The spatial velocity has its component along the string removed, then
    the time component of ``V`` is solved from ``xi.xi + zeta.zeta = 0``.
    Requires coordinate 0 to be time with ``g_0i = 0`` on the string.
    """
    X0 = np.asarray(X0, dtype=float)
    Ns, n = X0.shape
    sig = np.arange(Ns) * (TWO_PI / Ns)
    w = np.zeros(n) if winding is None else np.asarray(winding, dtype=float)
    zeta, _ = _zeta(X0, w, sig)
    g = metric_at(chart, X0)
    if np.max(np.abs(g[:, 0, 1:])) > 1e-12 or np.any(g[:, 0, 0] >= 0):
        raise ValidationError("gauge helper needs a static time coordinate at index 0")
    if np.max(np.abs(zeta[:, 0])) > 1e-12:
        raise ValidationError("initial string must lie at constant coordinate time")
    u = np.zeros_like(X0) if spatial_velocity is None else np.array(spatial_velocity, dtype=float)
    u[:, 0] = 0.0
    zz = np.einsum("sab,sa,sb->s", g, zeta, zeta)
    uz = np.einsum("sab,sa,sb->s", g, u, zeta)
    u = u - (uz / zz)[:, None] * zeta
    uu = np.einsum("sab,sa,sb->s", g, u, u)
    V = u.copy()
    V[:, 0] = np.sqrt((zz + uu) / -g[:, 0, 0])
    return EvolutionState(X=X0, V=V, tau=tau, dt=dt, winding=w)


# ---------------------------------------------------------------------------
# built-in initial data


def breathing_ring_state(R: float, Nsigma: int, dt: float, dim: int = 4) -> EvolutionState:
    """Circular string of radius ``R`` at rest; flat solution ``R cos(tau)``."""
    sig = np.arange(Nsigma) * (TWO_PI / Nsigma)
    X = np.zeros((Nsigma, dim))
    X[:, 1] = R * np.cos(sig)
    X[:, 2] = R * np.sin(sig)
    V = np.zeros_like(X)
    V[:, 0] = R
    return EvolutionState(X=X, V=V, tau=0.0, dt=dt)


def breathing_ring_exact(R: float, tau, sigmas, dim: int = 4) -> np.ndarray:
    tau = np.asarray(tau, dtype=float)[..., None]
    X = np.zeros(tau.shape[:-1] + (len(sigmas), dim))
    X[..., 0] = R * tau
    X[..., 1] = R * np.cos(tau) * np.cos(sigmas)
    X[..., 2] = R * np.cos(tau) * np.sin(sigmas)
    return X


def equator_state(K: float, Nsigma: int, dt: float, dim: int = 3) -> EvolutionState:
    """String wrapped on a great circle of ``R x S^(dim-1)``, static in gauge."""
    r = 1.0 / np.sqrt(K)
    sig = np.arange(Nsigma) * (TWO_PI / Nsigma)
    X = np.full((Nsigma, dim), np.pi / 2)
    X[:, 0] = 0.0
    X[:, -1] = sig
    V = np.zeros_like(X)
    V[:, 0] = r
    w = np.zeros(dim)
    w[-1] = TWO_PI
    return EvolutionState(X=X, V=V, tau=0.0, dt=dt, winding=w)


def tilted_ring_state(K: float, amplitude: float, Nsigma: int, dt: float, dim: int = 3) -> EvolutionState:
    """Great-circle string displaced in latitude by ``amplitude * cos(sigma)``, released at rest."""
    from .manifold import product_time_sphere_chart

    sig = np.arange(Nsigma) * (TWO_PI / Nsigma)
    X = np.full((Nsigma, dim), np.pi / 2)
    X[:, 0] = 0.0
    X[:, 1] = np.pi / 2 + amplitude * np.cos(sig)
    X[:, -1] = sig
    w = np.zeros(dim)
    w[-1] = TWO_PI
    return gauge_initial_state(product_time_sphere_chart(dim, K), X, dt, winding=w)


def rotating_ring_state(R: float, Nsigma: int, dt: float) -> EvolutionState:
    """Non-collapsing flat string in five dimensions.

    Exact solution ``X = (sqrt(2) R tau, R cos tau cos sigma, R cos tau sin sigma,
    R sin tau cos sigma, R sin tau sin sigma)``; the area density stays ``R^2``.
    """
    sig = np.arange(Nsigma) * (TWO_PI / Nsigma)
    X = np.zeros((Nsigma, 5))
    X[:, 1] = R * np.cos(sig)
    X[:, 2] = R * np.sin(sig)
    V = np.zeros_like(X)
    V[:, 0] = np.sqrt(2.0) * R
    V[:, 3] = R * np.cos(sig)
    V[:, 4] = R * np.sin(sig)
    return EvolutionState(X=X, V=V, tau=0.0, dt=dt)
