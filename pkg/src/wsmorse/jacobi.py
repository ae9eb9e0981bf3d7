"""Stringy Jacobi fields along a geodesic surface.

Under the rigid-shape ansatz the deviation vector is attached to the
string's reference worldline and expanded in a parallel transverse frame
``e_i``.  Its components obey

    d^2 eta^i / dtau^2 + M^i_j(tau) eta^j = 0,
    M^i_j = R_bcd^a (xi^b xi^d - zeta^b zeta^d) e_j^c e_i_a,

and the fundamental solution ``A`` (``A(0) = 0``, ``A'(0) = I``) carries
every Jacobi field vanishing at ``tau = 0``: ``eta = A(tau) eta'(0)``.
Conjugate strings are the zeros of ``det A`` on ``(0, T]``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import FrameDegeneracyError, JacobiOverflowError, ValidationError
from .manifold import MetricChart, TransportedFrame, metric_at, parallel_transport_frame, riemann_at

OVERFLOW = 1e12


class SamplingWarning(UserWarning):
    pass


@dataclass(frozen=True)
class TidalMatrix:
    """The curvature coefficient ``M(tau)`` of the transverse Jacobi equation.

    ``source`` is ``"explicit_constant"`` (a fixed matrix), ``"explicit_function"``
    (a user callable) or ``"from_chart"`` (sampled along a worldline and
    interpolated with a cubic spline).
    """

    dim: int
    source: str
    constant: Optional[np.ndarray] = None
    fn: Optional[Callable] = None
    taus: Optional[np.ndarray] = None
    samples: Optional[np.ndarray] = None
    frame: Optional[TransportedFrame] = None
    _spline: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.source == "from_chart":
            object.__setattr__(self, "_spline", CubicSpline(self.taus, self.samples, axis=0))

    @classmethod
    def explicit(cls, value, dim: Optional[int] = None) -> "TidalMatrix":
        """``value`` is a scalar (``value * I``, needs ``dim``) or a square matrix."""
        v = np.asarray(value, dtype=float)
        if v.ndim == 0:
            if dim is None or dim < 1:
                raise ValidationError("scalar tidal value needs a positive transverse dimension")
            v = v * np.eye(dim)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValidationError("tidal matrix must be square")
        v.flags.writeable = False
        return cls(dim=v.shape[0], source="explicit_constant", constant=v)

    @classmethod
    def from_function(cls, fn: Callable, dim: int) -> "TidalMatrix":
        return cls(dim=dim, source="explicit_function", fn=fn)

    def __call__(self, tau) -> np.ndarray:
        if self.constant is not None:
            tau = np.asarray(tau)
            if tau.ndim == 0:
                return self.constant
            return np.broadcast_to(self.constant, tau.shape + self.constant.shape)
        if self.fn is not None:
            tau = np.asarray(tau, dtype=float)
            if tau.ndim == 0:
                return np.asarray(self.fn(float(tau)), dtype=float)
            return np.array([self.fn(float(t)) for t in tau.ravel()]).reshape(tau.shape + (self.dim, self.dim))
        lo, hi = self.taus[0], self.taus[-1]
        t = np.asarray(tau, dtype=float)
        if np.any(t < lo - 1e-9) or np.any(t > hi + 1e-9):
            raise ValidationError(f"tidal matrix sampled on [{lo:g}, {hi:g}] only")
        return self._spline(t)

    def asymmetry(self, taus) -> float:
        m = self(np.asarray(taus, dtype=float))
        return float(np.max(np.abs(m - np.swapaxes(m, -1, -2))))


def tidal_matrix(chart: MetricChart, curve: Callable, zeta_fn: Callable, frame0, taus) -> TidalMatrix:
    """Contract the Riemann tensor along a worldline in a parallel frame.

    ``curve(tau) -> (x, xi)`` is the string's reference worldline and
    ``zeta_fn(tau)`` the sigma-tangent there.  The frame is transported with
    RK4 on ``taus``; ``M`` is interpolated between samples.
    """
    taus = np.asarray(taus, dtype=float)
    frame = parallel_transport_frame(chart, curve, frame0, taus, zeta0=zeta_fn(taus[0]))
    x = frame.points
    xi = frame.tangents
    zeta = np.array([np.asarray(zeta_fn(t), dtype=float) for t in taus])
    E = frame.frames
    g = metric_at(chart, x)
    gram = np.einsum("tia,tab,tjb->tij", E, g, E)
    if np.any(np.abs(np.linalg.det(gram)) < 1e-8):
        raise FrameDegeneracyError("transported frame degenerated (Gram determinant < 1e-8)")
    R = riemann_at(chart, x).riemann
    E_low = np.einsum("tab,tib->tia", g, E)
    M = np.einsum("tbcda,tb,td,tjc,tia->tij", R, xi, xi, E, E_low) - np.einsum(
        "tbcda,tb,td,tjc,tia->tij", R, zeta, zeta, E, E_low
    )
    return TidalMatrix(dim=E.shape[1], source="from_chart", taus=taus, samples=M, frame=frame)


def tidal_matrix_from_grid(grid, frame0, sigma_index: int = 0) -> TidalMatrix:
    """Tidal matrix along the ``sigma = sigmas[sigma_index]`` line of a worldsheet grid."""
    from .worldsheet import tangents

    _, zeta = tangents(grid)
    xs = CubicSpline(grid.taus, grid.X[:, sigma_index], axis=0)
    dxs = xs.derivative()
    zs = CubicSpline(grid.taus, zeta[:, sigma_index], axis=0)
    return tidal_matrix(grid.chart, lambda t: (xs(t), dxs(t)), zs, frame0, grid.taus)


# ---------------------------------------------------------------------------
# integration


@dataclass(frozen=True)
class JacobiMatrixTrajectory:
    taus: np.ndarray
    A: np.ndarray  # (Nt, m, m)
    Adot: np.ndarray
    detA: np.ndarray
    wronskian_norm: np.ndarray
    M: TidalMatrix
    dt: float


def _rhs_B(M, tau, A):
    return -M(tau) @ A


def _rk4_step(M, tau, A, B, h):
    k1A, k1B = B, _rhs_B(M, tau, A)
    k2A, k2B = B + 0.5 * h * k1B, _rhs_B(M, tau + 0.5 * h, A + 0.5 * h * k1A)
    k3A, k3B = B + 0.5 * h * k2B, _rhs_B(M, tau + 0.5 * h, A + 0.5 * h * k2A)
    k4A, k4B = B + h * k3B, _rhs_B(M, tau + h, A + h * k3A)
    return (
        A + (h / 6.0) * (k1A + 2 * k2A + 2 * k3A + k4A),
        B + (h / 6.0) * (k1B + 2 * k2B + 2 * k3B + k4B),
    )


def wronskian(A, Adot) -> np.ndarray:
    """``Adot^T A - A^T Adot`` (batched)."""
    W = np.swapaxes(Adot, -1, -2) @ A
    return W - np.swapaxes(W, -1, -2)


def integrate_jacobi(M: TidalMatrix, T: float, dt: float) -> JacobiMatrixTrajectory:
    """RK4 for ``A'' + M A = 0`` with ``A(0) = 0``, ``A'(0) = I`` on ``[0, T]``.

    The step is reduced, if needed, so that ``T`` is a whole number of steps.
    """
    if not dt > 0 or not T > 0:
        raise ValidationError("T and dt must be positive")
    n = int(np.ceil(T / dt - 1e-9))
    h = T / n
    m = M.dim
    A = np.zeros((m, m))
    B = np.eye(m)
    As = np.empty((n + 1, m, m))
    Bs = np.empty((n + 1, m, m))
    As[0], Bs[0] = A, B
    if M.constant is not None:
        # RK4 on a linear autonomous system is a fixed matrix map of the state
        Z, I = np.zeros((m, m)), np.eye(m)
        PA, PB = _rk4_step(M, 0.0, I, Z, h)
        QA, QB = _rk4_step(M, 0.0, Z, I, h)
        P = np.block([[PA, QA], [PB, QB]])
        S = np.vstack([A, B])
        for k in range(n):
            S = P @ S
            As[k + 1], Bs[k + 1] = S[:m], S[m:]
        bad = np.flatnonzero(np.max(np.abs(As), axis=(1, 2)) >= OVERFLOW)
        if bad.size:
            raise JacobiOverflowError(f"|A| exceeded {OVERFLOW:g} at tau = {bad[0] * h:.6g}")
    else:
        for k in range(n):
            A, B = _rk4_step(M, k * h, A, B, h)
            if not np.all(np.abs(A) < OVERFLOW):
                raise JacobiOverflowError(f"|A| exceeded {OVERFLOW:g} at tau = {(k + 1) * h:.6g}")
            As[k + 1], Bs[k + 1] = A, B
    taus = np.arange(n + 1) * h
    W = wronskian(As, Bs)
    return JacobiMatrixTrajectory(
        taus=taus,
        A=As,
        Adot=Bs,
        detA=np.linalg.det(As),
        wronskian_norm=np.linalg.norm(W, axis=(-2, -1)),
        M=M,
        dt=h,
    )


def reconstruct_eta(traj: JacobiMatrixTrajectory, eta_dot0) -> np.ndarray:
    """Jacobi field ``eta(tau) = A(tau) eta'(0)`` sampled on ``traj.taus``."""
    v = np.asarray(eta_dot0, dtype=float)
    if v.shape != (traj.M.dim,):
        raise ValidationError(f"initial derivative must have length {traj.M.dim}")
    return traj.A @ v


def wronskian_check(traj: JacobiMatrixTrajectory) -> float:
    return float(np.max(traj.wronskian_norm))


def state_at(traj: JacobiMatrixTrajectory, tau: float):
    """``(A, A')`` at an arbitrary ``tau`` via one RK4 sub-step from the preceding sample."""
    k = int(np.clip(np.floor(tau / traj.dt), 0, len(traj.taus) - 2))
    h = tau - traj.taus[k]
    if h == 0.0:
        return traj.A[k], traj.Adot[k]
    return _rk4_step(traj.M, traj.taus[k], traj.A[k], traj.Adot[k], h)


# ---------------------------------------------------------------------------
# conjugate strings


@dataclass(frozen=True)
class ConjugateString:
    tau_star: float
    multiplicity: int
    bracket: tuple
    tangential: bool
    det: float


def _golden_min(fun, lo, hi, xtol):
    # V-shaped minima (|tau - tau*|) defeat parabolic steps; plain golden section is exact enough
    r = 0.5 * (np.sqrt(5.0) - 1.0)
    c, d = hi - r * (hi - lo), lo + r * (hi - lo)
    fc, fd = fun(c), fun(d)
    while hi - lo > xtol:
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - r * (hi - lo)
            fc = fun(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + r * (hi - lo)
            fd = fun(d)
    return 0.5 * (lo + hi)


def _multiplicity(A, scale, rel_tol):
    s = np.linalg.svd(A, compute_uv=False)
    return int(np.sum(s <= rel_tol * scale))


def find_conjugate_strings(traj: JacobiMatrixTrajectory, rel_tol: float = 1e-8, xtol: float = 1e-12) -> list:
    """Locate the zeros of ``det A`` on ``(0, T]``.

    Sign changes are refined by bisection; even-order zeros (no sign change)
    are found as local minima of the smallest singular value and refined by
    golden-section search.  Multiplicity is the number of singular values of
    ``A(tau*)`` below ``rel_tol`` times the largest ``|A|`` on the trajectory
    (``|A(tau*)|`` itself vanishes when the whole matrix is singular).
    """
    taus, det = traj.taus, traj.detA
    svals = np.linalg.svd(traj.A, compute_uv=False)
    smin = svals[:, -1]
    scale = float(np.max(svals[:, 0]))
    cutoff = rel_tol * scale
    N = len(taus)
    sgn = np.sign(det)
    out = []
    used = set()

    def det_at(t):
        return np.linalg.det(state_at(traj, t)[0])

    def smin_at(t):
        return np.linalg.svd(state_at(traj, t)[0], compute_uv=False)[-1]

    for k in range(1, N - 1):
        if sgn[k] == 0.0:
            out.append(ConjugateString(float(taus[k]), _multiplicity(traj.A[k], scale, rel_tol), (taus[k], taus[k]), False, 0.0))
            used.update({k - 1, k})
            continue
        if sgn[k] * sgn[k + 1] < 0:
            lo, hi = float(taus[k]), float(taus[k + 1])
            dlo = det[k]
            while hi - lo > xtol:
                mid = 0.5 * (lo + hi)
                dm = det_at(mid)
                if dm == 0.0:
                    lo = hi = mid
                    break
                if np.sign(dm) == np.sign(dlo):
                    lo, dlo = mid, dm
                else:
                    hi = mid
            t_star = 0.5 * (lo + hi)
            A_star = state_at(traj, t_star)[0]
            out.append(
                ConjugateString(t_star, max(1, _multiplicity(A_star, scale, rel_tol)), (float(taus[k]), float(taus[k + 1])), False, float(np.linalg.det(A_star)))
            )
            used.update({k})

    for k in range(1, N):
        right = smin[k + 1] if k + 1 < N else np.inf
        if not (smin[k] <= smin[k - 1] and smin[k] <= right):
            continue
        if {k - 1, k} & used or smin[k] > 0.5 * scale:
            continue
        lo, hi = float(taus[k - 1]), float(taus[min(k + 1, N - 1)])
        t_star = float(_golden_min(smin_at, lo, hi, xtol))
        A_star = state_at(traj, t_star)[0]
        if np.linalg.svd(A_star, compute_uv=False)[-1] > cutoff:
            continue
        if any(abs(c.tau_star - t_star) < traj.dt for c in out):
            continue
        mult = _multiplicity(A_star, scale, rel_tol)
        if mult % 2 == 1:
            warnings.warn(
                f"odd-multiplicity zero without a sign change near tau = {t_star:.6g}; "
                "sampling may be too coarse (two roots within one step)",
                SamplingWarning,
            )
        out.append(ConjugateString(t_star, mult, (lo, hi), True, float(np.linalg.det(A_star))))

    out.sort(key=lambda c: c.tau_star)
    for a, b in zip(out, out[1:]):
        if b.tau_star - a.tau_star < traj.dt:
            warnings.warn("two conjugate strings within one step; refine dt", SamplingWarning)
    return out
