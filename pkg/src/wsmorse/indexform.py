"""Index form of a geodesic surface for piecewise-smooth transverse fields.

Fields are sigma-independent under the rigid-shape ansatz, so every
sigma integral contributes a factor ``2 pi``.  A field is stored segment
by segment between its breaks (break points are grid nodes), which keeps
one-sided derivatives, and therefore the jump terms, exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConjugateStringError, GridMismatchError, ValidationError
from .jacobi import JacobiMatrixTrajectory, TidalMatrix, find_conjugate_strings, integrate_jacobi
from .worldsheet import TWO_PI, tau_derivative, tau_second_derivative


@dataclass(frozen=True)
class Segment:
    i0: int  # first node (inclusive)
    i1: int  # last node (inclusive)
    values: np.ndarray  # (i1 - i0 + 1, m)
    d1: np.ndarray
    d2: np.ndarray


def _break_indices(taus, breaks):
    h = taus[1] - taus[0]
    idx = []
    for b in breaks:
        i = int(round((b - taus[0]) / h))
        if not (0 < i < len(taus) - 1) or abs(taus[i] - b) > 1e-9 * max(1.0, abs(b)):
            raise ValidationError(f"break {b!r} is not an interior grid node")
        idx.append(i)
    if any(b <= a for a, b in zip(idx, idx[1:])):
        raise ValidationError("breaks must be strictly increasing")
    return idx


def _check_grid(taus):
    taus = np.asarray(taus, dtype=float)
    if taus.ndim != 1 or taus.size < 4:
        raise ValidationError("variation field needs at least 4 tau samples")
    d = np.diff(taus)
    if np.max(np.abs(d - d[0])) > 1e-12 * max(1.0, abs(taus[-1])) or d[0] <= 0:
        raise ValidationError("tau grid must be uniform and increasing")
    return taus


@dataclass(frozen=True)
class VariationField:
    """Piecewise-smooth transverse field ``V^i(tau)`` with declared breaks."""

    taus: np.ndarray
    breaks: tuple
    segments: tuple

    @property
    def dim(self) -> int:
        return self.segments[0].values.shape[1]

    @property
    def h(self) -> float:
        return float(self.taus[1] - self.taus[0])

    @property
    def values(self) -> np.ndarray:
        out = np.empty((len(self.taus), self.dim))
        for s in self.segments:
            out[s.i0 : s.i1 + 1] = s.values
        return out

    @property
    def break_indices(self) -> list:
        return [s.i0 for s in self.segments[1:]]

    def vanishes_at_ends(self, tol: float = 1e-10) -> bool:
        v = self.values
        scale = max(1.0, float(np.max(np.abs(v))))
        return bool(np.max(np.abs(v[0])) <= tol * scale and np.max(np.abs(v[-1])) <= tol * scale)

    def jumps(self) -> list:
        """``(tau_i, dV(tau_i+) - dV(tau_i-))`` at each break."""
        return [
            (float(self.taus[b.i0]), b.d1[0] - a.d1[-1]) for a, b in zip(self.segments, self.segments[1:])
        ]

    # construction ---------------------------------------------------------

    @classmethod
    def _assemble(cls, taus, breaks, segs, continuity_tol=1e-8):
        for a, b in zip(segs, segs[1:]):
            gap = np.max(np.abs(a.values[-1] - b.values[0]))
            if gap > continuity_tol * max(1.0, float(np.max(np.abs(a.values)))):
                raise ValidationError(f"field is discontinuous at tau = {taus[b.i0]:.6g} (gap {gap:.3e})")
        return cls(taus=taus, breaks=tuple(float(taus[b.i0]) for b in segs[1:]), segments=tuple(segs))

    @classmethod
    def from_pieces(cls, taus, pieces: Sequence[Callable], breaks=()) -> "VariationField":
        """One callable per smooth segment; ``piece(t) -> (V, dV, ddV)`` each shaped ``(len(t), m)``."""
        taus = _check_grid(taus)
        idx = _break_indices(taus, breaks)
        bounds = [0] + idx + [len(taus) - 1]
        if len(pieces) == 1 and len(bounds) > 2:
            pieces = list(pieces) * (len(bounds) - 1)
        if len(pieces) != len(bounds) - 1:
            raise ValidationError("need one piece per segment")
        segs = []
        for p, i0, i1 in zip(pieces, bounds, bounds[1:]):
            v, d1, d2 = (np.atleast_2d(np.asarray(a, dtype=float)) for a in p(taus[i0 : i1 + 1]))
            if v.shape[0] != i1 - i0 + 1:
                v, d1, d2 = v.T, d1.T, d2.T
            segs.append(Segment(i0, i1, v, d1, d2))
        return cls._assemble(taus, breaks, segs)

    @classmethod
    def from_function(cls, taus, fn: Callable) -> "VariationField":
        """Smooth field, ``fn(t) -> (V, dV, ddV)``."""
        return cls.from_pieces(taus, [fn])

    @classmethod
    def from_samples(cls, taus, values, breaks=()) -> "VariationField":
        """Derivatives by second-order finite differences within each segment."""
        taus = _check_grid(taus)
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.shape[0] != len(taus):
            raise GridMismatchError("values do not match the tau grid")
        h = taus[1] - taus[0]
        idx = _break_indices(taus, breaks)
        bounds = [0] + idx + [len(taus) - 1]
        segs = []
        for i0, i1 in zip(bounds, bounds[1:]):
            if i1 - i0 + 1 < 4:
                raise ValidationError(f"segment starting at tau = {taus[i0]:.6g} has too few samples for one-sided derivatives")
            v = values[i0 : i1 + 1]
            segs.append(Segment(i0, i1, v, tau_derivative(v, h), tau_second_derivative(v, h)))
        return cls._assemble(taus, breaks, segs)

    # arithmetic -----------------------------------------------------------

    def _split(self, bounds):
        out = []
        for j0, j1 in zip(bounds, bounds[1:]):
            s = next(s for s in self.segments if s.i0 <= j0 and j1 <= s.i1)
            a, b = j0 - s.i0, j1 - s.i0 + 1
            out.append(Segment(j0, j1, s.values[a:b], s.d1[a:b], s.d2[a:b]))
        return out

    def _check_compatible(self, other):
        if len(self.taus) != len(other.taus) or np.max(np.abs(self.taus - other.taus)) > 1e-12:
            raise GridMismatchError("fields live on different tau grids")
        if self.dim != other.dim:
            raise GridMismatchError("fields have different transverse dimensions")

    def _union_bounds(self, other):
        idx = sorted(set(self.break_indices) | set(other.break_indices))
        return [0] + idx + [len(self.taus) - 1]

    def __add__(self, other):
        self._check_compatible(other)
        bounds = self._union_bounds(other)
        segs = [
            Segment(a.i0, a.i1, a.values + b.values, a.d1 + b.d1, a.d2 + b.d2)
            for a, b in zip(self._split(bounds), other._split(bounds))
        ]
        return VariationField(self.taus, tuple(float(self.taus[i]) for i in bounds[1:-1]), tuple(segs))

    def __mul__(self, c):
        c = float(c)
        segs = tuple(Segment(s.i0, s.i1, c * s.values, c * s.d1, c * s.d2) for s in self.segments)
        return VariationField(self.taus, self.breaks, segs)

    __rmul__ = __mul__

    def __neg__(self):
        return -1.0 * self

    def __sub__(self, other):
        return self + (-1.0) * other


def _trapz(y, h):
    return h * (np.sum(y) - 0.5 * (y[0] + y[-1]))


def _tidal_on_grid(M: TidalMatrix, taus):
    Mg = np.asarray(M(taus), dtype=float)
    return np.broadcast_to(Mg, (len(taus), M.dim, M.dim))


def index_form(V: VariationField, W: VariationField, M: TidalMatrix) -> float:
    """``2 pi int (dV.dW - V.M W) dtau``, trapezoid per smooth segment."""
    V._check_compatible(W)
    if M.dim != V.dim:
        raise GridMismatchError("tidal matrix and field dimensions differ")
    Mg = _tidal_on_grid(M, V.taus)
    bounds = V._union_bounds(W)
    total = 0.0
    for a, b in zip(V._split(bounds), W._split(bounds)):
        Ms = Mg[a.i0 : a.i1 + 1]
        integrand = np.einsum("ti,ti->t", a.d1, b.d1) - np.einsum("ti,tij,tj->t", a.values, Ms, b.values)
        total += _trapz(integrand, V.h)
    return TWO_PI * total


def index_form_with_breaks(V: VariationField, W: VariationField, M: TidalMatrix) -> float:
    """Integrated-by-parts form with jump terms.

    ``-2 pi [ int V.(W'' + M W) dtau + sum_i V(tau_i).(W'(tau_i+) - W'(tau_i-)) ]``.
    Requires ``V`` to vanish at both ends so no endpoint terms survive.
    """
    V._check_compatible(W)
    if M.dim != V.dim:
        raise GridMismatchError("tidal matrix and field dimensions differ")
    if not V.vanishes_at_ends():
        raise ValidationError("first field must vanish at tau = 0 and tau = T")
    Mg = _tidal_on_grid(M, V.taus)
    bounds = V._union_bounds(W)
    bulk = 0.0
    for a, b in zip(V._split(bounds), W._split(bounds)):
        Ms = Mg[a.i0 : a.i1 + 1]
        integrand = np.einsum("ti,ti->t", a.values, b.d2 + np.einsum("tij,tj->ti", Ms, b.values))
        bulk += _trapz(integrand, V.h)
    vals = V.values
    jump = 0.0
    for tau_i, dW in W.jumps():
        i = int(round((tau_i - V.taus[0]) / V.h))
        jump += float(vals[i] @ dW)
    return -TWO_PI * (bulk + jump)


def _trajectory_on(M, V, traj):
    if traj is None:
        return integrate_jacobi(M, V.taus[-1] - V.taus[0], V.h)
    if len(traj.taus) != len(V.taus) or np.max(np.abs(traj.taus - (V.taus - V.taus[0]))) > 1e-9:
        raise GridMismatchError("Jacobi trajectory and field are sampled on different grids")
    return traj


def positivity_certificate(M: TidalMatrix, traj: Optional[JacobiMatrixTrajectory], V: VariationField) -> float:
    """``2 pi int |A dY/dtau|^2 dtau`` with ``Y = A^{-1} V``.

    Needs ``det A != 0`` on ``(0, T)``.  At ``tau = 0`` the integrand takes
    its limit value 0 (``A ~ tau I``, ``V ~ tau V'(0)``).
    """
    traj = _trajectory_on(M, V, traj)
    T = traj.taus[-1]
    inside = [c for c in find_conjugate_strings(traj) if c.tau_star < T - 0.5 * traj.dt]
    if inside:
        raise ConjugateStringError(f"conjugate string at tau = {inside[0].tau_star:.9g} inside (0, T)")
    total = 0.0
    for s in V.segments:
        A = traj.A[s.i0 : s.i1 + 1]
        Ad = traj.Adot[s.i0 : s.i1 + 1]
        AY = np.zeros_like(s.values)
        ok = slice(1, None) if s.i0 == 0 else slice(None)
        y = np.linalg.solve(A[ok], s.values[ok][..., None])[..., 0]
        AY[ok] = s.d1[ok] - np.einsum("tij,tj->ti", Ad[ok], y)
        total += _trapz(np.sum(AY**2, axis=1), V.h)
    return TWO_PI * total


@dataclass(frozen=True)
class NegativeModeResult:
    c: float
    I_kJ: float
    I_kJ_with_breaks: float
    I_kk: float
    I_JJ: float
    epsilons: tuple
    I_total_by_eps: tuple
    I_total_limit: float
    J: VariationField


def jacobi_field_to(M: TidalMatrix, r: float, taus, rel_tol: float = 1e-8):
    """Jacobi field vanishing at ``0`` and ``r``, extended by zero on ``[r, T]``.

    Returns the field and the unit initial derivative ``v`` (``J = A v`` before ``r``).
    """
    taus = _check_grid(taus)
    h = taus[1] - taus[0]
    if not taus[0] < r < taus[-1]:
        raise ValidationError("r must lie strictly inside (0, T)")
    (ir,) = _break_indices(taus, [r])
    traj = integrate_jacobi(M, taus[-1] - taus[0], h)
    s_all = np.linalg.svd(traj.A, compute_uv=False)
    _, s, vt = np.linalg.svd(traj.A[ir])
    if s[-1] > rel_tol * float(np.max(s_all[:, 0])):
        raise ConjugateStringError(f"no conjugate string at r = {r:.9g} (smallest singular value {s[-1]:.3e})")
    v = vt[-1]
    return _zero_extended(traj, M, v, ir, taus), v, traj


def _zero_extended(traj, M, v, ir, taus):
    Mg = _tidal_on_grid(M, taus)

    def before(t):
        sl = slice(0, ir + 1)
        J = traj.A[sl] @ v
        return J, traj.Adot[sl] @ v, -np.einsum("tij,tj->ti", Mg[sl], J)

    def after(t):
        z = np.zeros((len(t), len(v)))
        return z, z, z

    return VariationField.from_pieces(taus, [before, after], breaks=[taus[ir]])


def negative_mode(
    M: TidalMatrix,
    r: float,
    T: float,
    k: VariationField,
    epsilons: Sequence[float] = (0.3, 0.1, 0.03, 0.01),
) -> NegativeModeResult:
    """Negative direction of the second variation past a conjugate string.

    ``J`` vanishes at 0 and ``r`` and is zero on ``[r, T]``; its sign is
    chosen so that ``c = k(r).(J'(r+) - J'(r-))`` is positive.  Evaluates
    ``I(eta, eta)`` for ``eta = eps k + J / eps`` over ``epsilons`` and
    extrapolates to ``eps -> 0`` by a least-squares fit in
    ``(1, eps^2, eps^-2)``.
    """
    if abs((k.taus[-1] - k.taus[0]) - T) > 1e-9 * max(1.0, T):
        raise GridMismatchError("k is not sampled on [0, T]")
    if not k.vanishes_at_ends():
        raise ValidationError("k must vanish at tau = 0 and tau = T")
    J, v, traj = jacobi_field_to(M, r, k.taus)
    ((_, dJ),) = J.jumps()
    ir = int(round((r - k.taus[0]) / k.h))
    c = float(k.values[ir] @ dJ)
    scale = float(np.max(np.linalg.norm(k.values, axis=1)) * np.linalg.norm(dJ))
    if abs(c) <= 1e-10 * scale:
        raise ValidationError("c = k(r).jump(J') must be positive; k is orthogonal to the jump")
    if c < 0:
        J, dJ, c = -J, -dJ, -c
    I_kJ = index_form(k, J, M)
    I_kJ_b = index_form_with_breaks(k, J, M)
    I_kk = index_form(k, k, M)
    I_JJ = index_form(J, J, M)
    totals = []
    for eps in epsilons:
        eta = eps * k + (1.0 / eps) * J
        totals.append(index_form(eta, eta, M))
    e = np.asarray(epsilons, dtype=float)
    design = np.column_stack([np.ones_like(e), e**2, e**-2])
    coef, *_ = np.linalg.lstsq(design, np.asarray(totals), rcond=None)
    return NegativeModeResult(
        c=c,
        I_kJ=I_kJ,
        I_kJ_with_breaks=I_kJ_b,
        I_kk=I_kk,
        I_JJ=I_JJ,
        epsilons=tuple(float(x) for x in epsilons),
        I_total_by_eps=tuple(float(x) for x in totals),
        I_total_limit=float(coef[0]),
        J=J,
    )


# ---------------------------------------------------------------------------
# randomized fields


def random_variation_field(
    rng: np.random.Generator,
    taus,
    dim: int,
    n_breaks: int = 0,
    n_modes: int = 4,
    amplitude: float = 1.0,
) -> VariationField:
    """Random continuous field vanishing at both ends, smooth between ``n_breaks`` kinks.

    Built from sine modes plus tent functions (kinked at the breaks) modulated
    by a smooth factor, all with analytic derivatives.
    """
    taus = _check_grid(taus)
    t0, T = taus[0], taus[-1]
    L = T - t0
    interior = np.arange(1, len(taus) - 1)
    lo, hi = int(0.1 * len(taus)), int(0.9 * len(taus))
    picks = np.sort(rng.choice(interior[(interior > lo) & (interior < hi)], size=n_breaks, replace=False)) if n_breaks else []
    breaks = [float(taus[i]) for i in picks]
    a = rng.normal(scale=amplitude, size=(n_modes, dim)) / np.arange(1, n_modes + 1)[:, None]
    b = rng.normal(scale=amplitude, size=(n_breaks, dim))
    cmod = rng.uniform(-0.5, 0.5, size=n_breaks)
    wmod = rng.uniform(0.5, 3.0, size=n_breaks)

    def make_piece(seg_lo, seg_hi):
        mid = 0.5 * (seg_lo + seg_hi)

        def piece(t):
            s = (t - t0) / L
            V = np.zeros((len(t), dim))
            dV = np.zeros_like(V)
            ddV = np.zeros_like(V)
            for j in range(n_modes):
                w = (j + 1) * np.pi
                V += np.sin(w * s)[:, None] * a[j]
                dV += (w / L * np.cos(w * s))[:, None] * a[j]
                ddV += (-((w / L) ** 2) * np.sin(w * s))[:, None] * a[j]
            for i, tb in enumerate(breaks):
                if mid < tb:
                    tent, dtent = (t - t0) / (tb - t0), np.full_like(t, 1.0 / (tb - t0))
                else:
                    tent, dtent = (T - t) / (T - tb), np.full_like(t, -1.0 / (T - tb))
                m = 1.0 + cmod[i] * np.sin(wmod[i] * (t - t0))
                dm = cmod[i] * wmod[i] * np.cos(wmod[i] * (t - t0))
                ddm = -cmod[i] * wmod[i] ** 2 * np.sin(wmod[i] * (t - t0))
                V += (tent * m)[:, None] * b[i]
                dV += (dtent * m + tent * dm)[:, None] * b[i]
                ddV += (2 * dtent * dm + tent * ddm)[:, None] * b[i]
            return V, dV, ddV

        return piece

    edges = [t0] + breaks + [T]
    pieces = [make_piece(x, y) for x, y in zip(edges, edges[1:])]
    return VariationField.from_pieces(taus, pieces, breaks=breaks)


def sine_field(taus, dim: int, component: int = 0, mode: int = 1, amplitude: float = 1.0) -> VariationField:
    """``amplitude * sin(mode pi tau / T) e_component``."""
    taus = _check_grid(taus)
    L = taus[-1] - taus[0]
    w = mode * np.pi / L
    e = np.zeros(dim)
    e[component] = amplitude

    def fn(t):
        s = np.sin(w * (t - taus[0]))
        c = np.cos(w * (t - taus[0]))
        return np.outer(s, e), np.outer(w * c, e), np.outer(-(w**2) * s, e)

    return VariationField.from_function(taus, fn)
