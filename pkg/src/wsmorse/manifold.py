"""Coordinate charts, Christoffel symbols and curvature.

Curvature convention
--------------------
The Riemann tensor is defined through the commutator acting on a covector,

    (nabla_a nabla_b - nabla_b nabla_a) w_c = R_abc^d w_d,

which gives, with ``G[b, a, c] = Gamma^b_ac``,

    R_abc^d = d_b Gamma^d_ac - d_a Gamma^d_bc
              + Gamma^e_ac Gamma^d_be - Gamma^e_bc Gamma^d_ae.

On a round sphere this yields ``R_abcd = +K (g_ac g_bd - g_ad g_bc)`` with
``K > 0``.  Every other module consumes :func:`riemann_at` and never
re-derives a sign.

Array layout: points have shape ``(..., n)``; metrics ``(..., n, n)``;
Christoffels ``(..., n, n, n)`` indexed ``[b, a, c]``; Riemann tensors
``(..., n, n, n, n)`` indexed ``[a, b, c, d]`` with ``d`` the raised slot.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ChartDomainError, FrameDegeneracyError, SingularMetricError, ValidationError

DET_FLOOR = 1e-14
SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class MetricChart:
    """A single coordinate patch carrying a metric.

    ``metric_fn`` maps a point to the symmetric matrix ``g_ab``.  When
    ``vectorized`` is true the callables accept batches ``(..., n)``;
    otherwise they are called point by point.
    """

    dim: int
    signature: tuple
    metric_fn: Callable
    analytic_christoffel: Optional[Callable] = None
    analytic_riemann: Optional[Callable] = None
    fd_step: float = 1e-4
    vectorized: bool = False
    domain: Optional[Callable] = None
    name: str = "custom"
    flat: bool = False

    def __post_init__(self):
        if self.dim < 1:
            raise ValidationError("chart dimension must be positive")
        if len(self.signature) != self.dim or any(s not in (-1, 1) for s in self.signature):
            raise ValidationError("signature must be a sequence of +-1 of length dim")
        if not self.fd_step > 0:
            raise ValidationError("fd_step must be positive")

    @property
    def is_lorentzian(self) -> bool:
        return sum(1 for s in self.signature if s < 0) == 1

    @property
    def signature_name(self) -> str:
        neg = sum(1 for s in self.signature if s < 0)
        if neg == 0:
            return "riemannian"
        if neg == 1:
            return "lorentzian"
        return f"pseudo-riemannian({neg},{self.dim - neg})"


@dataclass(frozen=True)
class CurvatureSample:
    point: np.ndarray
    riemann: np.ndarray
    riemann_lowered: np.ndarray
    mode: str  # "analytic" or "finite_difference"


@dataclass(frozen=True)
class TransportedFrame:
    taus: np.ndarray
    points: np.ndarray  # (Nt, n)
    tangents: np.ndarray  # (Nt, n)
    frames: np.ndarray  # (Nt, k, n); frames[i, j] is e_j at taus[i]


def _apply(chart, fn, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != chart.dim:
        raise ValidationError(f"point has {x.shape[-1]} components, chart has dim {chart.dim}")
    if chart.vectorized or x.ndim == 1:
        return np.asarray(fn(x), dtype=float)
    flat = x.reshape(-1, chart.dim)
    out = np.stack([np.asarray(fn(p), dtype=float) for p in flat])
    return out.reshape(x.shape[:-1] + out.shape[1:])


def _check_domain(chart, x):
    if chart.domain is None:
        return
    ok = np.asarray(_apply(chart, chart.domain, x), dtype=bool)
    if not np.all(ok):
        raise ChartDomainError(f"point outside the domain of chart '{chart.name}'")


def metric_at(chart: MetricChart, x) -> np.ndarray:
    """Metric components at ``x`` (batched over leading axes)."""
    _check_domain(chart, x)
    g = _apply(chart, chart.metric_fn, x)
    asym = np.max(np.abs(g - np.swapaxes(g, -1, -2)), initial=0.0)
    if asym > SYMMETRY_TOL * max(1.0, float(np.max(np.abs(g), initial=0.0))):
        raise ValidationError(f"metric is not symmetric (max asymmetry {asym:.3e})")
    det = np.linalg.det(g)
    if np.any(np.abs(det) < DET_FLOOR):
        raise SingularMetricError(f"metric determinant below {DET_FLOOR:g} in magnitude")
    return g


def inverse_metric(chart: MetricChart, x) -> np.ndarray:
    return np.linalg.inv(metric_at(chart, x))


def inner(chart: MetricChart, x, u, v) -> np.ndarray:
    """``g_ab u^a v^b`` evaluated pointwise."""
    g = metric_at(chart, x)
    return np.einsum("...ab,...a,...b->...", g, u, v)


def _metric_derivatives(chart, x, h):
    # dg[..., e, a, b] = d_e g_ab by central differences
    x = np.asarray(x, dtype=float)
    n = chart.dim
    eye = np.eye(n)
    cols = []
    for e in range(n):
        xp = x + h * eye[e]
        xm = x - h * eye[e]
        _check_domain(chart, xp)
        _check_domain(chart, xm)
        cols.append((metric_at(chart, xp) - metric_at(chart, xm)) / (2.0 * h))
    return np.stack(cols, axis=-3)


def christoffel_from_metric(ginv, dg) -> np.ndarray:
    """``Gamma^b_ac = 1/2 g^bd (d_a g_dc + d_c g_ad - d_d g_ac)``."""
    # dg[..., e, a, b] = d_e g_ab
    t = (
        np.einsum("...adc->...dac", dg)  # d_a g_dc
        + np.einsum("...cad->...dac", dg)  # d_c g_ad
        - dg  # d_d g_ac
    )
    return 0.5 * np.einsum("...bd,...dac->...bac", ginv, t)


def christoffel_fd(chart: MetricChart, x, h: Optional[float] = None) -> np.ndarray:
    """Christoffel symbols from central differences of the metric."""
    h = chart.fd_step if h is None else h
    _check_domain(chart, x)
    ginv = inverse_metric(chart, x)
    dg = _metric_derivatives(chart, x, h)
    return christoffel_from_metric(ginv, dg)


def christoffel_at(chart: MetricChart, x) -> np.ndarray:
    """``G[..., b, a, c] = Gamma^b_ac``; analytic when the chart provides it."""
    x = np.asarray(x, dtype=float)
    if chart.flat:
        metric_at(chart, x)
        return np.zeros(x.shape[:-1] + (chart.dim,) * 3)
    if chart.analytic_christoffel is not None:
        _check_domain(chart, x)
        metric_at(chart, x)
        return _apply(chart, chart.analytic_christoffel, x)
    return christoffel_fd(chart, x)


def riemann_from_christoffel(G, dG) -> np.ndarray:
    """Assemble ``R_abc^d`` from Gamma and ``dG[..., e, d, a, c] = d_e Gamma^d_ac``."""
    x = np.einsum("...bdac->...abcd", dG) + np.einsum("...eac,...dbe->...abcd", G, G)
    return x - np.swapaxes(x, -4, -3)


def lower_last(R, g) -> np.ndarray:
    return np.einsum("...abce,...ed->...abcd", R, g)


def riemann_at(chart: MetricChart, x) -> CurvatureSample:
    x = np.asarray(x, dtype=float)
    n = chart.dim
    g = metric_at(chart, x)
    if chart.flat:
        R = np.zeros(x.shape[:-1] + (n,) * 4)
        mode = "analytic"
    elif chart.analytic_riemann is not None:
        _check_domain(chart, x)
        R = _apply(chart, chart.analytic_riemann, x)
        mode = "analytic"
    else:
        h = chart.fd_step
        G = christoffel_at(chart, x)
        eye = np.eye(n)
        dG = np.stack(
            [(christoffel_at(chart, x + h * eye[e]) - christoffel_at(chart, x - h * eye[e])) / (2 * h) for e in range(n)],
            axis=-4,
        )
        R = riemann_from_christoffel(G, dG)
        mode = "finite_difference"
    return CurvatureSample(point=x, riemann=R, riemann_lowered=lower_last(R, g), mode=mode)


def riemann_symmetry_errors(sample: CurvatureSample) -> dict:
    """Max absolute violation of each lowered-index symmetry."""
    R = sample.riemann_lowered
    return {
        "antisym_ab": float(np.max(np.abs(R + np.swapaxes(R, -4, -3)), initial=0.0)),
        "antisym_cd": float(np.max(np.abs(R + np.swapaxes(R, -2, -1)), initial=0.0)),
        "pair": float(np.max(np.abs(R - np.einsum("...abcd->...cdab", R)), initial=0.0)),
        "bianchi": float(
            np.max(
                np.abs(R + np.einsum("...bcad->...abcd", R) + np.einsum("...cabd->...abcd", R)),
                initial=0.0,
            )
        ),
    }


def sectional_curvature(chart: MetricChart, x, u, v) -> float:
    s = riemann_at(chart, x)
    g = metric_at(chart, x)
    num = np.einsum("abcd,a,b,c,d->", s.riemann_lowered, u, v, u, v)
    den = (u @ g @ u) * (v @ g @ v) - (u @ g @ v) ** 2
    return float(num / den)


# ---------------------------------------------------------------------------
# constant-curvature generators


def constant_curvature_riemann(g, K, mask=None) -> np.ndarray:
    """``R_abc^d = K (g_ac delta_b^d - g_bc delta_a^d)`` on the block selected by ``mask``."""
    g = np.asarray(g, dtype=float)
    n = g.shape[-1]
    delta = np.eye(n)
    if mask is not None:
        m = np.asarray(mask, dtype=float)
        g = g * np.outer(m, m)
        delta = delta * np.outer(m, m)
    delta = np.broadcast_to(delta, g.shape)
    return K * (
        np.einsum("...ac,...bd->...abcd", g, delta) - np.einsum("...bc,...ad->...abcd", g, delta)
    )


def _diag_christoffel(gd, dgd):
    # gd[..., k] = g_kk, dgd[..., e, k] = d_e g_kk
    n = gd.shape[-1]
    eye = np.eye(n)
    dg = np.einsum("...ek,kl->...ekl", dgd, eye)
    ginv = np.einsum("...k,kl->...kl", 1.0 / gd, eye)
    return christoffel_from_metric(ginv, dg)


def _sphere_diag(theta, r):
    # hyperspherical: g_00 = r^2, g_kk = r^2 prod_{j<k} sin^2 theta_j
    m = theta.shape[-1] + 1
    s2 = np.sin(theta) ** 2
    gd = np.empty(theta.shape[:-1] + (m,))
    gd[..., 0] = r * r
    for k in range(1, m):
        gd[..., k] = gd[..., k - 1] * s2[..., k - 1]
    cot = np.cos(theta) / np.sin(theta)
    dgd = np.zeros(theta.shape[:-1] + (m, m))
    for j in range(m - 1):
        for k in range(j + 1, m):
            dgd[..., j, k] = 2.0 * cot[..., j] * gd[..., k]
    return gd, dgd


def _diag_matrix(gd):
    return np.einsum("...k,kl->...kl", gd, np.eye(gd.shape[-1]))


def flat_chart(dim: int, lorentzian: bool = True) -> MetricChart:
    sig = tuple([-1] + [1] * (dim - 1)) if lorentzian else tuple([1] * dim)
    eta = np.diag(np.array(sig, dtype=float))

    def metric(x):
        x = np.asarray(x)
        return np.broadcast_to(eta, x.shape[:-1] + eta.shape).copy()

    return MetricChart(dim=dim, signature=sig, metric_fn=metric, vectorized=True, name="flat", flat=True)


def round_sphere_chart(dim: int, K: float = 1.0, fd_step: float = 1e-4, analytic: bool = True) -> MetricChart:
    """Round ``S^dim`` of curvature ``K`` in hyperspherical coordinates.

    Coordinates are ``(theta_1, ..., theta_{dim-1}, phi)``; the polar angles
    must stay in ``(0, pi)``.
    """
    if K <= 0:
        raise ValidationError("round_sphere requires K > 0")
    if dim < 2:
        raise ValidationError("round_sphere requires dim >= 2")
    r = 1.0 / np.sqrt(K)

    def parts(x):
        x = np.asarray(x, dtype=float)
        return _sphere_diag(x[..., : dim - 1], r)

    def metric(x):
        return _diag_matrix(parts(x)[0])

    def christoffel(x):
        gd, dgd = parts(x)
        return _diag_christoffel(gd, dgd)

    def riemann(x):
        return constant_curvature_riemann(metric(x), K)

    def domain(x):
        th = np.asarray(x)[..., : dim - 1]
        return np.all((th > 0) & (th < np.pi), axis=-1)

    return MetricChart(
        dim=dim,
        signature=tuple([1] * dim),
        metric_fn=metric,
        analytic_christoffel=christoffel if analytic else None,
        analytic_riemann=riemann if analytic else None,
        fd_step=fd_step,
        vectorized=True,
        domain=domain,
        name="round_sphere",
    )


def hyperbolic_chart(dim: int, K: float = -1.0, fd_step: float = 1e-4, analytic: bool = True) -> MetricChart:
    """Hyperbolic space of curvature ``K < 0`` in upper half-space coordinates (last coordinate > 0)."""
    if K >= 0:
        raise ValidationError("hyperbolic requires K < 0")
    rho2 = -1.0 / K

    def parts(x):
        x = np.asarray(x, dtype=float)
        y = x[..., -1]
        gd = np.repeat((rho2 / y**2)[..., None], dim, axis=-1)
        dgd = np.zeros(x.shape[:-1] + (dim, dim))
        dgd[..., -1, :] = (-2.0 * rho2 / y**3)[..., None]
        return gd, dgd

    def metric(x):
        return _diag_matrix(parts(x)[0])

    def christoffel(x):
        return _diag_christoffel(*parts(x))

    def riemann(x):
        return constant_curvature_riemann(metric(x), K)

    return MetricChart(
        dim=dim,
        signature=tuple([1] * dim),
        metric_fn=metric,
        analytic_christoffel=christoffel if analytic else None,
        analytic_riemann=riemann if analytic else None,
        fd_step=fd_step,
        vectorized=True,
        domain=lambda x: np.asarray(x)[..., -1] > 0,
        name="hyperbolic",
    )


def product_time_sphere_chart(dim: int, K: float = 1.0, fd_step: float = 1e-4, analytic: bool = True) -> MetricChart:
    """``R x S^(dim-1)`` with metric ``-dt^2 + (round sphere of curvature K)``."""
    if K <= 0:
        raise ValidationError("product_time_sphere requires K > 0")
    if dim < 3:
        raise ValidationError("product_time_sphere requires dim >= 3")
    r = 1.0 / np.sqrt(K)
    mask = np.ones(dim)
    mask[0] = 0.0

    def parts(x):
        x = np.asarray(x, dtype=float)
        gs, dgs = _sphere_diag(x[..., 1 : dim - 1], r)
        gd = np.concatenate([-np.ones(x.shape[:-1] + (1,)), gs], axis=-1)
        dgd = np.zeros(x.shape[:-1] + (dim, dim))
        dgd[..., 1:, 1:] = dgs
        return gd, dgd

    def metric(x):
        return _diag_matrix(parts(x)[0])

    def christoffel(x):
        return _diag_christoffel(*parts(x))

    def riemann(x):
        return constant_curvature_riemann(metric(x), K, mask=mask)

    def domain(x):
        th = np.asarray(x)[..., 1 : dim - 1]
        return np.all((th > 0) & (th < np.pi), axis=-1)

    return MetricChart(
        dim=dim,
        signature=tuple([-1] + [1] * (dim - 1)),
        metric_fn=metric,
        analytic_christoffel=christoffel if analytic else None,
        analytic_riemann=riemann if analytic else None,
        fd_step=fd_step,
        vectorized=True,
        domain=domain,
        name="product_time_sphere",
    )


CHART_KINDS = ("flat", "round_sphere", "hyperbolic", "product_time_sphere")


@dataclass(frozen=True)
class ConstantCurvatureSpec:
    kind: str
    K: float
    dim: int
    fd_step: float = 1e-4

    def __post_init__(self):
        if self.kind not in CHART_KINDS:
            raise ValidationError(f"unknown manifold kind '{self.kind}'")
        if self.kind == "round_sphere" and not self.K > 0:
            raise ValidationError("round_sphere requires K > 0")
        if self.kind == "hyperbolic" and not self.K < 0:
            raise ValidationError("hyperbolic requires K < 0")
        if self.kind == "flat" and self.K != 0:
            raise ValidationError("flat forces K = 0")
        if self.kind == "product_time_sphere" and not self.K > 0:
            raise ValidationError("product_time_sphere requires K > 0")

    def chart(self, analytic: bool = True) -> MetricChart:
        if self.kind == "flat":
            return flat_chart(self.dim)
        factory = {
            "round_sphere": round_sphere_chart,
            "hyperbolic": hyperbolic_chart,
            "product_time_sphere": product_time_sphere_chart,
        }[self.kind]
        return factory(self.dim, self.K, fd_step=self.fd_step, analytic=analytic)

    def curvature_block_mask(self) -> np.ndarray:
        mask = np.ones(self.dim)
        if self.kind == "product_time_sphere":
            mask[0] = 0.0
        return mask


# ---------------------------------------------------------------------------
# parallel transport


def _check_uniform(taus):
    taus = np.asarray(taus, dtype=float)
    if taus.ndim != 1 or taus.size < 2:
        raise ValidationError("tau grid needs at least two samples")
    d = np.diff(taus)
    if np.max(np.abs(d - d[0])) > 1e-12 * max(1.0, abs(taus[-1])):
        raise ValidationError("tau grid must be uniform")
    return taus, d[0]


def _transport_rhs(chart, x, xi, E):
    G = christoffel_at(chart, x)
    return -np.einsum("bac,a,kc->kb", G, xi, E)


def parallel_transport_frame(
    chart: MetricChart,
    curve: Callable,
    frame0: Sequence,
    taus,
    zeta0=None,
    tol: float = 1e-8,
) -> TransportedFrame:
    """Parallel-propagate ``frame0`` along ``curve`` with fixed-step RK4.

    ``curve(tau)`` returns the point and its tangent ``xi``.  The initial
    vectors must be orthonormal (spacelike) and orthogonal to ``xi(0)``, and
    to ``zeta0`` when given.
    """
    taus, dt = _check_uniform(taus)
    E = np.atleast_2d(np.asarray(frame0, dtype=float)).copy()
    x0, xi0 = (np.asarray(v, dtype=float) for v in curve(taus[0]))
    g0 = metric_at(chart, x0)
    gram = E @ g0 @ E.T
    if np.max(np.abs(gram - np.eye(len(E)))) > tol:
        raise FrameDegeneracyError("initial frame is not orthonormal")
    if abs(np.linalg.det(gram)) < 1e-8:
        raise FrameDegeneracyError("initial frame Gram determinant below 1e-8")
    for w, label in ((xi0, "xi"), (zeta0, "zeta")):
        if w is None:
            continue
        if np.max(np.abs(E @ g0 @ np.asarray(w, dtype=float))) > tol * max(1.0, np.linalg.norm(w)):
            raise FrameDegeneracyError(f"initial frame is not orthogonal to {label}")

    points = [x0]
    tangents = [xi0]
    frames = [E.copy()]
    for t in taus[:-1]:
        xa, va = curve(t)
        xb, vb = curve(t + 0.5 * dt)
        xc, vc = curve(t + dt)
        k1 = _transport_rhs(chart, xa, va, E)
        k2 = _transport_rhs(chart, xb, vb, E + 0.5 * dt * k1)
        k3 = _transport_rhs(chart, xb, vb, E + 0.5 * dt * k2)
        k4 = _transport_rhs(chart, xc, vc, E + dt * k3)
        E = E + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        points.append(np.asarray(xc, dtype=float))
        tangents.append(np.asarray(vc, dtype=float))
        frames.append(E.copy())
    return TransportedFrame(taus=taus, points=np.array(points), tangents=np.array(tangents), frames=np.array(frames))


def frame_gram_drift(chart: MetricChart, frame: TransportedFrame) -> float:
    """Max deviation of the transported Gram matrix from its initial value."""
    g = metric_at(chart, frame.points)
    gram = np.einsum("tia,tab,tjb->tij", frame.frames, g, frame.frames)
    return float(np.max(np.abs(gram - gram[0])))
