"""Acceptance suite: closed-form oracles and randomized properties.

Each check returns a :class:`CriterionResult`.  The JSON report excludes
wall times so that two runs with the same seed are byte-identical.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .errors import ValidationError
from .evolution import (
    breathing_ring_exact,
    breathing_ring_state,
    equator_state,
    evolve,
    geodesic_residual_series,
    step,
)
from .indexform import (
    VariationField,
    index_form,
    index_form_with_breaks,
    negative_mode,
    positivity_certificate,
    random_variation_field,
)
from .jacobi import TidalMatrix, find_conjugate_strings, integrate_jacobi
from .manifold import (
    christoffel_at,
    christoffel_fd,
    constant_curvature_riemann,
    flat_chart,
    hyperbolic_chart,
    lower_last,
    metric_at,
    product_time_sphere_chart,
    riemann_at,
    riemann_symmetry_errors,
    round_sphere_chart,
    sectional_curvature,
)
from .worldsheet import TWO_PI, second_variation_fd


@dataclass(frozen=True)
class CriterionResult:
    number: int
    name: str
    passed: bool
    measured: dict
    target: str
    tolerance: str
    wall: float = 0.0

    def record(self) -> dict:
        return {
            "number": self.number,
            "name": self.name,
            "passed": self.passed,
            "measured": self.measured,
            "target": self.target,
            "tolerance": self.tolerance,
        }

    def line(self) -> str:
        tag = "PASS" if self.passed and self.within_budget else "FAIL"
        vals = ", ".join(f"{k}={_short(v)}" for k, v in self.measured.items())
        budget = BUDGETS.get(self.number)
        timing = f"{self.wall:.2f}s" if budget is None else f"{self.wall:.2f}s of {budget:g}s"
        return f"[{tag}] {self.number:2d} {self.name}: {vals} | target {self.target} | tol {self.tolerance} | {timing}"

    @property
    def within_budget(self) -> bool:
        return self.wall <= BUDGETS.get(self.number, float("inf"))


def _short(v):
    if isinstance(v, bool):
        return str(v)
    if isinstance(v, float):
        return f"{v:.3e}"
    return str(v)


M_TRANSVERSE = (1, 2, 3)


def _trajectories(lam, T, dt=1e-3):
    return {m: integrate_jacobi(TidalMatrix.explicit(lam, m), T, dt) for m in M_TRANSVERSE}


def check_flat(seed: int) -> CriterionResult:
    err, roots = 0.0, 0
    for m, tr in _trajectories(0.0, 5.0).items():
        err = max(err, float(np.max(np.abs(tr.detA[1:] - tr.taus[1:] ** m))))
        roots += len(find_conjugate_strings(tr))
    return CriterionResult(
        1,
        "flat trichotomy (M = 0)",
        err <= 1e-8 and roots == 0,
        {"max_abs_det_error": err, "conjugate_strings": roots},
        "det A = tau^m, no conjugate strings",
        "1e-8 abs",
    )


def check_oscillatory(seed: int) -> CriterionResult:
    root_err, a_err, mult_ok, count_ok = 0.0, 0.0, True, True
    for lam in (0.25, 1.0, 4.0):
        w = np.sqrt(lam)
        for m, tr in _trajectories(lam, 2.5 * np.pi / w).items():
            exact = np.sin(w * tr.taus) / w
            a_err = max(a_err, float(np.max(np.abs(tr.A - exact[:, None, None] * np.eye(m)))))
            found = find_conjugate_strings(tr)
            count_ok &= len(found) == 2
            for j, c in enumerate(found[:2], 1):
                root_err = max(root_err, abs(c.tau_star - j * np.pi / w))
                mult_ok &= c.multiplicity == m
    return CriterionResult(
        2,
        "oscillatory oracle (M = lambda I)",
        root_err <= 1e-6 and a_err <= 1e-8 and mult_ok and count_ok,
        {"max_root_error": root_err, "max_A_error": a_err, "multiplicities_ok": bool(mult_ok and count_ok)},
        "roots at j pi/sqrt(lambda) with multiplicity m; A = sin(sqrt(lambda) tau)/sqrt(lambda) I",
        "1e-6 roots, 1e-8 A",
    )


def check_hyperbolic(seed: int) -> CriterionResult:
    err, roots = 0.0, 0
    for m, tr in _trajectories(-1.0, 5.0).items():
        exact = np.sinh(tr.taus[1:]) ** m
        err = max(err, float(np.max(np.abs(tr.detA[1:] / exact - 1.0))))
        roots += len(find_conjugate_strings(tr))
    return CriterionResult(
        3,
        "hyperbolic oracle (M = -I)",
        err <= 1e-7 and roots == 0,
        {"max_rel_det_error": err, "conjugate_strings": roots},
        "det A = sinh^m(tau), no conjugate strings",
        "1e-7 rel",
    )


def check_wronskian(seed: int) -> CriterionResult:
    worst = 0.0
    for lam, T in ((0.0, 5.0), (-1.0, 5.0), (0.25, 5 * np.pi), (1.0, 2.5 * np.pi), (4.0, 1.25 * np.pi)):
        for tr in _trajectories(lam, T).values():
            worst = max(worst, float(np.max(tr.wronskian_norm)))
    control = integrate_jacobi(TidalMatrix.explicit([[0.0, 1.0], [0.0, 0.0]]), 1.0, 1e-3)
    ctrl = float(np.max(control.wronskian_norm))
    return CriterionResult(
        4,
        "Wronskian conservation",
        worst <= 1e-8 and ctrl >= 1e-3,
        {"max_wronskian": worst, "nonsymmetric_control": ctrl},
        "0 for symmetric M, nonzero otherwise",
        "1e-8 / >= 1e-3",
    )


def check_index_identity(seed: int, n_fields: int = 50, N: int = 60000) -> CriterionResult:
    rng = np.random.default_rng([seed, 5])
    worst, sym = 0.0, 0.0
    for i in range(n_fields):
        lam = (-1.0, 0.0, 1.0)[i % 3]
        m = 1 + i % 3
        T = float(rng.uniform(1.0, 3.0))
        M = TidalMatrix.explicit(lam, m)
        taus = np.linspace(0.0, T, N + 1)
        V = random_variation_field(rng, taus, m, int(rng.integers(0, 4)))
        W = random_variation_field(rng, taus, m, int(rng.integers(0, 4)))
        a = index_form(V, W, M)
        worst = max(worst, abs(a - index_form_with_breaks(V, W, M)))
        sym = max(sym, abs(a - index_form(W, V, M)))
    return CriterionResult(
        5,
        "index form integration by parts",
        worst <= 1e-6,
        {"max_abs_difference": worst, "max_symmetry_error": sym, "fields": n_fields},
        "bulk form equals jump form",
        "1e-6 abs",
    )


def check_positivity(seed: int, n_fields: int = 100, N: int = 2000) -> CriterionResult:
    rng = np.random.default_rng([seed, 6])
    min_I, worst = np.inf, 0.0
    cases = ((-1.0, 3.0), (0.0, 3.0), (1.0, 0.9 * np.pi), (4.0, 0.45 * np.pi))
    for i in range(n_fields):
        lam, T = cases[i % len(cases)]
        m = 1 + i % 3
        M = TidalMatrix.explicit(lam, m)
        taus = np.linspace(0.0, T, N + 1)
        traj = integrate_jacobi(M, T, T / N)
        V = random_variation_field(rng, taus, m, int(rng.integers(0, 4)))
        I = index_form(V, V, M)
        cert = positivity_certificate(M, traj, V)
        min_I = min(min_I, I)
        worst = max(worst, abs(cert - I) / abs(I))
    return CriterionResult(
        6,
        "positivity certificate",
        min_I >= -1e-8 and worst <= 1e-5,
        {"min_index_form": float(min_I), "max_rel_certificate_error": worst, "fields": n_fields},
        "I(V,V) >= 0 and certificate = I(V,V)",
        "-1e-8 / 1e-5 rel",
    )


def _bump_k(T, r, N):
    taus = np.linspace(0.0, T, N + 1)
    w = np.pi / T
    # jump of J' at r is +1 for J = sin on [0, pi], so c = k(r)
    s = 1.0 / np.sin(w * r)

    def fn(t):
        return (
            (s * np.sin(w * t))[:, None],
            (s * w * np.cos(w * t))[:, None],
            (-s * w * w * np.sin(w * t))[:, None],
        )

    return VariationField.from_function(taus, fn)


def check_negative_mode(seed: int, N: int = 3000) -> CriterionResult:
    T, r = 1.5 * np.pi, np.pi
    M = TidalMatrix.explicit(1.0, 1)
    res = negative_mode(M, r, T, _bump_k(T, r, N))
    e_kj = abs(res.I_kJ / (-TWO_PI) - 1.0)
    e_tot = abs(res.I_total_limit / (-2 * TWO_PI) - 1.0)
    return CriterionResult(
        7,
        "negative mode past a conjugate string",
        e_kj <= 1e-4 and e_tot <= 1e-4 and abs(res.c - 1.0) <= 1e-9,
        {"c": res.c, "I_kJ": res.I_kJ, "I_total_limit": res.I_total_limit, "rel_err_I_kJ": e_kj, "rel_err_I_total": e_tot},
        "I_kJ = -2 pi, I_total -> -4 pi",
        "1e-4 rel",
    )


def check_second_variation(seed: int, Nsigma: int = 64, substeps: int = 80, alpha: float = 1e-4) -> CriterionResult:
    dim = 5
    chart = flat_chart(dim)
    grid = evolve(breathing_ring_state(1.0, Nsigma, TWO_PI / Nsigma / substeps, dim=dim), chart, np.pi / 3)
    taus, T = grid.taus, grid.T
    M = TidalMatrix.explicit(0.0, dim - 2)
    w = np.pi / T
    profiles = (
        (np.array([0.0, 1.0, 0.0]), lambda t: (np.sin(w * t), w * np.cos(w * t), -w * w * np.sin(w * t))),
        (np.array([0.0, 0.0, 1.0]), lambda t: (np.sin(2 * w * t), 2 * w * np.cos(2 * w * t), -4 * w * w * np.sin(2 * w * t))),
        (
            np.array([0.0, 1.0, 1.0]) / np.sqrt(2.0),
            lambda t: (t * (T - t) * (1 + t), T + 2 * (T - 1) * t - 3 * t * t, 2 * (T - 1) - 6 * t),
        ),
    )
    errs = []
    for e, prof in profiles:
        g = prof(taus)[0]
        eta = np.zeros_like(grid.X)
        eta[..., 2:] = g[:, None, None] * e
        fd = second_variation_fd(grid, eta, alpha)
        V = VariationField.from_function(taus, lambda t, prof=prof, e=e: tuple(np.outer(a, e) for a in prof(t)))
        I = index_form(V, V, M)
        errs.append(float(abs(fd - I) / abs(I)))
    worst = float(max(errs))
    return CriterionResult(
        8,
        "second variation vs index form",
        worst <= 1e-4,
        {"max_rel_error": worst, "per_field": errs},
        "finite-difference d2S/dalpha2 = I(V,V)",
        "1e-4 rel",
    )


def _christoffel_slope(chart, x):
    exact = christoffel_at(chart, x)
    hs = np.array([1e-2, 1e-3, 1e-4])
    errs = [float(np.max(np.abs(christoffel_fd(chart, x, h) - exact))) for h in hs]
    return float(np.polyfit(np.log(hs), np.log(errs), 1)[0]), errs


def check_curvature(seed: int) -> CriterionResult:
    rng = np.random.default_rng([seed, 9])
    sym_a, sym_fd, rt_a, rt_fd, sec = 0.0, 0.0, 0.0, 0.0, 0.0
    cases = (
        (round_sphere_chart(3, 1.0), 1.0, lambda: np.array([rng.uniform(0.3, 2.8), rng.uniform(0.3, 2.8), rng.uniform(0, 6)])),
        (hyperbolic_chart(3, -0.5), -0.5, lambda: np.array([rng.normal(), rng.normal(), rng.uniform(1.0, 2.0)])),
        (round_sphere_chart(4, 2.0), 2.0, lambda: np.array([*rng.uniform(0.4, 2.7, 3), rng.uniform(0, 6)])),
    )
    slopes = []
    for chart, K, draw in cases:
        fd_chart = replace(chart, analytic_riemann=None, analytic_christoffel=None)
        for _ in range(3):
            x = draw()
            g = metric_at(chart, x)
            ref = lower_last(constant_curvature_riemann(g, K), g)
            a = riemann_at(chart, x)
            f = riemann_at(fd_chart, x)
            sym_a = max(sym_a, max(riemann_symmetry_errors(a).values()))
            sym_fd = max(sym_fd, max(riemann_symmetry_errors(f).values()))
            rt_a = max(rt_a, float(np.max(np.abs(a.riemann_lowered - ref))))
            rt_fd = max(rt_fd, float(np.max(np.abs(f.riemann_lowered - ref))))
            u, v = rng.normal(size=(2, chart.dim))
            sec = max(sec, abs(sectional_curvature(chart, x, u, v) - K))
        slopes.append(_christoffel_slope(chart, draw())[0])
    slope_ok = all(abs(s - 2.0) <= 0.1 for s in slopes)
    ok = sym_a <= 1e-10 and rt_a <= 1e-10 and sec <= 1e-10 and sym_fd <= 1e-6 and rt_fd <= 1e-6 and slope_ok
    return CriterionResult(
        9,
        "curvature kernel",
        ok,
        {
            "symmetry_analytic": sym_a,
            "symmetry_fd": sym_fd,
            "roundtrip_analytic": rt_a,
            "roundtrip_fd": rt_fd,
            "sectional_error": sec,
            "christoffel_slopes": slopes,
        },
        "Riemann symmetries, constant-curvature round trip, Christoffel FD order 2",
        "1e-10 analytic, 1e-6 FD, slope 2 +- 0.1",
    )


def check_evolution(seed: int) -> CriterionResult:
    chart = product_time_sphere_chart(3, 1.0)
    st = equator_state(1.0, 64, TWO_PI / 64 / 4)
    x0 = st.X
    for _ in range(1000):
        st = step(st, chart)
    drift = float(max(np.max(np.abs(st.X[:, 1:] - x0[:, 1:])), np.max(np.abs(st.X[:, 0] - st.tau))))
    flat = flat_chart(4)
    ring = evolve(breathing_ring_state(1.0, 256, TWO_PI / 256 / 8), flat, np.pi / 3)
    ring_err = float(np.max(np.abs(ring.X - breathing_ring_exact(1.0, ring.taus, ring.sigmas))))
    res = []
    sizes = (64, 128, 256)
    for ns in sizes:
        g = evolve(breathing_ring_state(1.0, ns, TWO_PI / ns / 2), flat, np.pi / 3)
        res.append(float(np.max(geodesic_residual_series(g, path="full"))))
    slope = float(-np.polyfit(np.log(sizes), np.log(res), 1)[0])
    return CriterionResult(
        10,
        "evolution fidelity",
        drift <= 1e-8 and ring_err <= 1e-6 and abs(slope - 2.0) <= 0.2,
        {"equator_drift": drift, "ring_error": ring_err, "residuals": res, "residual_slope": slope},
        "static equator, closed-form ring, order-2 residual",
        "1e-8 / 1e-6 / slope 2 +- 0.2",
    )


CHECKS: dict = {
    1: check_flat,
    2: check_oscillatory,
    3: check_hyperbolic,
    4: check_wronskian,
    5: check_index_identity,
    6: check_positivity,
    7: check_negative_mode,
    8: check_second_variation,
    9: check_curvature,
    10: check_evolution,
}

# wall-clock budgets in seconds; reported and checked but kept out of the JSON
BUDGETS = {1: 1.0, 2: 5.0, 3: 1.0, 4: 2.0, 5: 10.0, 6: 10.0, 7: 5.0, 8: 30.0, 9: 5.0, 10: 60.0}

SUITES = {"core": tuple(CHECKS)}


def run_criterion(number: int, seed: int = 0) -> CriterionResult:
    t0 = time.perf_counter()
    res = CHECKS[number](seed)
    return replace(res, wall=time.perf_counter() - t0)


def run_suite(name: str = "core", seed: int = 0, echo: Callable = None) -> list:
    if name not in SUITES:
        raise ValidationError(f"unknown acceptance suite {name!r}; known: {', '.join(SUITES)}")
    out = []
    for n in SUITES[name]:
        r = run_criterion(n, seed)
        if echo:
            echo(r.line())
        out.append(r)
    return out
