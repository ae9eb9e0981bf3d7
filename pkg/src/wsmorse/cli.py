"""Command-line scenario runner.

Exit codes: 0 success, 1 acceptance failure, 2 invalid input, 3 numerical
failure.  Errors are also reported as a JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .errors import NumericalError, ValidationError, WsMorseError
from .evolution import (
    breathing_ring_state,
    equator_state,
    evolve,
    geodesic_residual_series,
    rotating_ring_state,
    tilted_ring_state,
)
from .indexform import (
    VariationField,
    index_form,
    jacobi_field_to,
    negative_mode,
    positivity_certificate,
    random_variation_field,
)
from .io import dumps_json, write_csv, write_json
from .jacobi import TidalMatrix, find_conjugate_strings, integrate_jacobi, tidal_matrix_from_grid
from .manifold import ConstantCurvatureSpec
from .scenario import Scenario, load_scenario
from .worldsheet import action, equator_tube

EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        _report_error("UsageError", message, EXIT_INVALID, None)
        sys.exit(EXIT_INVALID)


def _seed(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _eps_list(text):
    try:
        vals = tuple(float(x) for x in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad epsilon list {text!r}") from None
    if len(vals) < 3 or any(not v > 0 for v in vals):
        raise argparse.ArgumentTypeError("need at least three positive epsilons")
    return vals


def _positive(text):
    v = float(text)
    if not v > 0 or not math.isfinite(v):
        raise argparse.ArgumentTypeError("must be a positive number")
    return v


def thread_cap() -> int:
    raw = os.environ.get("WSMORSE_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise ValidationError(f"WSMORSE_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValidationError("WSMORSE_THREADS must be at least 1")
    return n


# ---------------------------------------------------------------------------
# shared helpers


def _meta(sc: Scenario, verb: str) -> dict:
    return {"scenario": sc.name, "scenario_hash": sc.hash, "seed": sc["seed"], "verb": verb}


def _out_dir(args, sc: Scenario) -> Path:
    if args.out:
        return Path(args.out)
    if sc["output.dir"]:
        return Path(sc["output.dir"])
    return Path("wsmorse_out") / sc.name


def _chart(sc: Scenario):
    return ConstantCurvatureSpec(sc["manifold.kind"], sc["manifold.K"], sc["manifold.dim"], sc["manifold.fd_step"]).chart()


def _equator_frame(K, dim):
    r = 1.0 / math.sqrt(K)
    E = np.zeros((dim - 2, dim))
    for i in range(dim - 2):
        E[i, i + 1] = 1.0 / r
    return E


def tidal_for(sc: Scenario) -> TidalMatrix:
    """Explicit ``lambda I`` if ``jacobi.lambda`` is set, otherwise contracted from the chart."""
    m = sc.transverse_dim
    if sc["jacobi.lambda"] is not None:
        return TidalMatrix.explicit(sc["jacobi.lambda"], m)
    kind, dim = sc["manifold.kind"], sc["manifold.dim"]
    if kind == "flat":
        return TidalMatrix.explicit(0.0, m)
    if kind == "product_time_sphere":
        if m != dim - 2:
            raise ValidationError("jacobi.transverse_dim must equal manifold.dim - 2 for a chart-derived tidal matrix")
        T = sc["jacobi.T"]
        grid = equator_tube(sc["manifold.K"], T, max(64, int(math.ceil(T / 0.01)) + 1), 16, dim=dim, chart=_chart(sc))
        return tidal_matrix_from_grid(grid, _equator_frame(sc["manifold.K"], dim))
    raise ValidationError(f"set jacobi.lambda: no built-in geodesic tube for manifold.kind = {kind}")


def _lambda_report(M: TidalMatrix):
    m0 = np.asarray(M(0.0), dtype=float)
    if np.allclose(m0, m0[0, 0] * np.eye(M.dim), rtol=0, atol=1e-8):
        return float(m0[0, 0])
    return sorted(float(x) for x in np.linalg.eigvalsh(0.5 * (m0 + m0.T)))


def _strings_record(found):
    return [{"tau_star": c.tau_star, "multiplicity": c.multiplicity, "tangential": c.tangential} for c in found]


def _jacobi_dt(args, sc):
    return args.dt if args.dt is not None else sc["jacobi.dt"]


# ---------------------------------------------------------------------------
# verbs


def cmd_simulate(args, sc: Scenario) -> int:
    chart = _chart(sc)
    kind, dim, K = sc["manifold.kind"], sc["manifold.dim"], sc["manifold.K"]
    T, Ns, shape = sc["grid.T"], sc["grid.Nsigma"], sc["evolution.shape"]
    dt = args.dt or sc["evolution.dt"] or T / (sc["grid.Ntau"] - 1)
    if shape in ("breathing_ring", "rotating_ring") and kind != "flat":
        raise ValidationError(f"evolution.shape = {shape} needs manifold.kind = flat")
    if shape in ("equator", "tilted_ring") and kind != "product_time_sphere":
        raise ValidationError(f"evolution.shape = {shape} needs manifold.kind = product_time_sphere")
    if shape == "breathing_ring":
        state = breathing_ring_state(sc["evolution.R"], Ns, dt, dim=dim)
    elif shape == "rotating_ring":
        if dim != 5:
            raise ValidationError("rotating_ring needs manifold.dim = 5")
        state = rotating_ring_state(sc["evolution.R"], Ns, dt)
    elif shape == "equator":
        state = equator_state(K, Ns, dt, dim=dim)
    else:
        state = tilted_ring_state(K, sc["evolution.amplitude"], Ns, dt, dim=dim)
    grid = evolve(state, chart, T, sc["evolution.max_gauge_drift"])
    d = grid.meta["diagnostics"]
    geo = geodesic_residual_series(grid, path="full")
    out = _out_dir(args, sc)
    meta = _meta(sc, "simulate")
    write_csv(
        out / "simulate.csv",
        ["tau", "gauge_res1", "gauge_res2", "geodesic_res", "energy"],
        np.column_stack([d["tau"], d["gauge_res1"], d["gauge_res2"], geo, d["energy"]]),
        meta,
    )
    every = sc["output.every"]
    if every:
        n = grid.X.shape[-1]
        header = ["tau", "sigma"] + [f"x{i}" for i in range(n)]
        for k in range(0, len(grid.taus), every):
            rows = np.column_stack([np.full(grid.shape[1], grid.taus[k]), grid.sigmas, grid.X[k]])
            write_csv(out / f"grid_{k:06d}.csv", header, rows, meta)
    summary = {
        "steps": len(grid.taus) - 1,
        "dt": grid.dtau,
        "T": grid.T,
        "action": action(grid),
        "max_gauge_res1": float(np.max(d["gauge_res1"])),
        "max_gauge_res2": float(np.max(d["gauge_res2"])),
        "max_geodesic_res": float(np.max(geo)),
        "energy_drift": float(np.max(np.abs(d["energy"] - d["energy"][0]))),
    }
    write_json(out / "simulate.json", summary, meta)
    print(f"simulate: {summary['steps']} steps, max geodesic residual {summary['max_geodesic_res']:.3e} -> {out}")
    return EXIT_OK


def _jacobi_record(M, T, dt):
    traj = integrate_jacobi(M, T, dt)
    found = find_conjugate_strings(traj)
    rec = {
        "lambda": _lambda_report(M),
        "T": T,
        "dt": traj.dt,
        "tidal_source": M.source,
        "max_wronskian": float(np.max(traj.wronskian_norm)),
        "conjugate_strings": _strings_record(found),
    }
    return traj, found, rec


def _write_jacobi(out, stem, traj, found, meta):
    write_csv(out / f"{stem}.csv", ["tau", "detA", "wronskian_norm"], np.column_stack([traj.taus, traj.detA, traj.wronskian_norm]), meta)
    rows = np.array([[c.tau_star, c.multiplicity] for c in found]).reshape(-1, 2)
    write_csv(out / f"{stem}_conjugate_strings.csv", ["tau_star", "multiplicity"], rows, meta)


def cmd_jacobi(args, sc: Scenario) -> int:
    M = tidal_for(sc)
    traj, found, rec = _jacobi_record(M, sc["jacobi.T"], _jacobi_dt(args, sc))
    out = _out_dir(args, sc)
    meta = _meta(sc, "jacobi")
    _write_jacobi(out, "jacobi", traj, found, meta)
    write_json(out / "jacobi.json", rec, meta)
    print(f"jacobi: {len(found)} conjugate string(s) on (0, {rec['T']:g}] -> {out}")
    return EXIT_OK


def _aligned_k(M, r, T, dt):
    """Grid with ``r`` as a node and a sine bump along the jump of ``J'`` at ``r``."""
    nr = max(4, int(math.ceil(r / dt - 1e-9)))
    h = r / nr
    N = int(round(T / h))
    if N <= nr + 3:
        raise ValidationError("T leaves too little room past the first conjugate string")
    taus = np.arange(N + 1) * h
    J, _, _ = jacobi_field_to(M, r, taus)
    ((_, dJ),) = J.jumps()
    e = dJ / np.linalg.norm(dJ)
    w = np.pi / taus[-1]

    def fn(t):
        s, c = np.sin(w * t), np.cos(w * t)
        return np.outer(s, e), np.outer(w * c, e), np.outer(-w * w * s, e)

    return VariationField.from_function(taus, fn)


def cmd_index(args, sc: Scenario) -> int:
    M = tidal_for(sc)
    T, dt = sc["jacobi.T"], _jacobi_dt(args, sc)
    eps = args.eps or sc["index.eps"]
    traj = integrate_jacobi(M, T, dt)
    found = find_conjugate_strings(traj)
    inside = [c for c in found if c.tau_star < T - 0.5 * traj.dt]
    rng = np.random.default_rng(sc["seed"])
    V = random_variation_field(rng, traj.taus, M.dim, sc["index.breaks"])
    rec = {
        "scenario": sc.name,
        "lambda": _lambda_report(M),
        "T": T,
        "conjugate_strings": _strings_record(found),
        "I_VV": index_form(V, V, M),
        "certificate": None if inside else positivity_certificate(M, traj, V),
        "negative_mode": None,
    }
    if inside:
        r = inside[0].tau_star
        k = _aligned_k(M, r, T, dt)
        nm = negative_mode(M, float(k.taus[int(round(r / k.h))]), float(k.taus[-1]), k, eps)
        rec["negative_mode"] = {
            "r": r,
            "T_effective": float(k.taus[-1]),
            "c": nm.c,
            "I_kJ": nm.I_kJ,
            "I_kJ_with_breaks": nm.I_kJ_with_breaks,
            "I_kk": nm.I_kk,
            "I_JJ": nm.I_JJ,
            "epsilons": list(nm.epsilons),
            "I_total_by_eps": list(nm.I_total_by_eps),
            "I_total_limit": nm.I_total_limit,
        }
    out = _out_dir(args, sc)
    meta = _meta(sc, "index")
    if sc["index.trace"]:
        Mg = np.broadcast_to(M(traj.taus), (len(traj.taus), M.dim, M.dim))
        rows = []
        for s in V.segments:
            dd = np.sum(s.d1 * s.d1, axis=1)
            vmv = np.einsum("ti,tij,tj->t", s.values, Mg[s.i0 : s.i1 + 1], s.values)
            rows.append(np.column_stack([traj.taus[s.i0 : s.i1 + 1], dd, vmv]))
        write_csv(out / "index_trace.csv", ["tau", "dV_dV", "V_M_V"], np.vstack(rows), meta)
    write_json(out / "index.json", rec, meta)
    print(f"index: I(V,V) = {rec['I_VV']:.6g}, {len(found)} conjugate string(s) -> {out}")
    return EXIT_OK


def cmd_sweep(args, sc: Scenario) -> int:
    lambdas = sc["sweep.lambdas"]
    T, dt = sc["jacobi.T"], _jacobi_dt(args, sc)
    m = sc.transverse_dim

    def one(lam):
        return _jacobi_record(TidalMatrix.explicit(lam, m), T, dt)

    with ThreadPoolExecutor(max_workers=min(thread_cap(), len(lambdas))) as pool:
        results = list(pool.map(one, lambdas))
    out = _out_dir(args, sc)
    meta = _meta(sc, "sweep")
    records = []
    for i, (lam, (traj, found, rec)) in enumerate(zip(lambdas, results)):
        _write_jacobi(out, f"sweep_{i:03d}", traj, found, meta)
        if lam > 0:
            rec["expected_first"] = math.pi / math.sqrt(lam)
        records.append(rec)
    write_json(out / "sweep.json", {"records": records}, meta)
    for rec in records:
        first = rec["conjugate_strings"][0]["tau_star"] if rec["conjugate_strings"] else None
        print(f"sweep: lambda = {rec['lambda']:g}, first conjugate string at {first}")
    return EXIT_OK


def cmd_acceptance(args) -> int:
    from .acceptance import run_suite

    seed = args.seed or 0
    results = run_suite(args.suite, seed, echo=print)
    passed = sum(r.passed and r.within_budget for r in results)
    print(f"{passed}/{len(results)} criteria passed")
    if args.out:
        meta = {"suite": args.suite, "seed": seed}
        write_json(Path(args.out) / "acceptance.json", {"criteria": [r.record() for r in results]}, meta)
    return EXIT_OK if passed == len(results) else EXIT_FAIL


def acceptance_json(suite: str = "core", seed: int = 0) -> str:
    from .acceptance import run_suite

    results = run_suite(suite, seed)
    return dumps_json({"criteria": [r.record() for r in results]}, {"suite": suite, "seed": seed})


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="wsmorse", description="Closed-string geodesic surfaces, Jacobi fields and index forms.")
    p.add_argument("--version", action="version", version=f"wsmorse {__version__}")
    sub = p.add_subparsers(dest="verb", required=True, parser_class=_Parser)
    for verb, helptext in (
        ("simulate", "evolve a string in orthonormal gauge"),
        ("jacobi", "integrate the matrix Jacobi equation and locate conjugate strings"),
        ("index", "evaluate the index form, certificate and negative mode"),
        ("sweep", "scan tidal eigenvalues from sweep.lambdas"),
    ):
        s = sub.add_parser(verb, help=helptext)
        s.add_argument("--scenario", required=True, help="scenario file or built-in name")
        s.add_argument("--out", help="output directory")
        s.add_argument("--seed", type=_seed)
        s.add_argument("--dt", type=_positive)
        s.add_argument("--eps", type=_eps_list, help="comma-separated epsilon sweep")
    a = sub.add_parser("acceptance", help="run an acceptance suite")
    a.add_argument("suite", nargs="?", default="core")
    a.add_argument("--out")
    a.add_argument("--seed", type=_seed)
    return p


def _report_error(kind, message, code, out):
    payload = {"error": kind, "message": message, "exit_code": code}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    if out is not None:
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / "error.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        except OSError:
            pass


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out) if getattr(args, "out", None) else None
    try:
        thread_cap()
        if args.verb == "acceptance":
            return cmd_acceptance(args)
        sc = load_scenario(args.scenario)
        if args.seed is not None:
            sc = sc.with_overrides(seed=args.seed)
        out = _out_dir(args, sc)
        return {"simulate": cmd_simulate, "jacobi": cmd_jacobi, "index": cmd_index, "sweep": cmd_sweep}[args.verb](args, sc)
    except ValidationError as exc:
        _report_error(type(exc).__name__, str(exc), EXIT_INVALID, out)
        return EXIT_INVALID
    except (NumericalError, WsMorseError) as exc:
        _report_error(type(exc).__name__, str(exc), EXIT_NUMERICAL, out)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
