"""Line-oriented ``key = value`` scenario files.

Blank lines and lines starting with ``#`` are ignored.  Every key must be
known; a typo is an error rather than a silently ignored setting.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ValidationError
from .manifold import CHART_KINDS


def _float(v):
    return float(v)


def _int(v):
    return int(v)


def _float_list(v):
    return tuple(float(x) for x in v.replace(",", " ").split())


def _bool(v):
    s = v.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


# key -> (parser, default)
KEYS = {
    "scenario.name": (str, "custom"),
    "manifold.kind": (str, "flat"),
    "manifold.dim": (_int, 4),
    "manifold.K": (_float, 0.0),
    "manifold.fd_step": (_float, 1e-4),
    "grid.T": (_float, 1.0),
    "grid.Ntau": (_int, 201),
    "grid.Nsigma": (_int, 128),
    "evolution.shape": (str, "breathing_ring"),
    "evolution.R": (_float, 1.0),
    "evolution.amplitude": (_float, 0.05),
    "evolution.dt": (_float, None),
    "evolution.max_gauge_drift": (_float, None),
    "jacobi.T": (_float, 5.0),
    "jacobi.dt": (_float, 1e-3),
    "jacobi.lambda": (_float, None),
    "jacobi.transverse_dim": (_int, None),
    "index.breaks": (_int, 2),
    "index.eps": (_float_list, (0.3, 0.1, 0.03, 0.01)),
    "index.trace": (_bool, False),
    "sweep.lambdas": (_float_list, (0.25, 1.0, 4.0)),
    "output.dir": (str, None),
    "output.every": (_int, 0),
    "seed": (_int, 0),
}

EVOLUTION_SHAPES = ("breathing_ring", "rotating_ring", "equator", "tilted_ring")

BUILTINS = {
    "flat_ring": """
scenario.name = flat_ring
manifold.kind = flat
manifold.dim = 4
grid.T = 1.0
grid.Ntau = 257
grid.Nsigma = 128
evolution.shape = breathing_ring
evolution.R = 1.0
jacobi.T = 5.0
jacobi.dt = 1e-3
""",
    "sphere_sweep": """
scenario.name = sphere_sweep
manifold.kind = round_sphere
manifold.dim = 4
manifold.K = 1.0
jacobi.T = 8.0
jacobi.dt = 1e-3
jacobi.transverse_dim = 2
sweep.lambdas = 0.25, 1, 4
""",
    "equator_tube": """
scenario.name = equator_tube
manifold.kind = product_time_sphere
manifold.dim = 3
manifold.K = 1.0
grid.T = 2.0
grid.Ntau = 2001
grid.Nsigma = 64
evolution.shape = equator
jacobi.T = 5.0
jacobi.dt = 1e-3
""",
}


@dataclass(frozen=True)
class Scenario:
    values: dict
    source: str = "<string>"
    explicit: frozenset = field(default_factory=frozenset)

    def __getitem__(self, key):
        return self.values[key]

    @property
    def name(self) -> str:
        return self.values["scenario.name"]

    def with_overrides(self, **kv) -> "Scenario":
        vals = dict(self.values)
        for k, v in kv.items():
            if k not in KEYS:
                raise ValidationError(f"unknown scenario key {k!r}")
            vals[k] = v
        sc = Scenario(vals, self.source, self.explicit | frozenset(kv))
        sc.validate()
        return sc

    def canonical(self) -> str:
        lines = []
        for k in sorted(self.values):
            v = self.values[k]
            if v is None:
                continue
            if isinstance(v, tuple):
                v = ", ".join(repr(x) for x in v)
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{k} = {v}")
        return "\n".join(lines) + "\n"

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode("utf-8")).hexdigest()[:16]

    @property
    def transverse_dim(self) -> int:
        m = self.values["jacobi.transverse_dim"]
        return self.values["manifold.dim"] - 2 if m is None else m

    def validate(self) -> None:
        v = self.values
        if v["manifold.kind"] not in CHART_KINDS:
            raise ValidationError(f"manifold.kind must be one of {', '.join(CHART_KINDS)}; got {v['manifold.kind']!r}")
        if v["manifold.dim"] < 3:
            raise ValidationError("manifold.dim must be at least 3 so that a transverse direction exists")
        if v["manifold.fd_step"] <= 0:
            raise ValidationError("manifold.fd_step must be positive")
        for k in ("grid.T", "jacobi.T", "jacobi.dt", "evolution.R"):
            if not v[k] > 0:
                raise ValidationError(f"{k} must be positive")
        for k in ("evolution.dt", "evolution.max_gauge_drift"):
            if v[k] is not None and not v[k] > 0:
                raise ValidationError(f"{k} must be positive")
        if v["grid.Ntau"] < 4 or v["grid.Nsigma"] < 4:
            raise ValidationError("grid.Ntau and grid.Nsigma must be at least 4")
        if v["evolution.shape"] not in EVOLUTION_SHAPES:
            raise ValidationError(f"evolution.shape must be one of {', '.join(EVOLUTION_SHAPES)}")
        if self.transverse_dim < 1:
            raise ValidationError("jacobi.transverse_dim must be at least 1")
        if v["index.breaks"] < 0 or v["output.every"] < 0 or v["seed"] < 0:
            raise ValidationError("index.breaks, output.every and seed must be non-negative")
        if any(e <= 0 for e in v["index.eps"]) or len(v["index.eps"]) < 3:
            raise ValidationError("index.eps needs at least three positive values")
        if not v["sweep.lambdas"]:
            raise ValidationError("sweep.lambdas is empty")


def parse_scenario(text: str, source: str = "<string>") -> Scenario:
    values = {k: d for k, (_, d) in KEYS.items()}
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValidationError(f"{source}:{lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ValidationError(f"{source}:{lineno}: unknown key {key!r}")
        if key in seen:
            raise ValidationError(f"{source}:{lineno}: duplicate key {key!r}")
        seen.add(key)
        try:
            values[key] = KEYS[key][0](val)
        except ValueError as exc:
            raise ValidationError(f"{source}:{lineno}: bad value for {key}: {exc}") from None
    sc = Scenario(values, source, frozenset(seen))
    sc.validate()
    return sc


def load_scenario(ref: str) -> Scenario:
    """A built-in scenario name or a path to a scenario file."""
    if ref in BUILTINS:
        return parse_scenario(BUILTINS[ref], source=f"builtin:{ref}")
    p = Path(ref)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read scenario {ref!r}: {exc.strerror}") from None
    return parse_scenario(text, source=str(p))
