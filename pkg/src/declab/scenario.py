"""Scenario files: parsing, model generation and decomposition presets.

A scenario is a JSON object.  Errors carry the line and column of the
offending text so the command line can point at it.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .core import (
    NAMED_MATRICES,
    Decomposition,
    ModelSpec,
    RelevantObservable,
    make_spin_factor,
    traditional_dec1,
)
from .errors import ConfigError, DeclabError

_UNIFORM = re.compile(r"^\s*uniform\s*\(\s*([^)]+)\)\s*$")
_RANDOM = re.compile(r"^\s*random\s*\[\s*([^,\]]+)\s*,\s*([^\]]+)\]\s*$")
PRESETS = ("traditional-dec1", "traditional-dec2", "generalized-dec1", "generalized-dec2")


class _Source:
    """Raw config text, used to locate keys for error messages."""

    def __init__(self, text: str):
        self.text = text

    def where(self, key: str | None) -> tuple[int, int]:
        if key is None:
            return 1, 1
        m = re.search(r'"%s"\s*:' % re.escape(key), self.text)
        if m is None:
            return 1, 1
        pos = m.start()
        line = self.text.count("\n", 0, pos) + 1
        col = pos - (self.text.rfind("\n", 0, pos) + 1) + 1
        return line, col

    def error(self, key: str | None, message: str) -> ConfigError:
        line, col = self.where(key)
        return ConfigError(message, line, col)


def load_json(text: str) -> tuple[dict, _Source]:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, exc.lineno, exc.colno) from None
    if not isinstance(data, dict):
        raise ConfigError("top level must be an object", 1, 1)
    return data, _Source(text)


@dataclass
class GeneratorSpec:
    M: int
    N: int
    amplitude_mode: str = "balanced"
    coupling_mode: str = "random[0,1]"
    seed: int | None = None

    def coupling_law(self):
        m = _UNIFORM.match(self.coupling_mode)
        if m:
            return "uniform", (float(m.group(1)),)
        m = _RANDOM.match(self.coupling_mode)
        if m:
            lo, hi = float(m.group(1)), float(m.group(2))
            if not hi >= lo:
                raise ValueError("random[lo,hi] needs hi >= lo")
            return "random", (lo, hi)
        raise ValueError(f"unknown coupling_mode {self.coupling_mode!r}")

    @property
    def needs_seed(self) -> bool:
        return self.amplitude_mode == "random" or self.coupling_law()[0] == "random"

    def build(self) -> ModelSpec:
        """Deterministic model: amplitudes (A then B) are drawn before couplings."""
        rng = np.random.default_rng(self.seed)
        n = self.M + self.N
        if self.amplitude_mode == "balanced":
            amps = np.full((n, 2), 1.0 / math.sqrt(2.0), dtype=complex)
        elif self.amplitude_mode == "random":
            raw = rng.standard_normal((n, 4))
            amps = raw[:, 0::2] + 1j * raw[:, 1::2]
        else:
            raise ValueError(f"unknown amplitude_mode {self.amplitude_mode!r}")
        kind, args = self.coupling_law()
        if kind == "uniform":
            g = np.full(self.N, args[0])
        else:
            g = rng.uniform(args[0], args[1], self.N)
        factors = [make_spin_factor(a, b) for a, b in amps]
        return ModelSpec(tuple(factors[: self.M]), tuple(factors[self.M:]), g)


def _amp(x) -> complex:
    if isinstance(x, (list, tuple)):
        if len(x) != 2:
            raise ValueError("complex amplitudes are written [re, im]")
        return complex(float(x[0]), float(x[1]))
    return complex(float(x))


def _explicit_model(spec: dict) -> ModelSpec:
    sides = []
    for key in ("a_side", "b_side"):
        sides.append(tuple(make_spin_factor(_amp(u), _amp(d)) for u, d in spec[key]))
    return ModelSpec(sides[0], sides[1], np.asarray(spec["couplings"], dtype=float))


def _matrix(value) -> np.ndarray:
    if isinstance(value, str):
        key = value.lower()
        if key not in NAMED_MATRICES:
            raise ValueError(f"unknown matrix name {value!r}")
        return NAMED_MATRICES[key]
    rows = [[_amp(x) for x in row] for row in value]
    return np.array(rows, dtype=complex)


@dataclass
class Scenario:
    model: ModelSpec
    decomposition: Decomposition
    observable: RelevantObservable | None
    times: np.ndarray | None
    thresholds: dict = field(default_factory=dict)
    window_factor: float = 20.0
    points: int = 2000
    outputs: dict = field(default_factory=dict)
    generator: GeneratorSpec | None = None


def build_decomposition(model: ModelSpec, spec, src: _Source) -> Decomposition:
    if isinstance(spec, str):
        spec = {"preset": spec}
    if not isinstance(spec, dict):
        raise src.error("decomposition", "decomposition must be a preset name or an object")
    if "system" in spec:
        return Decomposition.from_system(model, [int(s) for s in spec["system"]])
    preset = spec.get("preset")
    if preset == "traditional-dec1" or preset == "generalized-dec1":
        return traditional_dec1(model)
    if preset == "traditional-dec2":
        if "j" not in spec:
            raise src.error("decomposition", "traditional-dec2 needs j (0-based B index)")
        j = int(spec["j"])
        if not 0 <= j < model.N:
            raise src.error("j", f"j={j} outside 0..{model.N - 1}")
        return Decomposition.from_system(model, [model.M + j])
    if preset == "generalized-dec2":
        if "site" not in spec:
            raise src.error("decomposition", "generalized-dec2 needs site (global index)")
        site = int(spec["site"])
        if not 0 <= site < model.num_sites:
            raise src.error("site", f"site={site} outside 0..{model.num_sites - 1}")
        return Decomposition.from_system(model, [site])
    raise src.error("decomposition", f"unknown preset {preset!r}; expected one of {PRESETS}")


def build_observable(spec, model: ModelSpec, src: _Source) -> RelevantObservable | None:
    if spec is None:
        return None
    if not isinstance(spec, dict):
        raise src.error("observable", "observable must map site indices to matrices")
    try:
        factors = {int(k): _matrix(v) for k, v in spec.items()}
    except (ValueError, TypeError) as exc:
        raise src.error("observable", str(exc)) from None
    for s in factors:
        if not 0 <= s < model.num_sites:
            raise src.error("observable", f"observable site {s} outside the model")
    return RelevantObservable(factors)


def parse_generator(spec: dict, src: _Source, seed_override: int | None = None) -> GeneratorSpec:
    try:
        gen = GeneratorSpec(
            int(spec["M"]),
            int(spec["N"]),
            str(spec.get("amplitude_mode", "balanced")),
            str(spec.get("coupling_mode", "random[0,1]")),
            spec.get("seed"),
        )
    except KeyError as exc:
        raise src.error("model", f"generator needs {exc.args[0]}") from None
    if seed_override is not None:
        gen.seed = int(seed_override)
    try:
        needs = gen.needs_seed
    except ValueError as exc:
        raise src.error("coupling_mode", str(exc)) from None
    if gen.M < 1 or gen.N < 1:
        raise src.error("model", "M and N must be >= 1")
    if needs and gen.seed is None:
        raise src.error("model", "seed is required for random amplitude or coupling modes")
    if gen.seed is not None:
        gen.seed = int(gen.seed)
    return gen


def parse_scenario(data: dict, src: _Source, seed_override: int | None = None) -> Scenario:
    if "model" not in data:
        raise src.error(None, "missing key 'model'")
    mspec = data["model"]
    gen = None
    try:
        if isinstance(mspec, dict) and "a_side" in mspec:
            model = _explicit_model(mspec)
        elif isinstance(mspec, dict):
            gen = parse_generator(mspec, src, seed_override)
            model = gen.build()
        else:
            raise src.error("model", "model must be an object")
    except ConfigError:
        raise
    except (DeclabError, ValueError, KeyError, TypeError) as exc:
        raise src.error("model", f"invalid model: {exc}") from None
    try:
        dec = build_decomposition(model, data.get("decomposition", "traditional-dec1"), src)
    except ConfigError:
        raise
    except (DeclabError, ValueError, TypeError) as exc:
        raise src.error("decomposition", str(exc)) from None
    obs = build_observable(data.get("observable"), model, src)
    times = None
    grid = data.get("time_grid")
    points = int(data.get("points", 2000))
    if grid is not None:
        try:
            t_max, points = float(grid["t_max"]), int(grid["points"])
        except (KeyError, TypeError, ValueError):
            raise src.error("time_grid", "time_grid needs numeric t_max and points") from None
        if not t_max > 0 or points < 2:
            raise src.error("time_grid", "time_grid needs t_max > 0 and points >= 2")
        times = np.linspace(0.0, t_max, points)
    thresholds = dict(data.get("thresholds", {}))
    unknown = set(thresholds) - {"tol_dec", "tol_osc", "threshold"}
    if unknown:
        raise src.error("thresholds", f"unknown threshold keys {sorted(unknown)}")
    return Scenario(
        model,
        dec,
        obs,
        times,
        {k: float(v) for k, v in thresholds.items()},
        float(data.get("window_factor", 20.0)),
        points,
        dict(data.get("outputs", {})),
        gen,
    )


def scenario_from_text(text: str, seed_override: int | None = None) -> Scenario:
    data, src = load_json(text)
    return parse_scenario(data, src, seed_override)


def with_model(data: dict, **changes: Any) -> dict:
    """Copy of a scenario dict with generator fields replaced."""
    out = json.loads(json.dumps(data))
    out["model"].update(changes)
    return out
