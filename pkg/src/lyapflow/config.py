"""Experiment configuration: JSON parsing, validation and energy closure."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, LyapflowError
from .systems import SYSTEM_IDS, SystemDefinition, make_system

MODES = ("spectrum", "compare", "nve-check", "sweep")
DEFAULTS = {"dt": 1e-2, "sample_stride": 100, "mode": "spectrum", "output": "lyapflow-out",
            "workers": 1, "renorm_every": 10, "nve_points": 10}
KNOWN_KEYS = {"system", "params", "initial_state", "energy_closure", "t_max", "dt", "sample_stride",
              "mode", "sweep", "output", "workers", "renorm_every", "nve_points"}


@dataclass(frozen=True)
class EnergyClosure:
    """Solve coordinate ``solve_for`` so that ``H = target``, taking the root with sign ``sign``."""

    target: float
    solve_for: str | int
    sign: int = 1


@dataclass(frozen=True)
class Sweep:
    param: str
    values: tuple[float, ...]


@dataclass(frozen=True)
class ExperimentConfig:
    system: str
    params: dict
    initial_state: tuple[float, ...]
    t_max: float
    dt: float = DEFAULTS["dt"]
    sample_stride: int = DEFAULTS["sample_stride"]
    mode: str = DEFAULTS["mode"]
    output_path: str = DEFAULTS["output"]
    energy_closure: EnergyClosure | None = None
    sweep: Sweep | None = None
    workers: int = DEFAULTS["workers"]
    renorm_every: int = DEFAULTS["renorm_every"]
    nve_points: int = DEFAULTS["nve_points"]

    def build_system(self, **overrides) -> SystemDefinition:
        return make_system(self.system, {**self.params, **overrides})

    def with_param(self, name: str, value: float) -> "ExperimentConfig":
        """Copy with one parameter changed; any energy closure is re-solved."""
        params = {**self.params, name: float(value)}
        cfg = replace(self, params=params)
        if self.energy_closure is not None:
            x0 = solve_energy_closure(cfg.build_system(), np.array(self.initial_state), self.energy_closure)
            cfg = replace(cfg, initial_state=tuple(float(v) for v in x0))
        return cfg

    def to_dict(self) -> dict:
        out = {
            "system": self.system, "params": dict(self.params), "initial_state": list(self.initial_state),
            "t_max": self.t_max, "dt": self.dt, "sample_stride": self.sample_stride, "mode": self.mode,
            "output": self.output_path, "workers": self.workers, "renorm_every": self.renorm_every,
            "nve_points": self.nve_points,
        }
        if self.energy_closure is not None:
            ec = self.energy_closure
            out["energy_closure"] = {"target": ec.target, "solve_for": ec.solve_for, "sign": ec.sign}
        if self.sweep is not None:
            out["sweep"] = {"param": self.sweep.param, "values": list(self.sweep.values)}
        return out


def solve_energy_closure(sys: SystemDefinition, x0, rule: EnergyClosure) -> np.ndarray:
    """Fill coordinate ``rule.solve_for`` of ``x0`` so that ``H(x0) = rule.target``.

    ``H`` must be quadratic in that coordinate (true for momenta of every
    built-in). The coefficients are read off from three evaluations and then
    confirmed at a fourth point.
    """
    if sys.hamiltonian is None:
        raise ConfigError(f"energy closure needs a Hamiltonian system; {sys.name!r} has none")
    try:
        k = sys.coordinate_index(rule.solve_for)
    except LyapflowError as exc:
        raise ConfigError(f"energy_closure.solve_for: {exc}") from None
    x = np.array(x0, dtype=float)
    H = sys.hamiltonian.value

    def at(y):
        x[k] = y
        return H(x)

    c = at(0.0)
    hp, hm = at(1.0), at(-1.0)
    a = 0.5 * (hp + hm) - c
    b = 0.5 * (hp - hm)
    if abs(at(2.0) - (4 * a + 2 * b + c)) > 1e-9 * max(1.0, abs(a), abs(b), abs(c)) or a == 0.0:
        raise ConfigError(f"energy closure: H is not quadratic in coordinate {sys.coordinate_names[k]!r}")
    disc = b * b - 4 * a * (c - rule.target)
    if disc < 0:
        raise ConfigError(
            f"energy closure infeasible: H = {rule.target} cannot be reached by "
            f"{sys.coordinate_names[k]} (negative square {disc / (4 * a * a):.6g})")
    r = math.sqrt(disc)
    roots = [(-b + r) / (2 * a), (-b - r) / (2 * a)]
    wanted = [y for y in roots if (y > 0 if rule.sign > 0 else y < 0)]
    if not wanted:
        raise ConfigError(f"energy closure infeasible: no root with sign {rule.sign:+d} (roots {roots})")
    x[k] = max(wanted, key=abs)
    return x


def _number(doc, key, errors, positive=True, integer=False):
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        errors.append(f"{key}: must be a finite number, got {v!r}")
        return None
    if integer and int(v) != v:
        errors.append(f"{key}: must be an integer, got {v!r}")
        return None
    if positive and v <= 0:
        errors.append(f"{key}: must be > 0, got {v!r}")
        return None
    return int(v) if integer else float(v)


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a JSON experiment description.

    Every violation found is reported together in one :class:`ConfigError`.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    errors: list[str] = []
    unknown = sorted(set(doc) - KNOWN_KEYS)
    if unknown:
        errors.append(f"unknown keys {unknown}")
    for key in ("system", "t_max"):
        if key not in doc:
            errors.append(f"missing field {key!r}")
    if "initial_state" not in doc:
        errors.append("missing field 'initial_state'")

    system_id = doc.get("system")
    if system_id is not None and system_id not in SYSTEM_IDS:
        errors.append(f"unknown system {system_id!r}; known: {sorted(SYSTEM_IDS)}")
        system_id = None

    params = doc.get("params", {})
    if not isinstance(params, dict) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in params.values()):
        errors.append("params: must map names to numbers")
        params = {}

    values = dict(DEFAULTS)
    values.update({k: doc[k] for k in DEFAULTS if k in doc})
    t_max = _number(doc, "t_max", errors) if "t_max" in doc else None
    dt = _number(values, "dt", errors)
    stride = _number(values, "sample_stride", errors, integer=True)
    workers = _number(values, "workers", errors, integer=True)
    renorm = _number(values, "renorm_every", errors, integer=True)
    nve_points = _number(values, "nve_points", errors, integer=True)
    if t_max is not None and dt is not None:
        if dt > t_max:
            errors.append(f"dt: {dt} exceeds t_max {t_max}")
        elif stride is not None and stride * dt > t_max * (1 + 1e-12):
            errors.append(f"sample_stride: stride*dt = {stride * dt:g} exceeds t_max {t_max}")

    mode = values["mode"]
    if mode not in MODES:
        errors.append(f"mode: must be one of {MODES}, got {mode!r}")
    output = values["output"]
    if not isinstance(output, str) or not output:
        errors.append("output: must be a non-empty path")

    sweep = None
    if "sweep" in doc:
        sw = doc["sweep"]
        if (not isinstance(sw, dict) or not isinstance(sw.get("param"), str)
                or not isinstance(sw.get("values"), list) or not sw["values"]
                or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in sw["values"])):
            errors.append("sweep: needs 'param' (string) and a non-empty numeric 'values' list")
        else:
            sweep = Sweep(sw["param"], tuple(float(v) for v in sw["values"]))
            if system_id is not None and sweep.param not in SYSTEM_IDS[system_id][1]:
                errors.append(f"sweep.param: system {system_id!r} has no parameter {sweep.param!r}")
    if mode == "sweep" and sweep is None and "sweep" not in doc:
        errors.append("sweep: required when mode is 'sweep'")

    closure = None
    if "energy_closure" in doc:
        ec = doc["energy_closure"]
        if (not isinstance(ec, dict) or not isinstance(ec.get("target"), (int, float))
                or "solve_for" not in ec or ec.get("sign", 1) not in (1, -1, "+", "-")):
            errors.append("energy_closure: needs numeric 'target', 'solve_for' and 'sign' in {+1, -1}")
        else:
            sign = ec.get("sign", 1)
            sign = {"+": 1, "-": -1}.get(sign, sign)
            closure = EnergyClosure(float(ec["target"]), ec["solve_for"], int(sign))

    sys = None
    if system_id is not None and not any(e.startswith("params") for e in errors):
        try:
            sys = make_system(system_id, params)
        except ConfigError as exc:
            errors.extend(exc.errors)

    x0 = None
    if "initial_state" in doc:
        raw = doc["initial_state"]
        if not isinstance(raw, list):
            errors.append("initial_state: must be an array")
        else:
            solved = None
            if closure is not None and sys is not None:
                try:
                    solved = sys.coordinate_index(closure.solve_for)
                except LyapflowError as exc:
                    errors.append(f"energy_closure.solve_for: {exc}")
            ok = True
            vals = []
            for i, v in enumerate(raw):
                if v is None and i == solved:
                    vals.append(0.0)
                elif isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v):
                    vals.append(float(v))
                else:
                    ok = False
            if not ok:
                errors.append("initial_state: entries must be finite numbers (null only for the closure coordinate)")
            elif sys is not None and len(vals) != sys.dim:
                errors.append(f"initial_state: dimension mismatch, got {len(vals)} entries for a "
                              f"{sys.dim}-dimensional system")
            else:
                x0 = np.array(vals)
    if closure is not None and sys is not None and x0 is not None and not errors:
        try:
            x0 = solve_energy_closure(sys, x0, closure)
        except ConfigError as exc:
            errors.extend(exc.errors)

    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(
        system=system_id, params={k: float(v) for k, v in params.items()},
        initial_state=tuple(float(v) for v in x0), t_max=t_max, dt=dt, sample_stride=stride,
        mode=mode, output_path=output, energy_closure=closure, sweep=sweep, workers=workers,
        renorm_every=renorm, nve_points=nve_points,
    )
