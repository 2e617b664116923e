"""Fixed-step classical RK4 over heterogeneous coupled state."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import ContractViolation, NumericalFailure
from .systems import StatePoint


@dataclass(frozen=True, eq=False)
class CoupledState:
    """A trajectory point plus named vector or operator slots, kept in insertion order."""

    point: StatePoint
    extras: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.point, StatePoint):
            object.__setattr__(self, "point", StatePoint(self.point))
        if "point" in self.extras:
            raise ContractViolation("slot name 'point' is reserved")
        extras = {str(k): np.array(v, dtype=float) for k, v in self.extras.items()}
        if len(extras) != len(self.extras):
            raise ContractViolation("slot names must be unique")
        for name, v in extras.items():
            if v.ndim not in (1, 2):
                raise ContractViolation(f"slot {name!r} must be a vector or an operator")
        object.__setattr__(self, "extras", extras)

    @property
    def x(self) -> np.ndarray:
        return self.point.coords

    def __getitem__(self, name: str) -> np.ndarray:
        return self.extras[name]

    def slots(self):
        yield "point", self.point.coords
        yield from self.extras.items()

    def with_values(self, values: dict, time: float) -> "CoupledState":
        point = StatePoint(values["point"], time) if np.all(np.isfinite(values["point"])) \
            else _raw_point(values["point"], time)
        return CoupledState(point, {k: values[k] for k in self.extras})


def _raw_point(coords, time):
    # bypasses the finiteness check so failures can be reported with context
    p = object.__new__(StatePoint)
    object.__setattr__(p, "coords", np.asarray(coords, dtype=float))
    object.__setattr__(p, "time", time)
    return p


@dataclass(frozen=True)
class Monitor:
    """A named residual ``fn(state, t) -> float`` with a breach threshold on its magnitude."""

    name: str
    fn: Callable[[CoupledState, float], float]
    threshold: float


@dataclass(frozen=True)
class Breach:
    monitor: str
    step: int
    time: float
    value: float


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float
    t_max: float
    sample_stride: int = 1
    monitors: tuple[Monitor, ...] = ()

    def __post_init__(self):
        errors = []
        if not (math.isfinite(self.dt) and self.dt > 0):
            errors.append(f"dt must be > 0, got {self.dt}")
        if not (math.isfinite(self.t_max) and self.t_max > 0):
            errors.append(f"t_max must be > 0, got {self.t_max}")
        if int(self.sample_stride) != self.sample_stride or self.sample_stride < 1:
            errors.append(f"sample_stride must be a positive integer, got {self.sample_stride}")
        if not errors and self.dt > self.t_max:
            errors.append(f"dt={self.dt} exceeds t_max={self.t_max}")
        if not errors and self.sample_stride * self.dt > self.t_max * (1 + 1e-12):
            errors.append(f"sample_stride*dt={self.sample_stride * self.dt} exceeds t_max={self.t_max}")
        names = [m.name for m in self.monitors]
        if len(set(names)) != len(names):
            errors.append("monitor names must be unique")
        if errors:
            raise ContractViolation("; ".join(errors))
        object.__setattr__(self, "monitors", tuple(self.monitors))

    @property
    def n_steps(self) -> int:
        return n_steps(self.t_max, self.dt)


def n_steps(t_max: float, dt: float) -> int:
    """``ceil(t_max / dt)``, guarded against ratios that are integers up to rounding."""
    return max(int(math.ceil(t_max / dt * (1.0 - 1e-12))), 1)


@dataclass
class IntegrationResult:
    state: CoupledState
    t: float
    steps: int
    breaches: list[Breach]


Rhs = Callable[[CoupledState, float], Mapping[str, np.ndarray]]


def _values(st: CoupledState) -> dict:
    return dict(st.slots())


def _combine(base: dict, incr: Mapping, h: float) -> dict:
    return {k: base[k] + h * np.asarray(incr[k], dtype=float) for k in base}


def rk4_step(rhs: Rhs, st: CoupledState, t: float, dt: float) -> CoupledState:
    """One classical RK4 step.

    ``rhs(state, t)`` returns a mapping with the time derivative of every slot,
    including ``"point"`` for the trajectory.
    """
    if not (dt > 0):
        raise ContractViolation(f"dt must be > 0, got {dt}")
    y0 = _values(st)

    def eval_rhs(values, tt):
        k = rhs(st.with_values(values, tt), tt)
        missing = set(y0) - set(k)
        if missing:
            raise ContractViolation(f"rhs did not return slots {sorted(missing)}")
        for name in y0:
            if not np.all(np.isfinite(k[name])):
                raise NumericalFailure(f"non-finite increment in slot {name!r} at t={tt}")
        return k

    k1 = eval_rhs(y0, t)
    k2 = eval_rhs(_combine(y0, k1, 0.5 * dt), t + 0.5 * dt)
    k3 = eval_rhs(_combine(y0, k2, 0.5 * dt), t + 0.5 * dt)
    k4 = eval_rhs(_combine(y0, k3, dt), t + dt)
    out = {k: y0[k] + (dt / 6.0) * (np.asarray(k1[k]) + 2.0 * np.asarray(k2[k])
                                     + 2.0 * np.asarray(k3[k]) + np.asarray(k4[k]))
           for k in y0}
    for name, v in out.items():
        if not np.all(np.isfinite(v)):
            raise NumericalFailure(f"non-finite value in slot {name!r} after step at t={t}")
    return st.with_values(out, t + dt)


def integrate(rhs: Rhs, st0: CoupledState, cfg: IntegratorConfig,
              on_sample: Callable[[int, float, CoupledState], None] | None = None,
              post_step: Callable[[CoupledState], CoupledState] | None = None) -> IntegrationResult:
    """Step from ``t = 0`` to ``cfg.t_max`` with a shortened final step.

    ``on_sample`` and the monitors run every ``sample_stride`` steps and after
    the last step. A monitor breach is recorded and warned about, not raised.
    ``post_step`` may project the state after each step (e.g. re-symmetrize).
    """
    nsteps = cfg.n_steps
    st = st0
    t = 0.0
    breaches: list[Breach] = []
    for i in range(nsteps):
        h = min(cfg.dt, cfg.t_max - t)
        try:
            st = rk4_step(rhs, st, t, h)
        except NumericalFailure as exc:
            raise NumericalFailure(f"step {i} (t={t:.6g}): {exc}") from exc
        if post_step is not None:
            st = post_step(st)
        t = (i + 1) * cfg.dt if i + 1 < nsteps else cfg.t_max
        if (i + 1) % cfg.sample_stride == 0 or i + 1 == nsteps:
            for m in cfg.monitors:
                value = float(m.fn(st, t))
                if not abs(value) <= m.threshold:
                    breaches.append(Breach(m.name, i + 1, t, value))
                    warnings.warn(f"monitor {m.name!r} breached at t={t:.6g}: {value:.3e} > {m.threshold:.3e}",
                                  RuntimeWarning, stacklevel=2)
            if on_sample is not None:
                on_sample(i + 1, t, st)
    return IntegrationResult(st, t, nsteps, breaches)
