"""Lyapunov spectra from the Lyapunov-operator equation and two oracle pathways.

The operator ``L`` satisfies ``F F^dagger = exp(2 (s + 1) L)`` and evolves by

    dL/ds = psi(2 (s + 1) Ad_L)(theta) / (s + 1) + [A, L] - L / (s + 1),

with ``theta`` the self-adjoint part of the Jacobian ``A``. Since ``F(0)`` is
the identity, ``L(0) = 0``. Its eigenvalues tend to the Lyapunov exponents.
Time ``t`` is used as the evolution parameter throughout this module.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import _kernels
from .errors import CapabilityError, ContractViolation, NumericalFailure, RangeError
from .integrator import CoupledState, IntegratorConfig, integrate, n_steps
from .operators import MetricTensor, adjoint, apply_psi_ad, commutator, eig_sym, hermitian_split
from .systems import StatePoint, SystemDefinition, coords_of

BACKENDS = ("auto", "python", "numba")
INITIAL_CONDITIONS = ("zero", "identity")
ENERGY_DRIFT_REL = 1e-4
F_RANGE_LIMIT = 1e150
CLAMP_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class LyapunovState:
    L: np.ndarray
    s: float
    point: StatePoint


@dataclass(frozen=True, eq=False)
class FundamentalState:
    F: np.ndarray
    s: float
    point: StatePoint
    metric: MetricTensor | None = None


@dataclass(eq=False)
class SpectrumSeries:
    """Sampled eigenvalues of ``L``, each row sorted descending.

    ``points`` holds the trajectory at the same samples; ``final_L`` the
    operator at ``t_max``.
    """

    times: np.ndarray
    spectra: np.ndarray
    points: np.ndarray
    final_L: np.ndarray
    metadata: dict = field(default_factory=dict)
    max_symmetry_defect: float = 0.0
    energy_drift: float | None = None

    def __post_init__(self):
        if len(self.times) != len(self.spectra) or len(self.times) != len(self.points):
            raise ContractViolation("times, spectra and points must have equal length")

    @property
    def inv_t(self) -> np.ndarray:
        """``1/t`` per sample; NaN marks the undefined value at ``t = 0``."""
        with np.errstate(divide="ignore"):
            return np.where(self.times > 0, 1.0 / np.where(self.times > 0, self.times, 1.0), np.nan)

    @property
    def final(self) -> np.ndarray:
        return self.spectra[-1]


def _resolve_backend(sys: SystemDefinition, backend: str) -> str:
    if backend not in BACKENDS:
        raise ContractViolation(f"backend must be one of {BACKENDS}, got {backend!r}")
    if backend == "auto":
        return "numba" if sys.jit else "python"
    if backend == "numba" and not sys.jit:
        raise CapabilityError(f"system {sys.name!r} has no compiled kernels")
    return backend


def _frame(metric: MetricTensor):
    """Cholesky factor and inverse mapping to an orthonormal frame."""
    if metric.is_euclidean:
        eye = np.eye(metric.dim)
        return eye, eye, True
    C = metric.cholesky()
    return C, np.linalg.inv(C), False


def _check_run_args(t_max, dt):
    if not (math.isfinite(t_max) and t_max > 0):
        raise ContractViolation(f"t_max must be > 0, got {t_max}")
    if not (math.isfinite(dt) and dt > 0):
        raise ContractViolation(f"dt must be > 0, got {dt}")
    if dt > t_max:
        raise ContractViolation(f"dt={dt} exceeds t_max={t_max}")


def lyapunov_rhs(sys: SystemDefinition, state: LyapunovState) -> np.ndarray:
    """Right-hand side of the Lyapunov-operator equation at ``state``."""
    g = sys.metric
    A = sys.jacobian(state.point)
    theta, _ = hermitian_split(A, g)
    s1 = state.s + 1.0
    return apply_psi_ad(state.L, theta, 2.0 * s1, g) / s1 + commutator(A, state.L) - state.L / s1


def _initial_L(dim: int, initial: str) -> np.ndarray:
    if initial not in INITIAL_CONDITIONS:
        raise ContractViolation(f"initial must be one of {INITIAL_CONDITIONS}, got {initial!r}")
    return np.zeros((dim, dim)) if initial == "zero" else np.eye(dim)


def _descending_eigs(L, g) -> np.ndarray:
    return eig_sym(L, g).eigenvalues[::-1].copy()


def _evolve_python(sys, x0, t_max, dt, stride, L0):
    g = sys.metric
    times, spectra, points = [0.0], [_descending_eigs(L0, g)], [x0.copy()]
    defect = [0.0]

    def rhs(st, t):
        return {"point": sys.field(st.x), "L": lyapunov_rhs(sys, LyapunovState(st["L"], t, st.point))}

    def symmetrize(st):
        L = st["L"]
        Ld = adjoint(L, g)
        defect[0] = max(defect[0], float(np.max(np.abs(L - Ld))))
        return CoupledState(st.point, {"L": 0.5 * (L + Ld)})

    def sample(step, t, st):
        times.append(t)
        spectra.append(_descending_eigs(st["L"], g))
        points.append(st.x.copy())

    cfg = IntegratorConfig(dt=dt, t_max=t_max, sample_stride=stride)
    res = integrate(rhs, CoupledState(StatePoint(x0), {"L": L0}), cfg, on_sample=sample, post_step=symmetrize)
    return np.array(times), np.array(spectra), np.array(points), res.state["L"], defect[0]


def _evolve_numba(sys, x0, t_max, dt, stride, L0):
    C, Cinv, euclid = _frame(sys.metric)
    L0f = C @ L0 @ Cinv
    try:
        out = _kernels.lyapunov_driver(sys.field_kernel, sys.jacobian_kernel, sys.params, x0, L0f,
                                       float(t_max), float(dt), int(stride), C, Cinv, euclid)
    except (np.linalg.LinAlgError, ValueError, ZeroDivisionError) as exc:
        raise NumericalFailure(f"compiled integration failed: {exc}") from exc
    status, fail_step, times, spectra, points, x, L, defect = out
    if status != _kernels.STATUS_OK:
        t_fail = (fail_step + 1) * dt
        raise NumericalFailure(f"trajectory diverged: non-finite state at step {fail_step + 1} (t={t_fail:.6g})")
    return times, spectra, points, Cinv @ L @ C, float(defect)


def evolve_spectrum(sys: SystemDefinition, x0, t_max: float, dt: float = 1e-2,
                    sample_stride: int = 100, backend: str = "auto",
                    initial: str = "zero") -> SpectrumSeries:
    """Co-integrate the trajectory and ``L`` with RK4 and sample the spectrum.

    ``L`` is re-symmetrized after every step. The first row of the series is
    the initial state at ``t = 0``; further rows follow every
    ``sample_stride`` steps plus the final step. ``initial="identity"``
    reproduces the alternative starting value ``L(0) = 1`` for comparison only.
    For Hamiltonian systems the energy drift over the samples is recorded and a
    warning raised when it exceeds ``1e-4 max(1, |H(0)|)``.
    """
    _check_run_args(t_max, dt)
    if int(sample_stride) != sample_stride or sample_stride < 1:
        raise ContractViolation(f"sample_stride must be a positive integer, got {sample_stride}")
    x0 = np.array(coords_of(x0), dtype=float)
    if x0.shape != (sys.dim,):
        raise ContractViolation(f"initial state has length {x0.size}, system dimension is {sys.dim}")
    L0 = _initial_L(sys.dim, initial)
    mode = _resolve_backend(sys, backend)
    run = _evolve_numba if mode == "numba" else _evolve_python
    times, spectra, points, L, defect = run(sys, x0, float(t_max), float(dt), int(sample_stride), L0)
    series = SpectrumSeries(
        times=times, spectra=spectra, points=points, final_L=L, max_symmetry_defect=defect,
        metadata={
            "system": sys.name, "parameters": dict(sys.parameters), "x0": x0.tolist(),
            "t_max": float(t_max), "dt": float(dt), "sample_stride": int(sample_stride),
            "steps": n_steps(t_max, dt), "backend": mode, "initial": initial,
        },
    )
    if sys.hamiltonian is not None:
        H = np.array([sys.hamiltonian.value(p) for p in points])
        drift = float(np.max(np.abs(H - H[0])))
        series.energy_drift = drift
        if drift > ENERGY_DRIFT_REL * max(1.0, abs(H[0])):
            warnings.warn(f"energy drift {drift:.3e} exceeds {ENERGY_DRIFT_REL:g} relative", RuntimeWarning,
                          stacklevel=2)
    return series


def _tangent_python(sys, x0, t_max, dt, Q0, renorm_every):
    C, Cinv, euclid = _frame(sys.metric)
    sums = np.zeros(sys.dim)

    def rhs(st, t):
        J = sys.jacobian(st.x)
        return {"point": sys.field(st.x), "Q": (J if euclid else C @ J @ Cinv) @ st["Q"]}

    nsteps = n_steps(t_max, dt)
    counter = [0]

    def renorm(st):
        counter[0] += 1
        if renorm_every and (counter[0] % renorm_every == 0 or counter[0] == nsteps):
            Q, R = np.linalg.qr(st["Q"])
            r = np.abs(np.diag(R))
            if not np.all(r > 0):
                raise NumericalFailure(f"tangent frame degenerated at step {counter[0]}")
            sums[:] += np.log(r)
            return CoupledState(st.point, {"Q": Q})
        return st

    cfg = IntegratorConfig(dt=dt, t_max=t_max)
    res = integrate(rhs, CoupledState(StatePoint(x0), {"Q": Q0}), cfg, post_step=renorm)
    return res.state.x, res.state["Q"], sums


def _tangent_numba(sys, x0, t_max, dt, Q0, renorm_every):
    C, Cinv, euclid = _frame(sys.metric)
    status, fail_step, x, Q, sums, _ = _kernels.tangent_driver(
        sys.field_kernel, sys.jacobian_kernel, sys.params, x0, Q0, float(t_max), float(dt),
        int(renorm_every), C, Cinv, euclid)
    if status == _kernels.STATUS_NONFINITE:
        raise NumericalFailure(f"non-finite tangent state at step {fail_step + 1} (t={(fail_step + 1) * dt:.6g})")
    if status == _kernels.STATUS_DEGENERATE:
        raise NumericalFailure(f"tangent frame degenerated at step {fail_step + 1}")
    return x, Q, sums


def fundamental_matrix(sys: SystemDefinition, x0, t: float, dt: float = 1e-3,
                       backend: str = "auto") -> FundamentalState:
    """RK4 for ``dF/dt = A F`` with ``F(0) = 1`` along the trajectory from ``x0``.

    Entries growing past ``1e150`` raise :class:`RangeError`; use
    :func:`qr_oracle` for long times.
    """
    _check_run_args(t, dt)
    x0 = np.array(coords_of(x0), dtype=float)
    mode = _resolve_backend(sys, backend)
    run = _tangent_numba if mode == "numba" else _tangent_python
    try:
        x, Fh, _ = run(sys, x0, float(t), float(dt), np.eye(sys.dim), 0)
    except NumericalFailure as exc:
        raise RangeError(f"fundamental matrix left the floating range ({exc}); use qr_oracle") from exc
    if np.max(np.abs(Fh)) > F_RANGE_LIMIT:
        raise RangeError("fundamental matrix entries exceed 1e150; use qr_oracle")
    C, Cinv, _ = _frame(sys.metric)
    return FundamentalState(Cinv @ Fh @ C, float(t), StatePoint(x, float(t)), sys.metric)


def exponents_from_F(fs: FundamentalState) -> np.ndarray:
    """Eigenvalues of ``log(F^dagger F) / (2 (s + 1))``, descending.

    Computed from singular values of ``F`` in an orthonormal frame, which avoids
    squaring the condition number. The eigenvalues of ``F^dagger F`` are the
    squared singular values.
    """
    F = np.asarray(fs.F, dtype=float)
    if not np.all(np.isfinite(F)):
        raise NumericalFailure("fundamental matrix has non-finite entries")
    if fs.s < 0:
        raise ContractViolation("s must be >= 0")
    metric = fs.metric or MetricTensor.euclidean(len(F))
    C, Cinv, _ = _frame(metric)
    sv = scipy.linalg.svdvals(C @ F @ Cinv)
    ev = sv * sv
    if np.any(ev <= 0):
        if np.min(ev) < -CLAMP_TOL:
            raise NumericalFailure("F^dagger F has a negative eigenvalue")
        warnings.warn("clamping vanishing eigenvalue of F^dagger F", RuntimeWarning, stacklevel=2)
        ev = np.maximum(ev, np.finfo(float).tiny)
    return np.sort(np.log(ev) / (2.0 * (fs.s + 1.0)))[::-1]


def qr_oracle(sys: SystemDefinition, x0, t_max: float, dt: float = 1e-2, renorm_every: int = 10,
              backend: str = "auto") -> np.ndarray:
    """Classical QR re-orthonormalization estimate of the spectrum, descending.

    A full tangent frame follows the VE and is re-orthonormalized (in the
    metric) every ``renorm_every`` steps; the exponents are the accumulated
    ``log |R_ii|`` divided by ``t_max``.
    """
    _check_run_args(t_max, dt)
    if int(renorm_every) != renorm_every or renorm_every < 1:
        raise ContractViolation(f"renorm_every must be a positive integer, got {renorm_every}")
    x0 = np.array(coords_of(x0), dtype=float)
    mode = _resolve_backend(sys, backend)
    run = _tangent_numba if mode == "numba" else _tangent_python
    _, _, sums = run(sys, x0, float(t_max), float(dt), np.eye(sys.dim), int(renorm_every))
    return np.sort(sums / t_max)[::-1]


def symplectic_defect(sys: SystemDefinition, fs: FundamentalState) -> float:
    """``max |F^dagger I F - I|``, zero for an exactly symplectic flow."""
    if sys.symplectic is None:
        raise CapabilityError(f"system {sys.name!r} has no symplectic structure")
    I = sys.symplectic.I
    return float(np.max(np.abs(adjoint(fs.F, sys.metric) @ I @ fs.F - I)))


def linear_spectrum_closed_form(M, t: float, method: str = "operator") -> np.ndarray:
    """Exact exponents at time ``t`` for ``du/dt = M u`` in the Euclidean metric.

    ``"operator"`` gives ``eig log(F F^T) / (2 (t + 1))`` with ``F = expm(t M)``,
    the value ``L`` takes; ``"qr"`` gives ``log |R_ii| / t`` from the QR
    factorization of ``F``, the value the QR oracle accumulates. ``F`` is formed
    in double precision, so keep ``t * spread(M)`` moderate.
    """
    M = np.asarray(M, dtype=float)
    F = scipy.linalg.expm(t * M)
    if method == "operator":
        sv = scipy.linalg.svdvals(F)
        return np.sort(np.log(sv) / (t + 1.0))[::-1]
    if method == "qr":
        R = np.linalg.qr(F, mode="r")
        return np.sort(np.log(np.abs(np.diag(R))) / t)[::-1]
    raise ContractViolation(f"method must be 'operator' or 'qr', got {method!r}")


def sample_trajectory(sys: SystemDefinition, x0, t_max: float, dt: float, sample_stride: int = 1,
                      backend: str = "auto") -> tuple[np.ndarray, np.ndarray]:
    """RK4 trajectory alone; returns ``(times, points)`` including ``t = 0``."""
    _check_run_args(t_max, dt)
    x0 = np.array(coords_of(x0), dtype=float)
    if _resolve_backend(sys, backend) == "numba":
        status, fail_step, times, points = _kernels.trajectory_driver(
            sys.field_kernel, sys.params, x0, float(t_max), float(dt), int(sample_stride))
        if status != _kernels.STATUS_OK:
            raise NumericalFailure(f"trajectory diverged at step {fail_step + 1} (t={(fail_step + 1) * dt:.6g})")
        return times, points
    times, points = [0.0], [x0]

    def keep(step, t, st):
        times.append(t)
        points.append(st.x.copy())

    cfg = IntegratorConfig(dt=dt, t_max=t_max, sample_stride=sample_stride)
    integrate(lambda st, t: {"point": sys.field(st.x)}, CoupledState(StatePoint(x0)), cfg, on_sample=keep)
    return np.array(times), np.array(points)
