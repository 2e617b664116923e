"""Dynamical systems: vector field, derivatives and optional Hamiltonian structure.

Every built-in system is backed by numba kernels with the signature
``kernel(u, params)`` so that long integrations can run fully compiled. The
:class:`SystemDefinition` methods wrap those kernels for ordinary Python use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numba
import numpy as np

from .errors import CapabilityError, ConfigError, ContractViolation
from .operators import MetricTensor, adjoint


@dataclass(frozen=True)
class StatePoint:
    """Chart coordinates ``coords`` at parameter value ``time``."""

    coords: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        c = np.array(self.coords, dtype=float)
        if c.ndim != 1 or not np.all(np.isfinite(c)):
            raise ContractViolation("state coordinates must be a finite 1-d array")
        object.__setattr__(self, "coords", c)


def coords_of(p) -> np.ndarray:
    """Accept a :class:`StatePoint` or anything array-like."""
    if isinstance(p, StatePoint):
        return p.coords
    return np.asarray(p, dtype=float)


@dataclass(frozen=True, eq=False)
class FirstIntegral:
    """Scalar function constant along the flow, with its differential."""

    name: str
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray] | None = None


@dataclass(frozen=True, eq=False)
class SymplecticStructure:
    """Operator ``I`` with ``I^2 = -1`` and ``I† = -I``; ``omega_S(X, U) = <I X, U>``."""

    I: np.ndarray

    def __post_init__(self):
        I = np.array(self.I, dtype=float)
        n = I.shape[0]
        if I.shape != (n, n) or n % 2:
            raise ContractViolation("symplectic operator must be square with even dimension")
        object.__setattr__(self, "I", I)

    @classmethod
    def canonical(cls, dim: int) -> "SymplecticStructure":
        """``sum_i dp_i (x) d/dq_i - dq_i (x) d/dp_i`` for coordinates ``(q..., p...)``."""
        if dim % 2:
            raise ContractViolation("canonical symplectic structure needs even dimension")
        k = dim // 2
        I = np.zeros((dim, dim))
        I[:k, k:] = np.eye(k)
        I[k:, :k] = -np.eye(k)
        return cls(I)

    def defects(self, metric: MetricTensor | None = None) -> tuple[float, float]:
        n = len(self.I)
        square = np.max(np.abs(self.I @ self.I + np.eye(n)))
        skew = np.max(np.abs(adjoint(self.I, metric) + self.I))
        return float(square), float(skew)


@dataclass(frozen=True, eq=False)
class SystemDefinition:
    """An autonomous vector field ``W`` with analytic derivatives.

    ``hessian`` returns ``H[i, j, k] = d^2 W^i / du^j du^k``. ``first_integrals``
    lists conserved quantities; for Hamiltonian systems the Hamiltonian is the
    first entry.
    """

    name: str
    dim: int
    field_kernel: Callable
    jacobian_kernel: Callable
    params: np.ndarray = field(default_factory=lambda: np.zeros(0))
    hessian_kernel: Callable | None = None
    hamiltonian: FirstIntegral | None = None
    first_integrals: tuple[FirstIntegral, ...] = ()
    symplectic: SymplecticStructure | None = None
    last_multiplier: Callable[[np.ndarray], float] | None = None
    metric: MetricTensor | None = None
    coordinate_names: tuple[str, ...] = ()
    parameters: dict = field(default_factory=dict)
    box: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "params", np.ascontiguousarray(self.params, dtype=float))
        if self.metric is None:
            object.__setattr__(self, "metric", MetricTensor.euclidean(self.dim))
        elif self.metric.dim != self.dim:
            raise ContractViolation("metric dimension does not match system dimension")
        if not self.coordinate_names:
            names = tuple(f"u{i + 1}" for i in range(self.dim))
            object.__setattr__(self, "coordinate_names", names)
        if self.symplectic is not None and len(self.symplectic.I) != self.dim:
            raise ContractViolation("symplectic operator dimension does not match system")

    @property
    def jit(self) -> bool:
        """True when the kernels are numba dispatchers usable from compiled code."""
        return all(isinstance(k, numba.core.registry.CPUDispatcher)
                   for k in (self.field_kernel, self.jacobian_kernel))

    def field(self, p) -> np.ndarray:
        return np.asarray(self.field_kernel(coords_of(p), self.params), dtype=float)

    def jacobian(self, p) -> np.ndarray:
        return np.asarray(self.jacobian_kernel(coords_of(p), self.params), dtype=float)

    def hessian(self, p) -> np.ndarray:
        if self.hessian_kernel is None:
            raise CapabilityError(f"system {self.name!r} has no Hessian")
        return np.asarray(self.hessian_kernel(coords_of(p), self.params), dtype=float)

    def coordinate_index(self, name) -> int:
        if isinstance(name, (int, np.integer)):
            if not 0 <= name < self.dim:
                raise ContractViolation(f"coordinate index {name} out of range")
            return int(name)
        try:
            return self.coordinate_names.index(name)
        except ValueError:
            raise ContractViolation(
                f"unknown coordinate {name!r}; expected one of {self.coordinate_names}"
            ) from None


# --------------------------------------------------------------------------
# ABC flow

@numba.njit(cache=True)
def _abc_field(u, p):
    A, B, C = p[0], p[1], p[2]
    x, y, z = u[0], u[1], u[2]
    out = np.empty(3)
    out[0] = A * np.sin(z) + C * np.cos(y)
    out[1] = B * np.sin(x) + A * np.cos(z)
    out[2] = C * np.sin(y) + B * np.cos(x)
    return out


@numba.njit(cache=True)
def _abc_jacobian(u, p):
    A, B, C = p[0], p[1], p[2]
    x, y, z = u[0], u[1], u[2]
    J = np.zeros((3, 3))
    J[0, 1] = -C * np.sin(y)
    J[0, 2] = A * np.cos(z)
    J[1, 0] = B * np.cos(x)
    J[1, 2] = -A * np.sin(z)
    J[2, 0] = -B * np.sin(x)
    J[2, 1] = C * np.cos(y)
    return J


@numba.njit(cache=True)
def _abc_hessian(u, p):
    A, B, C = p[0], p[1], p[2]
    x, y, z = u[0], u[1], u[2]
    H = np.zeros((3, 3, 3))
    H[0, 1, 1] = -C * np.cos(y)
    H[0, 2, 2] = -A * np.sin(z)
    H[1, 0, 0] = -B * np.sin(x)
    H[1, 2, 2] = -A * np.cos(z)
    H[2, 0, 0] = -B * np.cos(x)
    H[2, 1, 1] = -C * np.sin(y)
    return H


def abc_flow(A: float = 1.0, B: float = 1.0, C: float = 0.0) -> SystemDefinition:
    """Arnold-Beltrami-Childress flow, volume preserving (last multiplier 1)."""
    return SystemDefinition(
        name="abc",
        dim=3,
        field_kernel=_abc_field,
        jacobian_kernel=_abc_jacobian,
        hessian_kernel=_abc_hessian,
        params=np.array([A, B, C], dtype=float),
        last_multiplier=lambda u: 1.0,
        coordinate_names=("x", "y", "z"),
        parameters={"A": float(A), "B": float(B), "C": float(C)},
    )


def abc_mu(A: float, C: float) -> float:
    """The ABC non-integrability parameter ``mu`` with ``mu^2 = C^2 / (2 A^2)``."""
    return abs(C) / (math.sqrt(2.0) * abs(A))


# --------------------------------------------------------------------------
# so(5) Gross-Neveu, coordinates (q1, q2, p1, p2)

@numba.njit(cache=True)
def _gn_im_field(u, p):
    s1, s2 = np.sin(u[0]), np.sin(u[1])
    c1, c2 = np.cos(u[0]), np.cos(u[1])
    out = np.empty(4)
    out[0] = u[2]
    out[1] = u[3]
    out[2] = -2.0 * s1 - 4.0 * s1 * c2
    out[3] = -2.0 * s2 - 4.0 * c1 * s2
    return out


@numba.njit(cache=True)
def _gn_im_jacobian(u, p):
    s1, s2 = np.sin(u[0]), np.sin(u[1])
    c1, c2 = np.cos(u[0]), np.cos(u[1])
    J = np.zeros((4, 4))
    J[0, 2] = 1.0
    J[1, 3] = 1.0
    J[2, 0] = -2.0 * c1 - 4.0 * c1 * c2
    J[2, 1] = 4.0 * s1 * s2
    J[3, 0] = 4.0 * s1 * s2
    J[3, 1] = -2.0 * c2 - 4.0 * c1 * c2
    return J


@numba.njit(cache=True)
def _gn_im_hessian(u, p):
    s1, s2 = np.sin(u[0]), np.sin(u[1])
    c1, c2 = np.cos(u[0]), np.cos(u[1])
    H = np.zeros((4, 4, 4))
    H[2, 0, 0] = 2.0 * s1 + 4.0 * s1 * c2
    H[2, 0, 1] = H[2, 1, 0] = 4.0 * c1 * s2
    H[2, 1, 1] = 4.0 * s1 * c2
    H[3, 0, 0] = 4.0 * c1 * s2
    H[3, 0, 1] = H[3, 1, 0] = 4.0 * s1 * c2
    H[3, 1, 1] = 2.0 * s2 + 4.0 * c1 * s2
    return H


def _gn_im_H(u):
    q1, q2, p1, p2 = u
    return 0.5 * (p1 * p1 + p2 * p2) - 2 * math.cos(q1) - 2 * math.cos(q2) - 4 * math.cos(q1) * math.cos(q2)


def _gn_im_dH(u):
    q1, q2, p1, p2 = u
    s1, s2, c1, c2 = math.sin(q1), math.sin(q2), math.cos(q1), math.cos(q2)
    return np.array([2 * s1 + 4 * s1 * c2, 2 * s2 + 4 * c1 * s2, p1, p2])


def _gn_im_d2H(u):
    q1, q2 = u[0], u[1]
    s1, s2, c1, c2 = math.sin(q1), math.sin(q2), math.cos(q1), math.cos(q2)
    H = np.eye(4)
    H[0, 0] = 2 * c1 + 4 * c1 * c2
    H[1, 1] = 2 * c2 + 4 * c1 * c2
    H[0, 1] = H[1, 0] = -4 * s1 * s2
    return H


@numba.njit(cache=True)
def _gn_re_field(u, p):
    s1, s2 = np.sinh(u[0]), np.sinh(u[1])
    c1, c2 = np.cosh(u[0]), np.cosh(u[1])
    out = np.empty(4)
    out[0] = -u[2]
    out[1] = -u[3]
    out[2] = 2.0 * s1 + 4.0 * s1 * c2
    out[3] = 2.0 * s2 + 4.0 * c1 * s2
    return out


@numba.njit(cache=True)
def _gn_re_jacobian(u, p):
    s1, s2 = np.sinh(u[0]), np.sinh(u[1])
    c1, c2 = np.cosh(u[0]), np.cosh(u[1])
    J = np.zeros((4, 4))
    J[0, 2] = -1.0
    J[1, 3] = -1.0
    J[2, 0] = 2.0 * c1 + 4.0 * c1 * c2
    J[2, 1] = 4.0 * s1 * s2
    J[3, 0] = 4.0 * s1 * s2
    J[3, 1] = 2.0 * c2 + 4.0 * c1 * c2
    return J


@numba.njit(cache=True)
def _gn_re_hessian(u, p):
    s1, s2 = np.sinh(u[0]), np.sinh(u[1])
    c1, c2 = np.cosh(u[0]), np.cosh(u[1])
    H = np.zeros((4, 4, 4))
    H[2, 0, 0] = 2.0 * s1 + 4.0 * s1 * c2
    H[2, 0, 1] = H[2, 1, 0] = 4.0 * c1 * s2
    H[2, 1, 1] = 4.0 * s1 * c2
    H[3, 0, 0] = 4.0 * c1 * s2
    H[3, 0, 1] = H[3, 1, 0] = 4.0 * s1 * c2
    H[3, 1, 1] = 2.0 * s2 + 4.0 * c1 * s2
    return H


def _gn_re_H(u):
    q1, q2, p1, p2 = u
    return -0.5 * (p1 * p1 + p2 * p2) - 2 * math.cosh(q1) - 2 * math.cosh(q2) - 4 * math.cosh(q1) * math.cosh(q2)


def _gn_re_dH(u):
    q1, q2, p1, p2 = u
    s1, s2, c1, c2 = math.sinh(q1), math.sinh(q2), math.cosh(q1), math.cosh(q2)
    return np.array([-2 * s1 - 4 * s1 * c2, -2 * s2 - 4 * c1 * s2, -p1, -p2])


def _gn_re_d2H(u):
    q1, q2 = u[0], u[1]
    s1, s2, c1, c2 = math.sinh(q1), math.sinh(q2), math.cosh(q1), math.cosh(q2)
    H = -np.eye(4)
    H[0, 0] = -2 * c1 - 4 * c1 * c2
    H[1, 1] = -2 * c2 - 4 * c1 * c2
    H[0, 1] = H[1, 0] = -4 * s1 * s2
    return H


def gross_neveu(domain: str = "imaginary") -> SystemDefinition:
    """so(5) Gross-Neveu Hamiltonian system in the imaginary or real domain.

    The imaginary domain uses ``H = (p1^2 + p2^2)/2 - 2 cos q1 - 2 cos q2 - 4 cos q1 cos q2``;
    the real domain ``H = -(p1^2 + p2^2)/2 - 2 cosh q1 - 2 cosh q2 - 4 cosh q1 cosh q2``
    with its field taken from Hamilton's canonical equations.
    """
    if domain == "imaginary":
        kernels = (_gn_im_field, _gn_im_jacobian, _gn_im_hessian)
        H = FirstIntegral("H", _gn_im_H, _gn_im_dH, _gn_im_d2H)
    elif domain == "real":
        kernels = (_gn_re_field, _gn_re_jacobian, _gn_re_hessian)
        H = FirstIntegral("H", _gn_re_H, _gn_re_dH, _gn_re_d2H)
    else:
        raise ContractViolation(f"domain must be 'imaginary' or 'real', got {domain!r}")
    return SystemDefinition(
        name=f"gross-neveu-{domain}",
        dim=4,
        field_kernel=kernels[0],
        jacobian_kernel=kernels[1],
        hessian_kernel=kernels[2],
        hamiltonian=H,
        first_integrals=(H,),
        symplectic=SymplecticStructure.canonical(4),
        last_multiplier=lambda u: 1.0,
        coordinate_names=("q1", "q2", "p1", "p2"),
        parameters={},
    )


# --------------------------------------------------------------------------
# FRW cosmology with conformally coupled scalar field

@numba.njit(cache=True)
def _frw_field(u, p):
    lam, k = p[0], 1.0 + p[1]
    q1, q2 = u[0], u[1]
    out = np.empty(4)
    out[0] = u[2]
    out[1] = u[3]
    out[2] = -lam * q1 * (q1 * q1 + q2 * q2 * k)
    out[3] = -lam * q2 * (q2 * q2 + q1 * q1 * k)
    return out


@numba.njit(cache=True)
def _frw_jacobian(u, p):
    lam, k = p[0], 1.0 + p[1]
    q1, q2 = u[0], u[1]
    J = np.zeros((4, 4))
    J[0, 2] = 1.0
    J[1, 3] = 1.0
    J[2, 0] = -lam * (3.0 * q1 * q1 + k * q2 * q2)
    J[2, 1] = -2.0 * lam * k * q1 * q2
    J[3, 0] = -2.0 * lam * k * q1 * q2
    J[3, 1] = -lam * (3.0 * q2 * q2 + k * q1 * q1)
    return J


@numba.njit(cache=True)
def _frw_hessian(u, p):
    lam, k = p[0], 1.0 + p[1]
    q1, q2 = u[0], u[1]
    H = np.zeros((4, 4, 4))
    H[2, 0, 0] = -6.0 * lam * q1
    H[2, 0, 1] = H[2, 1, 0] = -2.0 * lam * k * q2
    H[2, 1, 1] = -2.0 * lam * k * q1
    H[3, 0, 0] = -2.0 * lam * k * q2
    H[3, 0, 1] = H[3, 1, 0] = -2.0 * lam * k * q1
    H[3, 1, 1] = -6.0 * lam * q2
    return H


def frw(lam: float = 1.0, epsilon: float = 0.0) -> SystemDefinition:
    """FRW model with the quartic potential ``lam/4 (q1^4 + q2^4) + lam (1+eps)/2 q1^2 q2^2``.

    At ``epsilon = 0`` the potential is rotationally symmetric and the angular
    momentum ``J = q1 p2 - q2 p1`` is registered as a second first integral.
    """
    lam = float(lam)
    k = 1.0 + float(epsilon)

    def H(u):
        q1, q2, p1, p2 = u
        return 0.5 * (p1 * p1 + p2 * p2) + 0.25 * lam * (q1 ** 4 + q2 ** 4) + 0.5 * lam * k * q1 * q1 * q2 * q2

    def dH(u):
        q1, q2, p1, p2 = u
        return np.array([lam * q1 ** 3 + lam * k * q1 * q2 * q2, lam * q2 ** 3 + lam * k * q1 * q1 * q2, p1, p2])

    def d2H(u):
        q1, q2 = u[0], u[1]
        out = np.eye(4)
        out[0, 0] = lam * (3 * q1 * q1 + k * q2 * q2)
        out[1, 1] = lam * (3 * q2 * q2 + k * q1 * q1)
        out[0, 1] = out[1, 0] = 2 * lam * k * q1 * q2
        return out

    ham = FirstIntegral("H", H, dH, d2H)
    integrals = [ham]
    if epsilon == 0.0:
        d2J = np.zeros((4, 4))
        d2J[0, 3] = d2J[3, 0] = 1.0
        d2J[1, 2] = d2J[2, 1] = -1.0
        integrals.append(FirstIntegral(
            "J",
            lambda u: u[0] * u[3] - u[1] * u[2],
            lambda u: np.array([u[3], -u[2], -u[1], u[0]], dtype=float),
            lambda u: d2J.copy(),
        ))
    return SystemDefinition(
        name="frw",
        dim=4,
        field_kernel=_frw_field,
        jacobian_kernel=_frw_jacobian,
        hessian_kernel=_frw_hessian,
        params=np.array([lam, float(epsilon)]),
        hamiltonian=ham,
        first_integrals=tuple(integrals),
        symplectic=SymplecticStructure.canonical(4),
        last_multiplier=lambda u: 1.0,
        coordinate_names=("q1", "q2", "p1", "p2"),
        parameters={"lambda": lam, "epsilon": float(epsilon)},
    )


# --------------------------------------------------------------------------
# Linear systems (constant Jacobian)

@numba.njit(cache=True)
def _linear_field(u, p):
    n = u.shape[0]
    return p.reshape((n, n)) @ u


@numba.njit(cache=True)
def _linear_jacobian(u, p):
    n = u.shape[0]
    return p.reshape((n, n)).copy()


@numba.njit(cache=True)
def _linear_hessian(u, p):
    n = u.shape[0]
    return np.zeros((n, n, n))


def linear_system(M, name: str = "linear") -> SystemDefinition:
    """``du/dt = M u``; the fundamental matrix is ``expm(t M)``."""
    M = np.array(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ContractViolation("linear system matrix must be square")
    n = len(M)
    div = float(np.trace(M))
    return SystemDefinition(
        name=name,
        dim=n,
        field_kernel=_linear_field,
        jacobian_kernel=_linear_jacobian,
        hessian_kernel=_linear_hessian,
        params=M.ravel(),
        last_multiplier=(lambda u: 1.0) if div == 0.0 else None,
        parameters={"M": M.tolist()},
    )


def quadratic_hamiltonian(S) -> SystemDefinition:
    """Linear Hamiltonian system for ``H = u^T S u / 2`` in canonical coordinates."""
    S = np.array(S, dtype=float)
    S = 0.5 * (S + S.T)
    n = len(S)
    symp = SymplecticStructure.canonical(n)
    base = linear_system(symp.I @ S, name="quadratic-hamiltonian")
    ham = FirstIntegral(
        "H",
        lambda u: 0.5 * float(np.asarray(u) @ S @ np.asarray(u)),
        lambda u: S @ np.asarray(u, dtype=float),
        lambda u: S.copy(),
    )
    k = n // 2
    names = tuple(f"q{i + 1}" for i in range(k)) + tuple(f"p{i + 1}" for i in range(k))
    return SystemDefinition(
        name=base.name,
        dim=n,
        field_kernel=base.field_kernel,
        jacobian_kernel=base.jacobian_kernel,
        hessian_kernel=base.hessian_kernel,
        params=base.params,
        hamiltonian=ham,
        first_integrals=(ham,),
        symplectic=symp,
        last_multiplier=lambda u: 1.0,
        coordinate_names=names,
        parameters={"S": S.tolist()},
    )


def harmonic_oscillator(omega: float = 1.0) -> SystemDefinition:
    return quadratic_hamiltonian(np.diag([omega * omega, 1.0]))


# --------------------------------------------------------------------------
# Generic operations

def hamiltonian_field(H_grad, I, metric: MetricTensor | None = None) -> np.ndarray:
    """``I(sharp dH)``: the Hamiltonian vector field for the differential ``dH``."""
    dH = np.asarray(H_grad, dtype=float)
    Iop = I.I if isinstance(I, SymplecticStructure) else np.asarray(I, dtype=float)
    n = dH.shape[0]
    if n % 2:
        raise ContractViolation("Hamiltonian fields need an even-dimensional phase space")
    if Iop.shape != (n, n):
        raise ContractViolation(f"symplectic operator shape {Iop.shape} does not match gradient length {n}")
    grad = dH if metric is None else metric.sharp(dH)
    return Iop @ grad


def _central_gradient(f, u, h=1e-5):
    u = np.asarray(u, dtype=float)
    g = np.empty_like(u)
    for i in range(len(u)):
        e = np.zeros_like(u)
        e[i] = h
        g[i] = (f(u + e) - f(u - e)) / (2 * h)
    return g


def divergence(sys: SystemDefinition, p, alpha: Callable | None = None) -> float:
    """``tr(nabla(alpha W)) = alpha tr(dW/du) + d(alpha)(W)`` in the flat chart.

    The derivative of ``alpha`` is taken by central finite differences.
    """
    u = coords_of(p)
    trJ = float(np.trace(sys.jacobian(u)))
    if alpha is None:
        return trJ
    return float(alpha(u)) * trJ + float(_central_gradient(alpha, u) @ sys.field(u))


def _fd4(f, u, i, h):
    e = np.zeros_like(u)
    e[i] = h
    return (-f(u + 2 * e) + 8 * f(u + e) - 8 * f(u - e) + f(u - 2 * e)) / (12 * h)


def jacobian_check(sys: SystemDefinition, samples: int = 100, seed: int = 0,
                   box: float | None = None, h: float = 1e-3) -> float:
    """Worst relative gap between the analytic Jacobian and 4th-order central differences.

    Points are drawn uniformly from ``[-box, box]^dim``.
    """
    if samples < 1:
        raise ContractViolation("samples must be >= 1")
    rng = np.random.default_rng(seed)
    box = sys.box if box is None else box
    worst = 0.0
    for _ in range(samples):
        u = rng.uniform(-box, box, sys.dim)
        J = sys.jacobian(u)
        Jfd = np.column_stack([_fd4(sys.field, u, i, h) for i in range(sys.dim)])
        scale = max(np.max(np.abs(J)), np.finfo(float).eps)
        worst = max(worst, float(np.max(np.abs(J - Jfd)) / scale))
    return worst


def hessian_check(sys: SystemDefinition, samples: int = 100, seed: int = 0,
                  box: float | None = None, h: float = 1e-3) -> float:
    """Same as :func:`jacobian_check` but for the Hessian against differences of the Jacobian."""
    rng = np.random.default_rng(seed)
    box = sys.box if box is None else box
    worst = 0.0
    for _ in range(samples):
        u = rng.uniform(-box, box, sys.dim)
        H = sys.hessian(u)
        Hfd = np.stack([_fd4(sys.jacobian, u, k, h) for k in range(sys.dim)], axis=-1)
        scale = max(np.max(np.abs(H)), 1.0)
        worst = max(worst, float(np.max(np.abs(H - Hfd)) / scale))
    return worst


# --------------------------------------------------------------------------
# Registry used by the experiment runner

def _make_abc(params):
    A = params.get("A", 1.0)
    B = params.get("B", A)
    if "C" in params:
        C = params["C"]
    else:
        C = math.sqrt(2.0) * params.get("mu", 0.0) * A
    return abc_flow(A, B, C)


SYSTEM_IDS = {
    "abc": (_make_abc, ("A", "B", "C", "mu")),
    "gross-neveu-imaginary": (lambda params: gross_neveu("imaginary"), ()),
    "gross-neveu-real": (lambda params: gross_neveu("real"), ()),
    "frw": (lambda params: frw(params.get("lambda", 1.0), params.get("epsilon", 0.0)),
            ("lambda", "epsilon")),
}


def make_system(system_id: str, params: dict | None = None) -> SystemDefinition:
    """Build a built-in system from its string identifier and a flat parameter map.

    ABC accepts either ``C`` or ``mu`` (``C = sqrt(2) mu A``); ``B`` defaults to ``A``.
    """
    params = dict(params or {})
    try:
        factory, allowed = SYSTEM_IDS[system_id]
    except KeyError:
        raise ConfigError(f"unknown system {system_id!r}; known: {sorted(SYSTEM_IDS)}") from None
    unknown = sorted(set(params) - set(allowed))
    if unknown:
        raise ConfigError(f"system {system_id!r} does not take parameters {unknown}")
    if system_id == "abc" and "C" in params and "mu" in params:
        raise ConfigError("give either 'C' or 'mu' for the ABC flow, not both")
    return factory({k: float(v) for k, v in params.items()})
