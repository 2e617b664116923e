"""Projection of variations onto the normal bundle of the flow.

All covariant derivatives reduce to chart derivatives because the metric is
constant (flat connection, zero curvature). The unit field is ``V = W / |W|``
so the natural parameter ``s`` is arclength, ``ds = |W| dt``. In that
parameter

    A = dV/du = h J / |W|,      dV/ds = A V,      h = 1 - V (x) upsilon,

where ``J = dW/du`` and ``upsilon = <V, .> / <V, V>``. Generators can be
returned per unit ``s`` (``parametrization="arclength"``) or per unit ``t``
(``"time"``, the default), the latter being ``|W|`` times the former.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapabilityError, ContractViolation, DegenerateContextError, PreconditionError
from .integrator import CoupledState, IntegratorConfig, integrate
from .operators import MetricTensor, adjoint, hermitian_split
from .systems import StatePoint, SystemDefinition, coords_of

FIXED_POINT_TOL = 1e-12
ORTHOGONALITY_TOL = 1e-10
PARAMETRIZATIONS = ("time", "arclength")


@dataclass(frozen=True, eq=False)
class ProjectionContext:
    """Per-point data for projecting along the flow direction.

    ``A`` is ``dV/du``; ``J`` the raw Jacobian ``dW/du``; ``speed`` is ``|W|``.
    """

    point: StatePoint
    W: np.ndarray
    V: np.ndarray
    norm_factor: float
    Vdot: np.ndarray
    upsilon: np.ndarray
    speed: float
    J: np.ndarray
    A: np.ndarray
    metric: MetricTensor


@dataclass(frozen=True)
class VariationState:
    z1: np.ndarray
    z2: np.ndarray | None = None

    def __post_init__(self):
        z1 = np.array(self.z1, dtype=float)
        if not np.all(np.isfinite(z1)):
            raise ContractViolation("variation z1 must be finite")
        object.__setattr__(self, "z1", z1)
        if self.z2 is not None:
            z2 = np.array(self.z2, dtype=float)
            if not np.all(np.isfinite(z2)) or z2.shape != z1.shape:
                raise ContractViolation("variation z2 must be finite and match z1")
            object.__setattr__(self, "z2", z2)


@dataclass(frozen=True)
class RaychaudhuriSample:
    s: float
    vartheta: float
    sigma_sq: float
    omega_sq: float
    accel_div: float
    curvature_term: float = 0.0


def _check_mode(parametrization: str):
    if parametrization not in PARAMETRIZATIONS:
        raise ContractViolation(f"parametrization must be one of {PARAMETRIZATIONS}, got {parametrization!r}")


def make_context(sys: SystemDefinition, p) -> ProjectionContext:
    u = coords_of(p)
    point = p if isinstance(p, StatePoint) else StatePoint(u)
    g = sys.metric
    W = sys.field(u)
    speed = float(np.sqrt(max(g.inner(W, W), 0.0)))
    if not speed > FIXED_POINT_TOL:
        raise DegenerateContextError(f"fixed point at {u}: |W| = {speed:.3e}, projector undefined")
    V = W / speed
    vv = g.inner(V, V)
    upsilon = g.flat(V) / vv
    J = sys.jacobian(u)
    A = (np.eye(sys.dim) - np.outer(V, upsilon)) @ J / speed
    return ProjectionContext(
        point=point, W=W, V=V, norm_factor=1.0 / vv, Vdot=A @ V, upsilon=upsilon,
        speed=speed, J=J, A=A, metric=g,
    )


def normal_projector(ctx: ProjectionContext) -> np.ndarray:
    """``h = 1 - upsilon (x) V``: kills ``V`` and maps onto its orthogonal complement."""
    return np.eye(len(ctx.V)) - np.outer(ctx.V, ctx.upsilon)


def fermi_apply(ctx: ProjectionContext, X, Xdot) -> np.ndarray:
    """Fermi derivative ``DX/ds - N<V,X> Vdot + N<Vdot,X> V`` given ``DX/ds = Xdot``."""
    g, N = ctx.metric, ctx.norm_factor
    X = np.asarray(X, dtype=float)
    return np.asarray(Xdot, dtype=float) - N * g.inner(ctx.V, X) * ctx.Vdot + N * g.inner(ctx.Vdot, X) * ctx.V


def projected_ve_generator(sys: SystemDefinition, ctx: ProjectionContext,
                           parametrization: str = "time") -> np.ndarray:
    """Operator ``G`` of the projected VE ``D(hZ)/ds = A(hZ) - N<Vdot, hZ> V``.

    ``G`` already contains the projection, so ``G h = G``.
    """
    _check_mode(parametrization)
    h = normal_projector(ctx)
    G = ctx.A @ h - ctx.norm_factor * np.outer(ctx.V, ctx.metric.flat(ctx.Vdot)) @ h
    return ctx.speed * G if parametrization == "time" else G


def integral_gradient(sys: SystemDefinition, ctx: ProjectionContext, J_index: int = 0) -> np.ndarray:
    """``Y = sharp dJ`` for the ``J_index``-th registered first integral."""
    if not 0 <= J_index < len(sys.first_integrals):
        raise ContractViolation(
            f"system {sys.name!r} has {len(sys.first_integrals)} first integrals, index {J_index} requested")
    dJ = np.asarray(sys.first_integrals[J_index].gradient(ctx.point.coords), dtype=float)
    return ctx.metric.sharp(dJ)


def double_projector(sys: SystemDefinition, ctx: ProjectionContext, J_index: int = 0) -> np.ndarray:
    """Orthogonal projector onto the complement of ``span{V, Y}``."""
    Y = integral_gradient(sys, ctx, J_index)
    g = ctx.metric
    if not np.sqrt(g.inner(Y, Y)) > FIXED_POINT_TOL:
        raise DegenerateContextError(f"first integral {J_index} has vanishing gradient at {ctx.point.coords}")
    h = normal_projector(ctx)
    Yp = h @ Y
    yy = g.inner(Yp, Yp)
    if not yy > FIXED_POINT_TOL ** 2:
        raise DegenerateContextError("first-integral gradient is parallel to the flow")
    return h - np.outer(Yp, g.flat(Yp)) / yy


def nve_generator(sys: SystemDefinition, ctx: ProjectionContext, J_index: int = 0,
                  parametrization: str = "time") -> np.ndarray:
    """Generator of the normal variational equation on the level set of a first integral.

    Returns ``h A h`` (times ``|W|`` in time mode, where it equals ``h J h``).
    For normal variations tangent to the level set the correction term
    ``N<Vdot, Z> V`` drops out after projection, so only the normal part of
    ``A`` survives. ``V`` is an exact null direction. The gradient ``Y`` of the
    chosen first integral must not vanish.
    """
    _check_mode(parametrization)
    Y = integral_gradient(sys, ctx, J_index)
    if not np.sqrt(ctx.metric.inner(Y, Y)) > FIXED_POINT_TOL:
        raise DegenerateContextError(f"first integral {J_index} has vanishing gradient at {ctx.point.coords}")
    h = normal_projector(ctx)
    G = h @ ctx.A @ h
    return ctx.speed * G if parametrization == "time" else G


def hessian_along(H: np.ndarray, w) -> np.ndarray:
    """Contract the field Hessian with ``w`` on its first derivative slot."""
    return np.einsum("ijk,j->ik", H, np.asarray(w, dtype=float))


def vdot_gradient(sys: SystemDefinition, ctx: ProjectionContext) -> np.ndarray:
    """``d(Vdot)/du`` for ``Vdot = J W / rho^2 - beta W / rho^4``.

    Here ``rho^2 = <W, W>`` and ``beta = <W, J W>``.
    """
    g = ctx.metric.g
    W, J = ctx.W, ctx.J
    H = sys.hessian(ctx.point.coords)
    rho2 = ctx.speed ** 2
    c = J @ W
    b = J.T @ (g @ W)
    beta = float(W @ g @ c)
    dc = hessian_along(H, W) + J @ J
    dbeta = J.T @ (g @ c) + dc.T @ (g @ W)
    return (dc / rho2 - 2.0 * np.outer(c, b) / rho2 ** 2 - beta * J / rho2 ** 2
            - np.outer(W, dbeta) / rho2 ** 2 + 4.0 * beta * np.outer(W, b) / rho2 ** 3)


def deviation_phi(sys: SystemDefinition, ctx: ProjectionContext, Zp) -> np.ndarray:
    """Deviation operator ``Phi(Z) = h grad_Z Vdot - N<h Vdot, Z> h Vdot`` (zero curvature).

    ``Zp`` must be orthogonal to ``V``. The result is per unit arclength squared.
    """
    Zp = np.asarray(Zp, dtype=float)
    g = ctx.metric
    par = g.inner(ctx.V, Zp)
    if abs(par) > ORTHOGONALITY_TOL * max(1.0, np.sqrt(abs(g.inner(Zp, Zp)))):
        raise PreconditionError(f"variation is not orthogonal to the flow (<V,Z> = {par:.3e})")
    h = normal_projector(ctx)
    hVdot = h @ ctx.Vdot
    return h @ (vdot_gradient(sys, ctx) @ Zp) - ctx.norm_factor * g.inner(hVdot, Zp) * hVdot


def adjoint_ve_generator(sys: SystemDefinition, p, parametrization: str = "time") -> np.ndarray:
    """``-A^dagger``: the equation solved by gradients of first integrals.

    In time mode ``A`` is the Jacobian ``dW/du``; in arclength mode ``dV/du``.
    """
    _check_mode(parametrization)
    if parametrization == "time":
        A = sys.jacobian(p)
    else:
        A = make_context(sys, p).A
    return -adjoint(A, sys.metric)


def hve_rhs(sys: SystemDefinition, p, var: VariationState, order: int = 1) -> np.ndarray:
    """Right-hand side of the order-1 or order-2 variational equation in time.

    ``u1' = J u1`` and ``u2' = H(u1, u1) + J u2``.
    """
    J = sys.jacobian(p)
    if order == 1:
        return J @ var.z1
    if order == 2:
        if sys.hessian_kernel is None:
            raise CapabilityError(f"system {sys.name!r} has no Hessian; order-2 variations unavailable")
        if var.z2 is None:
            raise ContractViolation("order-2 variations need z2")
        H = sys.hessian(p)
        return np.einsum("ijk,j,k->i", H, var.z1, var.z1) + J @ var.z2
    raise ContractViolation(f"order must be 1 or 2, got {order}")


def raychaudhuri_sample(sys: SystemDefinition, ctx: ProjectionContext, s: float = 0.0) -> RaychaudhuriSample:
    """Expansion, shear and rotation of the normal part of ``A`` at one point.

    The trace ``vartheta`` runs over the ``N - 1`` normal directions.
    """
    h = normal_projector(ctx)
    Ap = h @ ctx.A @ h
    theta, omega = hermitian_split(Ap, ctx.metric)
    n_normal = sys.dim - 1
    vartheta = float(np.trace(theta))
    sigma = theta - vartheta / n_normal * h
    return RaychaudhuriSample(
        s=float(s),
        vartheta=vartheta,
        sigma_sq=float(np.trace(sigma @ sigma)),
        omega_sq=float(np.trace(omega @ omega)),
        accel_div=float(np.trace(vdot_gradient(sys, ctx))),
        curvature_term=0.0,
    )


def raychaudhuri_rhs(sample: RaychaudhuriSample, dim: int) -> float:
    n = dim - 1
    return (sample.curvature_term - sample.omega_sq - sample.sigma_sq
            - sample.vartheta ** 2 / n + sample.accel_div)


def raychaudhuri_residual(sys: SystemDefinition, trajectory_samples, step: float) -> float:
    """Max residual of the expansion law, with ``d vartheta / ds`` by central differences.

    ``trajectory_samples`` is a sequence of ``(StatePoint, ProjectionContext)``
    equally spaced by ``step`` in arclength.
    """
    if len(trajectory_samples) < 5:
        raise PreconditionError(f"need at least 5 samples, got {len(trajectory_samples)}")
    if not step > 0:
        raise ContractViolation("step must be > 0")
    samples = [raychaudhuri_sample(sys, ctx, i * step) for i, (_, ctx) in enumerate(trajectory_samples)]
    vt = np.array([s.vartheta for s in samples])
    dvt = (vt[2:] - vt[:-2]) / (2.0 * step)
    rhs = np.array([raychaudhuri_rhs(s, sys.dim) for s in samples[1:-1]])
    return float(np.max(np.abs(dvt - rhs)))


def arclength_trajectory(sys: SystemDefinition, x0, n_samples: int, ds: float):
    """RK4 samples of ``du/ds = W / |W|`` at spacing ``ds``, paired with their contexts."""
    if n_samples < 2:
        raise ContractViolation("need at least 2 samples")
    g = sys.metric

    def rhs(st, s):
        W = sys.field(st.x)
        return {"point": W / np.sqrt(g.inner(W, W))}

    start = StatePoint(coords_of(x0))
    out = [(start, make_context(sys, start))]

    def keep(step, s, st):
        pt = StatePoint(st.x, s)
        out.append((pt, make_context(sys, pt)))

    cfg = IntegratorConfig(dt=ds, t_max=ds * (n_samples - 1), sample_stride=1)
    integrate(rhs, CoupledState(start), cfg, on_sample=keep)
    return out
