"""Dense operator algebra on a tangent space carrying a constant metric.

Operators are plain ``(dim, dim)`` float arrays holding mixed-index
components, so ``A @ x`` applies the operator to the vector ``x``. The metric
enters only through adjoints, inner products and the eigen-decomposition of
self-adjoint operators.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ContractViolation, NumericalFailure, PreconditionError

PSI_TAYLOR_THRESHOLD = 1e-4
SELF_ADJOINT_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class MetricTensor:
    """Constant metric ``g`` in the working chart, with its inverse cached.

    The stored matrix is symmetrized on construction so symmetry holds exactly.
    """

    g: np.ndarray
    ginv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        g = np.array(self.g, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ContractViolation(f"metric must be square, got shape {g.shape}")
        if not np.all(np.isfinite(g)):
            raise ContractViolation("metric has non-finite entries")
        g = 0.5 * (g + g.T)
        try:
            ginv = np.linalg.inv(g)
        except np.linalg.LinAlgError as exc:
            raise ContractViolation("metric is singular") from exc
        ginv = 0.5 * (ginv + ginv.T)
        if np.max(np.abs(g @ ginv - np.eye(len(g)))) > 1e-12:
            raise ContractViolation("metric is too ill-conditioned to invert accurately")
        g.flags.writeable = False
        ginv.flags.writeable = False
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "ginv", ginv)

    @classmethod
    def euclidean(cls, dim: int) -> "MetricTensor":
        return cls(np.eye(dim))

    @property
    def dim(self) -> int:
        return self.g.shape[0]

    @property
    def is_euclidean(self) -> bool:
        return bool(np.array_equal(self.g, np.eye(self.dim)))

    def inner(self, x, y) -> float:
        return float(np.asarray(x) @ self.g @ np.asarray(y))

    def flat(self, x) -> np.ndarray:
        """Lower an index: vector -> covector."""
        return self.g @ np.asarray(x)

    def sharp(self, covector) -> np.ndarray:
        """Raise an index: covector -> vector."""
        return self.ginv @ np.asarray(covector)

    def cholesky(self) -> np.ndarray:
        """Upper factor ``C`` with ``g = C.T @ C`` (maps to an orthonormal frame)."""
        try:
            return np.linalg.cholesky(self.g).T
        except np.linalg.LinAlgError as exc:
            raise ContractViolation("metric is not positive definite") from exc


@dataclass(frozen=True, eq=False)
class SymmetricEigenSystem:
    """Ascending eigenvalues and metric-orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def _metric(g, dim: int) -> MetricTensor:
    if g is None:
        return MetricTensor.euclidean(dim)
    if not isinstance(g, MetricTensor):
        g = MetricTensor(g)
    if g.dim != dim:
        raise ContractViolation(f"metric dimension {g.dim} does not match operator dimension {dim}")
    return g


def _square(A, name="operator") -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ContractViolation(f"{name} must be square, got shape {A.shape}")
    return A


def adjoint(A, g: MetricTensor | None = None) -> np.ndarray:
    """Metric adjoint ``A†`` defined by ``<A† x, u> = <x, A u>``.

    In components this is ``g^{-1} A^T g``; for the Euclidean metric it is the
    plain transpose.
    """
    A = _square(A)
    g = _metric(g, len(A))
    if g.is_euclidean:
        return A.T.copy()
    return g.ginv @ A.T @ g.g


def hermitian_split(A, g: MetricTensor | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Split ``A`` into self-adjoint (expansion) and anti-self-adjoint (rotation) parts."""
    A = _square(A)
    Ad = adjoint(A, g)
    theta = 0.5 * (A + Ad)
    omega = A - theta
    return theta, omega


def psi(x):
    """``x / (1 - exp(-x))`` with its removable singularity filled, ``psi(0) = 1``.

    Works elementwise on arrays. Near zero the Taylor polynomial
    ``1 + x/2 + x^2/12 - x^4/720`` is used; exponentials are only ever taken
    of non-positive arguments so nothing overflows.
    """
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    small = ax <= PSI_TAYLOR_THRESHOLD
    safe = np.where(small, 1.0, ax)
    # psi(|x|) for the magnitude, then psi(-y) = y e^{-y} / (1 - e^{-y})
    denom = -np.expm1(-safe)
    pos = safe / denom
    neg = safe * np.exp(-safe) / denom
    x2 = x * x
    taylor = 1.0 + 0.5 * x + x2 / 12.0 - x2 * x2 / 720.0
    out = np.where(small, taylor, np.where(x > 0, pos, neg))
    return out if out.ndim else float(out)


def psi_scalar(x: float) -> float:
    return float(psi(float(x)))


def eig_sym(A, g: MetricTensor | None = None) -> SymmetricEigenSystem:
    """Eigen-decomposition of an operator self-adjoint with respect to ``g``."""
    A = _square(A)
    g = _metric(g, len(A))
    defect = np.max(np.abs(A - adjoint(A, g))) if A.size else 0.0
    if not defect <= SELF_ADJOINT_TOL:
        raise PreconditionError(f"operator is not self-adjoint (defect {defect:.3e})")
    try:
        if g.is_euclidean:
            lam, U = np.linalg.eigh(0.5 * (A + A.T))
        else:
            gA = g.g @ A
            lam, U = scipy.linalg.eigh(0.5 * (gA + gA.T), g.g)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise NumericalFailure(f"symmetric eigensolver did not converge: {exc}") from exc
    if not (np.all(np.isfinite(lam)) and np.all(np.isfinite(U))):
        raise NumericalFailure("symmetric eigensolver returned non-finite values")
    return SymmetricEigenSystem(lam, U)


def apply_psi_ad(L, B, c: float, g: MetricTensor | None = None) -> np.ndarray:
    """Evaluate ``psi(c * Ad_L)(B)`` where ``Ad_L(B) = L B - B L``.

    ``L`` is diagonalised as ``U diag(lam) U^{-1}``. In that basis ``Ad_L``
    multiplies entry ``(k, l)`` by ``lam_k - lam_l``, so the operator function
    reduces to an entrywise scaling by ``psi(c (lam_k - lam_l))``.
    """
    L = _square(L, "L")
    B = _square(B, "B")
    if B.shape != L.shape:
        raise ContractViolation(f"shape mismatch {L.shape} vs {B.shape}")
    if not np.isfinite(c):
        raise ContractViolation("scale c must be finite")
    g = _metric(g, len(L))
    es = eig_sym(L, g)
    U, lam = es.eigenvectors, es.eigenvalues
    Uinv = U.T if g.is_euclidean else U.T @ g.g
    Bp = Uinv @ B @ U
    Bp *= psi(c * (lam[:, None] - lam[None, :]))
    return U @ Bp @ Uinv


def operator_inner(A, B, g: MetricTensor | None = None) -> float:
    """Inner product ``tr(A† B)`` on the space of operators."""
    A = _square(A, "A")
    B = _square(B, "B")
    if A.shape != B.shape:
        raise ContractViolation(f"shape mismatch {A.shape} vs {B.shape}")
    return float(np.trace(adjoint(A, g) @ B))


def commutator(A, B) -> np.ndarray:
    return A @ B - B @ A
