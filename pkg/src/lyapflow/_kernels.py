"""Compiled RK4 drivers for long runs.

The drivers take the system kernels as first-class arguments. A constant
metric is handled by working in an orthonormal frame: with ``g = C^T C`` the
Jacobian becomes ``C J C^{-1}`` and every operator is symmetric in the plain
sense, so the Euclidean eigen-solver applies.
"""

from __future__ import annotations

import numba
import numpy as np

STATUS_OK = 0
STATUS_NONFINITE = 1
STATUS_DEGENERATE = 2


@numba.njit(cache=True)
def psi_nb(x):
    if abs(x) <= 1e-4:
        x2 = x * x
        return 1.0 + 0.5 * x + x2 / 12.0 - x2 * x2 / 720.0
    if x > 0.0:
        return x / (-np.expm1(-x))
    y = -x
    return y * np.exp(-y) / (-np.expm1(-y))


@numba.njit(cache=True)
def lyapunov_rhs_nb(L, A, s):
    """Right-hand side of the Lyapunov-operator equation in an orthonormal frame."""
    n = L.shape[0]
    theta = 0.5 * (A + A.T)
    lam, U = np.linalg.eigh(L)
    Bp = U.T @ theta @ U
    c = 2.0 * (s + 1.0)
    for k in range(n):
        for l in range(n):
            Bp[k, l] *= psi_nb(c * (lam[k] - lam[l]))
    return (U @ Bp @ U.T) / (s + 1.0) + (A @ L - L @ A) - L / (s + 1.0)


@numba.njit(cache=True)
def _frame_jac(jac, x, params, C, Cinv, euclid):
    J = jac(x, params)
    if euclid:
        return J
    return C @ J @ Cinv


@numba.njit(cache=True)
def _all_finite(a):
    for v in a.ravel():
        if not np.isfinite(v):
            return False
    return True


@numba.njit(cache=True)
def _n_steps(t_max, dt):
    n = int(np.ceil(t_max / dt * (1.0 - 1e-12)))
    return max(n, 1)


@numba.njit(cache=True)
def lyapunov_driver(field, jac, params, x0, L0, t_max, dt, stride, C, Cinv, euclid):
    """Co-integrate trajectory and Lyapunov operator with RK4.

    Returns ``(status, fail_step, times, spectra, points, x, L, max_defect)``.
    Row 0 of the sampled arrays holds the initial state; later rows are taken
    every ``stride`` steps and after the final step.
    """
    n = x0.shape[0]
    nsteps = _n_steps(t_max, dt)
    nsamp = 1 + nsteps // stride + (1 if nsteps % stride else 0)
    times = np.zeros(nsamp)
    spectra = np.zeros((nsamp, n))
    points = np.zeros((nsamp, n))
    x = x0.copy()
    L = L0.copy()
    spectra[0] = np.linalg.eigvalsh(L)[::-1]
    points[0] = x
    row = 1
    max_defect = 0.0
    t = 0.0
    for i in range(nsteps):
        h = min(dt, t_max - t)
        fail = (STATUS_NONFINITE, i, times[:row], spectra[:row], points[:row], x, L, max_defect)
        k1x = field(x, params)
        k1L = lyapunov_rhs_nb(L, _frame_jac(jac, x, params, C, Cinv, euclid), t)
        x2 = x + 0.5 * h * k1x
        L2 = L + 0.5 * h * k1L
        # stages are checked before the eigen-solver sees them
        if not (_all_finite(x2) and _all_finite(L2)):
            return fail
        k2x = field(x2, params)
        k2L = lyapunov_rhs_nb(L2, _frame_jac(jac, x2, params, C, Cinv, euclid), t + 0.5 * h)
        x3 = x + 0.5 * h * k2x
        L3 = L + 0.5 * h * k2L
        if not (_all_finite(x3) and _all_finite(L3)):
            return fail
        k3x = field(x3, params)
        k3L = lyapunov_rhs_nb(L3, _frame_jac(jac, x3, params, C, Cinv, euclid), t + 0.5 * h)
        x4 = x + h * k3x
        L4 = L + h * k3L
        if not (_all_finite(x4) and _all_finite(L4)):
            return fail
        k4x = field(x4, params)
        k4L = lyapunov_rhs_nb(L4, _frame_jac(jac, x4, params, C, Cinv, euclid), t + h)
        x = x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        L = L + (h / 6.0) * (k1L + 2.0 * k2L + 2.0 * k3L + k4L)
        d = np.max(np.abs(L - L.T))
        if d > max_defect:
            max_defect = d
        L = 0.5 * (L + L.T)
        t = (i + 1) * dt if i + 1 < nsteps else t_max
        if not (_all_finite(x) and _all_finite(L)):
            return (STATUS_NONFINITE, i, times[:row], spectra[:row], points[:row],
                    x, L, max_defect)
        if (i + 1) % stride == 0 or i + 1 == nsteps:
            times[row] = t
            spectra[row] = np.linalg.eigvalsh(L)[::-1]
            points[row] = x
            row += 1
    return STATUS_OK, -1, times, spectra, points, x, L, max_defect


@numba.njit(cache=True)
def tangent_driver(field, jac, params, x0, Q0, t_max, dt, renorm_every, C, Cinv, euclid):
    """RK4 for the trajectory plus a tangent frame ``Q' = J Q``.

    With ``renorm_every = 0`` the frame is the fundamental matrix (in the
    orthonormal frame when a metric is given). Otherwise it is re-orthonormalized
    by QR every ``renorm_every`` steps and ``log|R_ii|`` is accumulated.

    Returns ``(status, fail_step, x, Q, log_sums, t)``.
    """
    n = x0.shape[0]
    nsteps = _n_steps(t_max, dt)
    x = x0.copy()
    Q = Q0.copy()
    sums = np.zeros(n)
    t = 0.0
    for i in range(nsteps):
        h = min(dt, t_max - t)
        k1x = field(x, params)
        k1Q = _frame_jac(jac, x, params, C, Cinv, euclid) @ Q
        x2 = x + 0.5 * h * k1x
        Q2 = Q + 0.5 * h * k1Q
        k2x = field(x2, params)
        k2Q = _frame_jac(jac, x2, params, C, Cinv, euclid) @ Q2
        x3 = x + 0.5 * h * k2x
        Q3 = Q + 0.5 * h * k2Q
        k3x = field(x3, params)
        k3Q = _frame_jac(jac, x3, params, C, Cinv, euclid) @ Q3
        x4 = x + h * k3x
        Q4 = Q + h * k3Q
        k4x = field(x4, params)
        k4Q = _frame_jac(jac, x4, params, C, Cinv, euclid) @ Q4
        x = x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        Q = Q + (h / 6.0) * (k1Q + 2.0 * k2Q + 2.0 * k3Q + k4Q)
        t = (i + 1) * dt if i + 1 < nsteps else t_max
        if not (_all_finite(x) and _all_finite(Q)):
            return STATUS_NONFINITE, i, x, Q, sums, t
        if renorm_every > 0 and ((i + 1) % renorm_every == 0 or i + 1 == nsteps):
            Qn, R = np.linalg.qr(Q)
            for k in range(n):
                r = abs(R[k, k])
                if not (r > 0.0) or not np.isfinite(r):
                    return STATUS_DEGENERATE, i, x, Q, sums, t
                sums[k] += np.log(r)
            Q = np.ascontiguousarray(Qn)
    return STATUS_OK, -1, x, Q, sums, t


@numba.njit(cache=True)
def trajectory_driver(field, params, x0, t_max, dt, stride):
    """RK4 for the trajectory alone, sampled like :func:`lyapunov_driver`.

    Returns ``(status, fail_step, times, points)``.
    """
    n = x0.shape[0]
    nsteps = _n_steps(t_max, dt)
    nsamp = 1 + nsteps // stride + (1 if nsteps % stride else 0)
    times = np.zeros(nsamp)
    points = np.zeros((nsamp, n))
    x = x0.copy()
    points[0] = x
    row = 1
    t = 0.0
    for i in range(nsteps):
        h = min(dt, t_max - t)
        k1 = field(x, params)
        k2 = field(x + 0.5 * h * k1, params)
        k3 = field(x + 0.5 * h * k2, params)
        k4 = field(x + h * k3, params)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = (i + 1) * dt if i + 1 < nsteps else t_max
        if not _all_finite(x):
            return STATUS_NONFINITE, i, times[:row], points[:row]
        if (i + 1) % stride == 0 or i + 1 == nsteps:
            times[row] = t
            points[row] = x
            row += 1
    return STATUS_OK, -1, times, points
