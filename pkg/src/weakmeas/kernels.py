"""Hot numeric kernels, each with a numba and a pure-numpy implementation.

The public functions dispatch on :func:`weakmeas._backend.get_backend`. All
kernels are pure: inputs are never modified and every output cell is computed
from a fixed-order summation, so results do not depend on evaluation order.

Quadrature weights are supplied by the callers; the kernels only evaluate the
sums.
"""

from __future__ import annotations

import numpy as np

from ._backend import get_backend, njit, prange

# exponent below which a Gaussian factor is treated as exactly zero
_EXP_CUTOFF = 45.0


# ---------------------------------------------------------------------------
# Gabor analysis:  F[i, j] = sum_x w_x exp(-c (x - a1_i)^2) exp(-i kappa a2_j (x - k a1_i)) f_x
# ---------------------------------------------------------------------------


def _gabor_analysis_numpy(f, x, w, a1, a2, c, kappa, k):
    envelope = np.exp(-c * (x[None, :] - a1[:, None]) ** 2) * (w * f)[None, :]
    plane = np.exp(-1j * kappa * np.outer(x, a2))
    out = envelope @ plane
    out *= np.exp(1j * kappa * k * np.outer(a1, a2))
    return out


@njit(parallel=True, cache=True)
def _gabor_analysis_numba(f, x, w, a1, a2, c, kappa, k):
    # x is ascending: each row only touches the window where the envelope is nonzero
    n1 = a1.shape[0]
    n2 = a2.shape[0]
    nx = x.shape[0]
    plane = np.empty((nx, n2), dtype=np.complex128)
    for ix in range(nx):
        for j in range(n2):
            plane[ix, j] = np.exp(-1j * kappa * a2[j] * x[ix])
    wf = w * f
    reach = np.sqrt(_EXP_CUTOFF / c)
    out = np.zeros((n1, n2), dtype=np.complex128)
    for i in prange(n1):
        lo = np.searchsorted(x, a1[i] - reach)
        hi = np.searchsorted(x, a1[i] + reach)
        if hi <= lo:
            continue
        env = np.empty(hi - lo, dtype=np.complex128)
        for ix in range(lo, hi):
            env[ix - lo] = np.exp(-c * (x[ix] - a1[i]) ** 2) * wf[ix]
        row = np.dot(env, plane[lo:hi])
        for j in range(n2):
            out[i, j] = row[j] * np.exp(1j * kappa * k * a1[i] * a2[j])
    return out


def gabor_analysis(f, x, w, a1, a2, c=1.0, kappa=2.0, k=0.5):
    f = np.ascontiguousarray(f, dtype=np.complex128)
    x = np.ascontiguousarray(x, dtype=np.float64)
    w = np.broadcast_to(np.asarray(w, dtype=np.float64), x.shape).copy()
    a1 = np.ascontiguousarray(a1, dtype=np.float64)
    a2 = np.ascontiguousarray(a2, dtype=np.float64)
    if get_backend() == "numba":
        return _gabor_analysis_numba(f, x, w, a1, a2, float(c), float(kappa), float(k))
    return _gabor_analysis_numpy(f, x, w, a1, a2, c, kappa, k)


# ---------------------------------------------------------------------------
# Gabor synthesis:  f_x = sum_ij exp(-c (x - a1_i)^2) exp(i kappa a2_j (x - k a1_i)) H[i, j]
# ---------------------------------------------------------------------------


def _gabor_synthesis_numpy(h, a1, a2, x, c, kappa, k):
    twisted = h * np.exp(-1j * kappa * k * np.outer(a1, a2))
    partial = twisted @ np.exp(1j * kappa * np.outer(a2, x))
    envelope = np.exp(-c * (x[None, :] - a1[:, None]) ** 2)
    return np.sum(envelope * partial, axis=0)


@njit(parallel=True, cache=True)
def _gabor_synthesis_numba(h, a1, a2, x, c, kappa, k):
    n1 = a1.shape[0]
    n2 = a2.shape[0]
    nx = x.shape[0]
    twisted = np.empty((n1, n2), dtype=np.complex128)
    for i in range(n1):
        for j in range(n2):
            twisted[i, j] = h[i, j] * np.exp(-1j * kappa * k * a1[i] * a2[j])
    plane = np.empty((n2, nx), dtype=np.complex128)
    for j in range(n2):
        for ix in range(nx):
            plane[j, ix] = np.exp(1j * kappa * a2[j] * x[ix])
    partial = np.dot(twisted, plane)
    out = np.zeros(nx, dtype=np.complex128)
    for ix in prange(nx):
        s = 0j
        for i in range(n1):
            arg = c * (x[ix] - a1[i]) ** 2
            if arg < _EXP_CUTOFF:
                s += np.exp(-arg) * partial[i, ix]
        out[ix] = s
    return out


def gabor_synthesis(h, a1, a2, x, c=1.0, kappa=2.0, k=0.5):
    h = np.ascontiguousarray(h, dtype=np.complex128)
    a1 = np.ascontiguousarray(a1, dtype=np.float64)
    a2 = np.ascontiguousarray(a2, dtype=np.float64)
    x = np.ascontiguousarray(x, dtype=np.float64)
    if get_backend() == "numba":
        return _gabor_synthesis_numba(h, a1, a2, x, float(c), float(kappa), float(k))
    return _gabor_synthesis_numpy(h, a1, a2, x, c, kappa, k)


# ---------------------------------------------------------------------------
# Reproducing kernel of Gabor space (coherent-state overlap, k = 1/2 phase):
#   out[i, j] = sum_kl exp(-((a1_i-a1_k)^2 + (a2_j-a2_l)^2)/2 + i(a1_i a2_l - a2_j a1_k)) F[k, l]
# ---------------------------------------------------------------------------


def _reproducing_kernel_numpy(field, a1, a2):
    g1 = np.exp(-0.5 * (a1[:, None] - a1[None, :]) ** 2)
    g2 = np.exp(-0.5 * (a2[:, None] - a2[None, :]) ** 2)
    out = np.empty(field.shape, dtype=np.complex128)
    phase_cols = np.exp(-1j * np.outer(a2, a1))  # [j, k]
    for i in range(a1.shape[0]):
        # t[j, k] = sum_l g2[j, l] exp(i a1_i a2_l) F[k, l]
        t = (g2 * np.exp(1j * a1[i] * a2)[None, :]) @ field.T
        out[i] = np.sum(t * phase_cols * g1[i][None, :], axis=1)
    return out


@njit(parallel=True, cache=True)
def _reproducing_kernel_numba(field, a1, a2):
    n1 = a1.shape[0]
    n2 = a2.shape[0]
    g1 = np.empty((n1, n1))
    for i in range(n1):
        for kk in range(n1):
            g1[i, kk] = np.exp(-0.5 * (a1[i] - a1[kk]) ** 2)
    g2 = np.empty((n2, n2))
    for j in range(n2):
        for ll in range(n2):
            g2[j, ll] = np.exp(-0.5 * (a2[j] - a2[ll]) ** 2)
    cols = np.empty((n2, n1), dtype=np.complex128)
    for j in range(n2):
        for kk in range(n1):
            cols[j, kk] = np.exp(-1j * a2[j] * a1[kk])
    field_t = np.ascontiguousarray(field.T)
    out = np.empty((n1, n2), dtype=np.complex128)
    for i in prange(n1):
        m = np.empty((n2, n2), dtype=np.complex128)
        for ll in range(n2):
            ph = np.exp(1j * a1[i] * a2[ll])
            for j in range(n2):
                m[j, ll] = g2[j, ll] * ph
        t = np.dot(m, field_t)  # [j, k]
        for j in range(n2):
            acc = 0j
            for kk in range(n1):
                acc += g1[i, kk] * cols[j, kk] * t[j, kk]
            out[i, j] = acc
    return out


def reproducing_kernel(field, a1, a2):
    field = np.ascontiguousarray(field, dtype=np.complex128)
    a1 = np.ascontiguousarray(a1, dtype=np.float64)
    a2 = np.ascontiguousarray(a2, dtype=np.float64)
    if get_backend() == "numba":
        return _reproducing_kernel_numba(field, a1, a2)
    return _reproducing_kernel_numpy(field, a1, a2)


# ---------------------------------------------------------------------------
# Outcome density of a Gaussian-smeared two-detector Kraus kernel:
#   P[a, b] = dx * sum_x | sum_u psi_w[u] exp(-g1 (xm_a - (x+u)/2)^2 - g2 (x-u)^2) exp(-i kappa pm_b u) |^2
# psi_w carries the u-quadrature weight; u is the uniform grid u0 + j du.
# ---------------------------------------------------------------------------


def _smeared_density_numpy(psi_w, u0, du, x, dx, xm, pm, g1, g2, kappa):
    u = u0 + du * np.arange(psi_w.shape[0])
    plane = np.exp(-1j * kappa * np.outer(u, pm))
    x_col = x[:, None]
    pair = np.exp(-g2 * (x_col - u[None, :]) ** 2) * psi_w[None, :]
    mid = 0.5 * (x_col + u[None, :])
    out = np.empty((xm.shape[0], pm.shape[0]))
    for a in range(xm.shape[0]):
        amp = (np.exp(-g1 * (xm[a] - mid) ** 2) * pair) @ plane
        out[a] = dx * np.sum(amp.real ** 2 + amp.imag ** 2, axis=0)
    return out


@njit(parallel=True, cache=True)
def _smeared_density_numba(psi_w, u0, du, x, dx, xm, pm, g1, g2, kappa):
    # the kernel vanishes unless |x - u| and |xm - (x+u)/2| are both small, so
    # each outcome row only fills a band of the (x, u) matrix
    nu = psi_w.shape[0]
    nx = x.shape[0]
    nxm = xm.shape[0]
    npm = pm.shape[0]
    plane = np.empty((nu, npm), dtype=np.complex128)
    for iu in range(nu):
        for b in range(npm):
            plane[iu, b] = np.exp(-1j * kappa * pm[b] * (u0 + du * iu))
    reach2 = np.sqrt(_EXP_CUTOFF / g2)
    reach1 = np.sqrt(_EXP_CUTOFF / g1)
    out = np.empty((nxm, npm))
    for a in prange(nxm):
        x_lo = np.searchsorted(x, xm[a] - reach1 - 0.5 * reach2)
        x_hi = np.searchsorted(x, xm[a] + reach1 + 0.5 * reach2)
        u_lo = max(0, int(np.floor((x[x_lo] - reach2 - u0) / du))) if x_hi > x_lo else 0
        u_hi = min(nu, int(np.ceil((x[x_hi - 1] + reach2 - u0) / du)) + 1) if x_hi > x_lo else 0
        acc = np.zeros(npm)
        if x_hi > x_lo and u_hi > u_lo:
            w = np.zeros((x_hi - x_lo, u_hi - u_lo), dtype=np.complex128)
            for ix in range(x_lo, x_hi):
                for iu in range(u_lo, u_hi):
                    uu = u0 + du * iu
                    arg = g1 * (xm[a] - 0.5 * (x[ix] + uu)) ** 2 + g2 * (x[ix] - uu) ** 2
                    if arg < _EXP_CUTOFF:
                        w[ix - x_lo, iu - u_lo] = psi_w[iu] * np.exp(-arg)
            amp = np.dot(w, plane[u_lo:u_hi])
            for r in range(amp.shape[0]):
                for b in range(npm):
                    v = amp[r, b]
                    acc[b] += v.real * v.real + v.imag * v.imag
        for b in range(npm):
            out[a, b] = dx * acc[b]
    return out


def smeared_density(psi_w, u0, du, x, dx, xm, pm, g1, g2, kappa):
    psi_w = np.ascontiguousarray(psi_w, dtype=np.complex128)
    x = np.ascontiguousarray(x, dtype=np.float64)
    xm = np.ascontiguousarray(xm, dtype=np.float64)
    pm = np.ascontiguousarray(pm, dtype=np.float64)
    args = (float(u0), float(du), x, float(dx), xm, pm, float(g1), float(g2), float(kappa))
    if get_backend() == "numba":
        return _smeared_density_numba(psi_w, *args)
    return _smeared_density_numpy(psi_w, *args)


# ---------------------------------------------------------------------------
# Local cubic (4-point Lagrange) interpolation on a uniform grid; zero outside.
# ---------------------------------------------------------------------------


def _cubic_interp_numpy(values, x0, h, xq):
    n = values.shape[0]
    t = (xq - x0) / h
    base = np.floor(t).astype(np.int64)
    f = t - base
    weights = (
        -f * (f - 1.0) * (f - 2.0) / 6.0,
        (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0,
        -(f + 1.0) * f * (f - 2.0) / 2.0,
        (f + 1.0) * f * (f - 1.0) / 6.0,
    )
    out = np.zeros(xq.shape, dtype=np.complex128)
    for offset, wgt in zip((-1, 0, 1, 2), weights):
        idx = base + offset
        inside = (idx >= 0) & (idx < n)
        out[inside] += wgt[inside] * values[idx[inside]]
    return out


@njit(parallel=True, cache=True)
def _cubic_interp_numba(values, x0, h, xq):
    n = values.shape[0]
    flat = xq.ravel()
    out = np.zeros(flat.shape[0], dtype=np.complex128)
    for q in prange(flat.shape[0]):
        t = (flat[q] - x0) / h
        base = int(np.floor(t))
        f = t - base
        w0 = -f * (f - 1.0) * (f - 2.0) / 6.0
        w1 = (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0
        w2 = -(f + 1.0) * f * (f - 2.0) / 2.0
        w3 = (f + 1.0) * f * (f - 1.0) / 6.0
        s = 0j
        idx = base - 1
        if 0 <= idx < n:
            s += w0 * values[idx]
        idx = base
        if 0 <= idx < n:
            s += w1 * values[idx]
        idx = base + 1
        if 0 <= idx < n:
            s += w2 * values[idx]
        idx = base + 2
        if 0 <= idx < n:
            s += w3 * values[idx]
        out[q] = s
    return out.reshape(xq.shape)


def cubic_interp(values, x0, h, xq):
    values = np.ascontiguousarray(values, dtype=np.complex128)
    xq = np.ascontiguousarray(xq, dtype=np.float64)
    if get_backend() == "numba":
        return _cubic_interp_numba(values, float(x0), float(h), xq)
    return _cubic_interp_numpy(values, float(x0), float(h), xq)
