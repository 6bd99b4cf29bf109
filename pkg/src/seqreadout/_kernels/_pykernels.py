"""Reference (numpy / pure Python) implementations of the hot kernels.

Signatures mirror ``_ckernels.pyx`` exactly so either backend can be
selected at import time.
"""
import math

import numpy as np

SQRT_HALF_PI = math.sqrt(math.pi / 2.0)

# Dormand-Prince 5(4) tableau
_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_E = (
    71 / 57600,
    0.0,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)


def _pump(t, g_max, sigma, t0, half_window):
    x = t - t0
    if abs(x) > half_window:
        return 0.0
    return g_max / math.cosh(SQRT_HALF_PI * x / sigma)


def _rhs(t, y, g_max, sigma, t0, half_window, kappa_r, kappa_b):
    r, b = y[0], y[1]
    g = _pump(t, g_max, sigma, t0, half_window)
    dr = -1j * g * b - 0.5 * kappa_r * r
    db = -1j * g * r - 0.5 * kappa_b * b
    return (
        dr,
        db,
        kappa_r * (r.real * r.real + r.imag * r.imag),
        kappa_b * (b.real * b.real + b.imag * b.imag),
    )


def beam_splitter_dp45(
    r0,
    g_max,
    sigma,
    t0,
    half_window,
    t_start,
    t_end,
    kappa_r,
    kappa_b,
    rtol,
    atol,
    t_eval,
    max_steps,
):
    """Integrate the release equations with an adaptive Dormand-Prince pair.

    Returns ``(samples, final, n_steps)`` where ``samples`` has shape
    ``(len(t_eval), 2)`` complex (r, b), and ``final`` is
    ``[r, b, loss_r, loss_b]`` with the loss channels accumulated as
    ``int kappa |x|^2 dt``.  ``n_steps`` is negative if ``max_steps`` was hit.
    """
    t_eval = np.asarray(t_eval, dtype=float)
    samples = np.zeros((t_eval.size, 2), dtype=complex)
    args = (g_max, sigma, t0, half_window, kappa_r, kappa_b)
    y = (complex(r0), 0j, 0.0, 0.0)
    t = float(t_start)
    span = t_end - t_start
    rate = g_max + 0.5 * (kappa_r + kappa_b) + 1.0 / sigma
    h = min(0.01 / rate, span) if span > 0 else 0.0
    k1 = _rhs(t, y, *args)
    i_eval = 0
    while i_eval < t_eval.size and t_eval[i_eval] <= t:
        samples[i_eval] = (y[0], y[1])
        i_eval += 1
    n_steps = 0
    while t < t_end:
        if n_steps >= max_steps:
            return samples, np.array(y, dtype=complex), -n_steps
        target = t_end if i_eval >= t_eval.size else min(t_end, t_eval[i_eval])
        hit = False
        if t + h >= target:
            h = target - t
            hit = True
        ks = [k1]
        for s in range(1, 7):
            a = _A[s]
            yi = tuple(
                y[j] + h * sum(a[q] * ks[q][j] for q in range(s)) for j in range(4)
            )
            ks.append(_rhs(t + _C[s] * h, yi, *args))
        y_new = yi  # stage 7 evaluates at the 5th-order solution (FSAL)
        err = 0.0
        for j in range(4):
            ej = h * sum(_E[q] * ks[q][j] for q in range(7))
            sc = atol + rtol * max(abs(y[j]), abs(y_new[j]))
            err += (abs(ej) / sc) ** 2
        err = math.sqrt(err / 4.0)
        if err <= 1.0:
            t = target if hit else t + h
            y = y_new
            k1 = ks[6]
            n_steps += 1
            while i_eval < t_eval.size and t_eval[i_eval] <= t + 1e-18:
                samples[i_eval] = (y[0], y[1])
                i_eval += 1
            fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
        else:
            fac = max(0.2, 0.9 * err ** -0.2)
        h = h * fac
        if not math.isfinite(h) or h <= 0.0:
            return samples, np.array(y, dtype=complex), -max(n_steps, 1)
    return samples, np.array(y, dtype=complex), n_steps


def wigner_iterative(rho, alphas):
    """W(alpha) for a density matrix, normalized so that the vacuum gives 2/pi."""
    rho = np.asarray(rho, dtype=complex)
    a = np.asarray(alphas, dtype=complex).ravel()
    n_dim = rho.shape[0]
    wl = [None] * n_dim
    wl[0] = np.exp(-2.0 * np.abs(a) ** 2) / np.pi
    w = rho[0, 0].real * wl[0].real
    for n in range(1, n_dim):
        wl[n] = 2.0 * a * wl[n - 1] / math.sqrt(n)
        w = w + 2.0 * np.real(rho[0, n] * wl[n])
    ac = np.conj(a)
    for m in range(1, n_dim):
        temp = wl[m]
        wl[m] = (2.0 * ac * temp - math.sqrt(m) * wl[m - 1]) / math.sqrt(m)
        w = w + np.real(rho[m, m] * wl[m])
        for n in range(m + 1, n_dim):
            temp2 = (2.0 * a * wl[n - 1] - math.sqrt(m) * temp) / math.sqrt(n)
            temp = wl[n]
            wl[n] = temp2
            w = w + 2.0 * np.real(rho[m, n] * wl[n])
    return 2.0 * np.real(w)


def husimi_amplitudes(psi, mus):
    """<mu|psi> for every mu, using Horner's rule in conj(mu)."""
    psi = np.asarray(psi, dtype=complex)
    mu = np.asarray(mus, dtype=complex).ravel()
    z = np.conj(mu)
    acc = np.full(mu.shape, psi[-1], dtype=complex)
    for n in range(psi.size - 2, -1, -1):
        acc = psi[n] + acc * z / math.sqrt(n + 1)
    return np.exp(-0.5 * np.abs(mu) ** 2) * acc


def hist2d_uniform(x, y, x0, dx, nx, y0, dy, ny):
    """Counts on a uniform grid; returns ``(counts[nx, ny], n_outside)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ix = np.floor((x - x0) / dx).astype(np.int64)
    iy = np.floor((y - y0) / dy).astype(np.int64)
    # right edge belongs to the last bin
    ix[(ix == nx) & (x <= x0 + nx * dx)] = nx - 1
    iy[(iy == ny) & (y <= y0 + ny * dy)] = ny - 1
    ok = (ix >= 0) & (ix < nx) & (iy >= 0) & (iy < ny)
    counts = np.bincount(ix[ok] * ny + iy[ok], minlength=nx * ny).reshape(nx, ny)
    return counts.astype(np.int64), int(x.size - ok.sum())
