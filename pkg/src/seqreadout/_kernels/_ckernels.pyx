# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels; see ``_pykernels`` for the contract."""
import numpy as np
cimport numpy as cnp
from libc.math cimport cosh, exp, fabs, sqrt, floor, isfinite, pow

cnp.import_array()

cdef double SQRT_HALF_PI = 1.2533141373155003

cdef double C2 = 1.0 / 5, C3 = 3.0 / 10, C4 = 4.0 / 5, C5 = 8.0 / 9
cdef double A21 = 1.0 / 5
cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729
cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176, A65 = -5103.0 / 18656
cdef double A71 = 35.0 / 384, A73 = 500.0 / 1113, A74 = 125.0 / 192, A75 = -2187.0 / 6784, A76 = 11.0 / 84
cdef double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920, E5 = -17253.0 / 339200
cdef double E6 = 22.0 / 525, E7 = -1.0 / 40

# state layout: re r, im r, re b, im b, loss_r, loss_b


cdef inline double _pump(double t, double g_max, double sigma, double t0, double half_window) nogil:
    cdef double x = t - t0
    if fabs(x) > half_window:
        return 0.0
    return g_max / cosh(SQRT_HALF_PI * x / sigma)


cdef inline void _rhs(double t, double* y, double* out, double g_max, double sigma, double t0,
                      double half_window, double kr, double kb) nogil:
    cdef double g = _pump(t, g_max, sigma, t0, half_window)
    # dr = -i g b - kr/2 r ; db = -i g r - kb/2 b
    out[0] = g * y[3] - 0.5 * kr * y[0]
    out[1] = -g * y[2] - 0.5 * kr * y[1]
    out[2] = g * y[1] - 0.5 * kb * y[2]
    out[3] = -g * y[0] - 0.5 * kb * y[3]
    out[4] = kr * (y[0] * y[0] + y[1] * y[1])
    out[5] = kb * (y[2] * y[2] + y[3] * y[3])


def beam_splitter_dp45(r0, double g_max, double sigma, double t0, double half_window,
                       double t_start, double t_end, double kappa_r, double kappa_b,
                       double rtol, double atol, t_eval, long max_steps):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] te = np.ascontiguousarray(t_eval, dtype=np.float64)
    cdef Py_ssize_t n_eval = te.shape[0]
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] samples = np.zeros((n_eval, 2), dtype=np.complex128)
    cdef double y[6]
    cdef double yn[6]
    cdef double yi[6]
    cdef double k1[6]
    cdef double k2[6]
    cdef double k3[6]
    cdef double k4[6]
    cdef double k5[6]
    cdef double k6[6]
    cdef double k7[6]
    cdef double t = t_start, h, target, err, ej, sc, fac, rate
    cdef Py_ssize_t i_eval = 0, j
    cdef long n_steps = 0
    cdef bint hit
    cdef complex c0 = complex(r0)
    for j in range(6):
        y[j] = 0.0
    y[0] = c0.real
    y[1] = c0.imag
    rate = g_max + 0.5 * (kappa_r + kappa_b) + 1.0 / sigma
    h = 0.01 / rate
    if t_end - t_start < h:
        h = t_end - t_start
    _rhs(t, y, k1, g_max, sigma, t0, half_window, kappa_r, kappa_b)
    while i_eval < n_eval and te[i_eval] <= t:
        samples[i_eval, 0] = y[0] + 1j * y[1]
        samples[i_eval, 1] = y[2] + 1j * y[3]
        i_eval += 1
    while t < t_end:
        if n_steps >= max_steps:
            return samples, _final(y), -n_steps
        if i_eval >= n_eval:
            target = t_end
        else:
            target = te[i_eval] if te[i_eval] < t_end else t_end
        hit = False
        if t + h >= target:
            h = target - t
            hit = True
        for j in range(6):
            yi[j] = y[j] + h * A21 * k1[j]
        _rhs(t + C2 * h, yi, k2, g_max, sigma, t0, half_window, kappa_r, kappa_b)
        for j in range(6):
            yi[j] = y[j] + h * (A31 * k1[j] + A32 * k2[j])
        _rhs(t + C3 * h, yi, k3, g_max, sigma, t0, half_window, kappa_r, kappa_b)
        for j in range(6):
            yi[j] = y[j] + h * (A41 * k1[j] + A42 * k2[j] + A43 * k3[j])
        _rhs(t + C4 * h, yi, k4, g_max, sigma, t0, half_window, kappa_r, kappa_b)
        for j in range(6):
            yi[j] = y[j] + h * (A51 * k1[j] + A52 * k2[j] + A53 * k3[j] + A54 * k4[j])
        _rhs(t + C5 * h, yi, k5, g_max, sigma, t0, half_window, kappa_r, kappa_b)
        for j in range(6):
            yi[j] = y[j] + h * (A61 * k1[j] + A62 * k2[j] + A63 * k3[j] + A64 * k4[j] + A65 * k5[j])
        _rhs(t + h, yi, k6, g_max, sigma, t0, half_window, kappa_r, kappa_b)
        for j in range(6):
            yn[j] = y[j] + h * (A71 * k1[j] + A73 * k3[j] + A74 * k4[j] + A75 * k5[j] + A76 * k6[j])
        _rhs(t + h, yn, k7, g_max, sigma, t0, half_window, kappa_r, kappa_b)
        err = 0.0
        # error norm over the four complex-valued components, as in the reference
        for j in range(4):
            err += _comp_err(j, h, y, yn, k1, k3, k4, k5, k6, k7, rtol, atol)
        err = sqrt(err / 4.0)
        if err <= 1.0:
            if hit:
                t = target
            else:
                t = t + h
            for j in range(6):
                y[j] = yn[j]
                k1[j] = k7[j]
            n_steps += 1
            while i_eval < n_eval and te[i_eval] <= t + 1e-18:
                samples[i_eval, 0] = y[0] + 1j * y[1]
                samples[i_eval, 1] = y[2] + 1j * y[3]
                i_eval += 1
            if err == 0.0:
                fac = 5.0
            else:
                fac = 0.9 * pow(err, -0.2)
                if fac > 5.0:
                    fac = 5.0
                if fac < 0.2:
                    fac = 0.2
        else:
            fac = 0.9 * pow(err, -0.2)
            if fac < 0.2:
                fac = 0.2
        h = h * fac
        if not isfinite(h) or h <= 0.0:
            return samples, _final(y), -max(n_steps, 1)
    return samples, _final(y), n_steps


cdef double _comp_err(Py_ssize_t j, double h, double* y, double* yn, double* k1, double* k3,
                      double* k4, double* k5, double* k6, double* k7, double rtol, double atol):
    # components 0,1 -> r ; 2,3 -> b ; 4 -> loss_r ; 5 -> loss_b
    cdef double er, ei, mag_old, mag_new, sc
    cdef Py_ssize_t q = j + 2
    if j < 2:
        er = h * (E1 * k1[0] + E3 * k3[0] + E4 * k4[0] + E5 * k5[0] + E6 * k6[0] + E7 * k7[0])
        ei = h * (E1 * k1[1] + E3 * k3[1] + E4 * k4[1] + E5 * k5[1] + E6 * k6[1] + E7 * k7[1])
        if j == 0:
            mag_old = sqrt(y[0] * y[0] + y[1] * y[1])
            mag_new = sqrt(yn[0] * yn[0] + yn[1] * yn[1])
            sc = atol + rtol * (mag_old if mag_old > mag_new else mag_new)
            return (er * er + ei * ei) / (sc * sc)
        er = h * (E1 * k1[2] + E3 * k3[2] + E4 * k4[2] + E5 * k5[2] + E6 * k6[2] + E7 * k7[2])
        ei = h * (E1 * k1[3] + E3 * k3[3] + E4 * k4[3] + E5 * k5[3] + E6 * k6[3] + E7 * k7[3])
        mag_old = sqrt(y[2] * y[2] + y[3] * y[3])
        mag_new = sqrt(yn[2] * yn[2] + yn[3] * yn[3])
        sc = atol + rtol * (mag_old if mag_old > mag_new else mag_new)
        return (er * er + ei * ei) / (sc * sc)
    er = h * (E1 * k1[q] + E3 * k3[q] + E4 * k4[q] + E5 * k5[q] + E6 * k6[q] + E7 * k7[q])
    mag_old = fabs(y[q])
    mag_new = fabs(yn[q])
    sc = atol + rtol * (mag_old if mag_old > mag_new else mag_new)
    return (er * er) / (sc * sc)


cdef object _final(double* y):
    return np.array([y[0] + 1j * y[1], y[2] + 1j * y[3], y[4], y[5]], dtype=np.complex128)


def wigner_iterative(rho, alphas):
    # points are the innermost loop so every recurrence step is a streaming pass
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] r = np.array(rho, dtype=np.complex128, order="C")  # copy: inputs may be read-only
    a = np.asarray(alphas, dtype=np.complex128).ravel()
    cdef Py_ssize_t n_dim = r.shape[0], n_pts = a.shape[0], p, m, n
    cdef double[::1] ar = np.ascontiguousarray(a.real)
    cdef double[::1] ai = np.ascontiguousarray(a.imag)
    cdef double[:, ::1] wr = np.empty((n_dim, n_pts))
    cdef double[:, ::1] wi = np.empty((n_dim, n_pts))
    cdef double[::1] tr = np.empty(n_pts)
    cdef double[::1] ti = np.empty(n_pts)
    out_arr = np.zeros(n_pts)
    cdef double[::1] w = out_arr
    cdef double[:, ::1] rr = np.ascontiguousarray(r.real)
    cdef double[:, ::1] ri = np.ascontiguousarray(r.imag)
    cdef double[::1] sq = np.sqrt(np.arange(n_dim, dtype=np.float64))
    cdef double[::1] isq = 1.0 / np.sqrt(np.maximum(np.arange(n_dim, dtype=np.float64), 1.0))
    cdef double xr, xi, yr, yi, cr, ci, s, f, t2r, t2i
    for p in range(n_pts):
        wr[0, p] = exp(-2.0 * (ar[p] * ar[p] + ai[p] * ai[p])) / 3.141592653589793
        wi[0, p] = 0.0
        w[p] = rr[0, 0] * wr[0, p]
    for n in range(1, n_dim):
        f = 2.0 * isq[n]
        cr = 2.0 * rr[0, n]
        ci = 2.0 * ri[0, n]
        for p in range(n_pts):
            xr = wr[n - 1, p]
            xi = wi[n - 1, p]
            yr = f * (ar[p] * xr - ai[p] * xi)
            yi = f * (ar[p] * xi + ai[p] * xr)
            wr[n, p] = yr
            wi[n, p] = yi
            w[p] += cr * yr - ci * yi
    for m in range(1, n_dim):
        s = sq[m]
        f = isq[m]
        cr = rr[m, m]
        for p in range(n_pts):
            xr = wr[m, p]
            xi = wi[m, p]
            tr[p] = xr
            ti[p] = xi
            # wl[m] = (2 conj(a) wl[m] - sqrt(m) wl[m-1]) / sqrt(m)
            yr = (2.0 * (ar[p] * xr + ai[p] * xi) - s * wr[m - 1, p]) * f
            yi = (2.0 * (ar[p] * xi - ai[p] * xr) - s * wi[m - 1, p]) * f
            wr[m, p] = yr
            wi[m, p] = yi
            w[p] += cr * yr - ri[m, m] * yi
        for n in range(m + 1, n_dim):
            f = isq[n]
            cr = 2.0 * rr[m, n]
            ci = 2.0 * ri[m, n]
            for p in range(n_pts):
                xr = wr[n - 1, p]
                xi = wi[n - 1, p]
                t2r = (2.0 * (ar[p] * xr - ai[p] * xi) - s * tr[p]) * f
                t2i = (2.0 * (ar[p] * xi + ai[p] * xr) - s * ti[p]) * f
                tr[p] = wr[n, p]
                ti[p] = wi[n, p]
                wr[n, p] = t2r
                wi[n, p] = t2i
                w[p] += cr * t2r - ci * t2i
    return 2.0 * out_arr


def husimi_amplitudes(psi, mus):
    # points innermost: the Horner chain is serial per point, so vectorize across points
    ps = np.asarray(psi, dtype=np.complex128).ravel()
    mu = np.asarray(mus, dtype=np.complex128).ravel()
    cdef Py_ssize_t n_dim = ps.shape[0], n_pts = mu.shape[0], p, n
    cdef double[::1] pr = np.ascontiguousarray(ps.real)
    cdef double[::1] pi_ = np.ascontiguousarray(ps.imag)
    cdef double[::1] zr = np.ascontiguousarray(mu.real)
    cdef double[::1] zi = np.ascontiguousarray(-mu.imag)
    accr_arr = np.full(n_pts, ps[n_dim - 1].real)
    acci_arr = np.full(n_pts, ps[n_dim - 1].imag)
    cdef double[::1] accr = accr_arr
    cdef double[::1] acci = acci_arr
    cdef double g, cr, ci, xr, xi
    for n in range(n_dim - 2, -1, -1):
        g = 1.0 / sqrt(n + 1.0)
        cr = pr[n]
        ci = pi_[n]
        for p in range(n_pts):
            xr = accr[p]
            xi = acci[p]
            accr[p] = cr + g * (xr * zr[p] - xi * zi[p])
            acci[p] = ci + g * (xr * zi[p] + xi * zr[p])
    return np.exp(-0.5 * np.abs(mu) ** 2) * (accr_arr + 1j * acci_arr)


def hist2d_uniform(x, y, double x0, double dx, long nx, double y0, double dy, long ny):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xs = np.ascontiguousarray(x, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ys = np.ascontiguousarray(y, dtype=np.float64).ravel()
    cdef cnp.ndarray[cnp.int64_t, ndim=2] counts = np.zeros((nx, ny), dtype=np.int64)
    cdef Py_ssize_t i, n = xs.shape[0]
    cdef long ix, iy, n_out = 0
    cdef double xmax = x0 + nx * dx, ymax = y0 + ny * dy
    for i in range(n):
        ix = <long> floor((xs[i] - x0) / dx)
        iy = <long> floor((ys[i] - y0) / dy)
        if ix == nx and xs[i] <= xmax:
            ix = nx - 1
        if iy == ny and ys[i] <= ymax:
            iy = ny - 1
        if ix < 0 or ix >= nx or iy < 0 or iy >= ny:
            n_out += 1
        else:
            counts[ix, iy] += 1
    return counts, n_out
