# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels for the hot numerical paths.

Mirror of ``_kernels_py``: same beam parametrization, same Dormand-Prince
5(4) tableau and step-control law, same node/domain handling.  Keep the two
implementations in lockstep; the parity test compares them directly.
"""

import numpy as np

cimport numpy as cnp

cdef extern from "complex.h" nogil:
    double complex cexp(double complex)
    double cabs(double complex)
    double creal(double complex)
    double cimag(double complex)

cdef extern from "math.h" nogil:
    bint isfinite(double)

STATUS_OK = 0
STATUS_NODE = 1
STATUS_STEP_FAILURE = 2
STATUS_EXITED = 3

cdef int C_OK = 0
cdef int C_NODE = 1
cdef int C_STEP_FAILURE = 2
cdef int C_EXITED = 3

cdef double A21 = 1.0 / 5.0
cdef double A31 = 3.0 / 40.0, A32 = 9.0 / 40.0
cdef double A41 = 44.0 / 45.0, A42 = -56.0 / 15.0, A43 = 32.0 / 9.0
cdef double A51 = 19372.0 / 6561.0, A52 = -25360.0 / 2187.0
cdef double A53 = 64448.0 / 6561.0, A54 = -212.0 / 729.0
cdef double A61 = 9017.0 / 3168.0, A62 = -355.0 / 33.0
cdef double A63 = 46732.0 / 5247.0, A64 = 49.0 / 176.0, A65 = -5103.0 / 18656.0
cdef double B1 = 35.0 / 384.0, B3 = 500.0 / 1113.0, B4 = 125.0 / 192.0
cdef double B5 = -2187.0 / 6784.0, B6 = 11.0 / 84.0
cdef double E1 = 71.0 / 57600.0, E3 = -71.0 / 16695.0, E4 = 71.0 / 1920.0
cdef double E5 = -17253.0 / 339200.0, E6 = 22.0 / 525.0, E7 = -1.0 / 40.0
cdef double C2 = 1.0 / 5.0, C3 = 3.0 / 10.0, C4 = 4.0 / 5.0, C5 = 8.0 / 9.0


cdef struct BeamP:
    double k
    double c_a
    double c_b
    double q0_re
    double q0_im
    double r_re
    double r_im


def backend_name():
    return "cython"


cdef inline double complex _u_hat(BeamP* p, double x, double z) nogil:
    cdef double complex q = z + p.q0_re + 1j * p.q0_im
    cdef double complex r = p.r_re + 1j * p.r_im
    cdef double ta = x - p.c_a
    cdef double tb = x - p.c_b
    cdef double complex half = 0.5j * p.k / q
    cdef double complex fa = cexp(half * ta * ta) / q
    cdef double complex fb = cexp(half * tb * tb) / q
    return fa + r * fb


cdef inline int _kw(BeamP* p, double x, double z, double eps_node,
                    double complex* out) nogil:
    cdef double complex q = z + p.q0_re + 1j * p.q0_im
    cdef double complex r = p.r_re + 1j * p.r_im
    cdef double ta = x - p.c_a
    cdef double tb = x - p.c_b
    cdef double complex ik_over_q = 1j * p.k / q
    cdef double complex half = 0.5 * ik_over_q
    cdef double complex fa = cexp(half * ta * ta) / q
    cdef double complex fb = cexp(half * tb * tb) / q
    cdef double complex rfb = r * fb
    cdef double complex u = fa + rfb
    cdef double complex du, kw
    if cabs(u) <= eps_node:
        return C_NODE
    du = fa * (ik_over_q * ta) + rfb * (ik_over_q * tb)
    kw = -1j * (du / u)
    if not (isfinite(creal(kw)) and isfinite(cimag(kw))):
        return C_NODE
    out[0] = kw
    return C_OK


def envelope_norm(params, double x, double z):
    cdef BeamP p
    p.k, p.c_a, p.c_b, p.q0_re, p.q0_im, p.r_re, p.r_im = params
    return complex(_u_hat(&p, x, z))


def kw_point(params, double x, double z, double eps_node):
    cdef BeamP p
    cdef double complex kw = 0
    p.k, p.c_a, p.c_b, p.q0_re, p.q0_im, p.r_re, p.r_im = params
    cdef int status = _kw(&p, x, z, eps_node, &kw)
    if status != C_OK:
        return 0j, STATUS_NODE
    return complex(kw), STATUS_OK


cdef inline int _rhs(BeamP* p, double x, double z, double eps_node,
                     double inv_k, double* out) nogil:
    cdef double complex kw = 0
    cdef int status = _kw(p, x, z, eps_node, &kw)
    if status != C_OK:
        return status
    out[0] = creal(kw) * inv_k
    return C_OK


cdef int _integrate(BeamP* p, double x0, double z0, double z1,
                    double rtol, double atol, double eps_node,
                    double x_lo, double x_hi,
                    double* z_out, Py_ssize_t n_out,
                    double* zs, double* xs, Py_ssize_t* n_pts,
                    long max_steps, long* n_acc, long* n_rej) nogil:
    cdef double span = z1 - z0
    cdef double inv_k = 1.0 / p.k
    cdef double z = z0, x = x0
    cdef double h = span * 1e-3
    cdef double hmin = span * 1e-14
    cdef double k1, k2, k3, k4, k5, k6, k7, f
    cdef double x_new, z_new, err, scale, err_norm, factor, ax, axn
    cdef double th, th2, th3, zq, xq
    cdef Py_ssize_t j_out = 0
    cdef long steps = 0
    cdef int dense = 1 if n_out >= 0 else 0
    cdef int status
    cdef int final

    n_pts[0] = 0
    n_acc[0] = 0
    n_rej[0] = 0

    status = _rhs(p, x, z, eps_node, inv_k, &k1)
    if status != C_OK:
        return C_NODE
    if not (x_lo <= x <= x_hi):
        return C_EXITED

    if dense:
        while j_out < n_out and z_out[j_out] <= z0:
            zs[n_pts[0]] = z0
            xs[n_pts[0]] = x0
            n_pts[0] += 1
            j_out += 1
    else:
        zs[0] = z0
        xs[0] = x0
        n_pts[0] = 1

    while z < z1:
        if steps >= max_steps:
            return C_STEP_FAILURE
        steps += 1
        if h < hmin:
            return C_STEP_FAILURE
        final = 1 if z + h >= z1 else 0
        if final:
            h = z1 - z

        if _rhs(p, x + h * (A21 * k1), z + C2 * h, eps_node, inv_k, &f) != C_OK:
            return C_NODE
        k2 = f
        if _rhs(p, x + h * (A31 * k1 + A32 * k2), z + C3 * h, eps_node, inv_k, &f) != C_OK:
            return C_NODE
        k3 = f
        if _rhs(p, x + h * (A41 * k1 + A42 * k2 + A43 * k3), z + C4 * h,
                eps_node, inv_k, &f) != C_OK:
            return C_NODE
        k4 = f
        if _rhs(p, x + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4),
                z + C5 * h, eps_node, inv_k, &f) != C_OK:
            return C_NODE
        k5 = f
        if _rhs(p, x + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5),
                z + h, eps_node, inv_k, &f) != C_OK:
            return C_NODE
        k6 = f

        x_new = x + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6)
        z_new = z1 if final else z + h   # exact arrival, no ulp shortfall
        if _rhs(p, x_new, z_new, eps_node, inv_k, &f) != C_OK:
            return C_NODE
        k7 = f

        err = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
        ax = x if x >= 0 else -x
        axn = x_new if x_new >= 0 else -x_new
        scale = atol + rtol * (ax if ax > axn else axn)
        err_norm = (err if err >= 0 else -err) / scale

        if err_norm <= 1.0:
            n_acc[0] += 1
            if not (x_lo <= x_new <= x_hi):
                return C_EXITED
            if dense:
                while j_out < n_out and z_out[j_out] <= z_new:
                    zq = z_out[j_out]
                    th = (zq - z) / h
                    th2 = th * th
                    th3 = th2 * th
                    xq = ((2.0 * th3 - 3.0 * th2 + 1.0) * x
                          + (th3 - 2.0 * th2 + th) * h * k1
                          + (-2.0 * th3 + 3.0 * th2) * x_new
                          + (th3 - th2) * h * k7)
                    zs[n_pts[0]] = zq
                    xs[n_pts[0]] = xq
                    n_pts[0] += 1
                    j_out += 1
            else:
                zs[n_pts[0]] = z_new
                xs[n_pts[0]] = x_new
                n_pts[0] += 1
            z = z_new
            x = x_new
            k1 = k7
            if err_norm == 0.0:
                factor = 5.0
            else:
                factor = 0.9 * err_norm ** -0.2
                if factor > 5.0:
                    factor = 5.0
                elif factor < 0.2:
                    factor = 0.2
            h *= factor
        else:
            n_rej[0] += 1
            factor = 0.9 * err_norm ** -0.2
            if factor < 0.2:
                factor = 0.2
            h *= factor

    return C_OK


def integrate_line(params, double x0, double z0, double z1,
                   double rtol, double atol, double eps_node,
                   double x_lo, double x_hi, z_out, long max_steps):
    """See ``_kernels_py.integrate_line``; identical contract."""
    cdef BeamP p
    p.k, p.c_a, p.c_b, p.q0_re, p.q0_im, p.r_re, p.r_im = params

    cdef cnp.ndarray[cnp.float64_t, ndim=1] z_arr
    cdef double* z_ptr = NULL
    cdef Py_ssize_t n_out = -1
    cdef Py_ssize_t cap
    if z_out is not None:
        z_arr = np.ascontiguousarray(z_out, dtype=np.float64)
        n_out = z_arr.shape[0]
        if n_out > 0:
            z_ptr = &z_arr[0]
        cap = n_out + 2
    else:
        cap = max_steps + 2

    cdef cnp.ndarray[cnp.float64_t, ndim=1] zs = np.empty(cap, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xs = np.empty(cap, dtype=np.float64)
    cdef Py_ssize_t n_pts = 0
    cdef long n_acc = 0, n_rej = 0
    cdef int status

    with nogil:
        status = _integrate(&p, x0, z0, z1, rtol, atol, eps_node,
                            x_lo, x_hi, z_ptr, n_out,
                            &zs[0], &xs[0], &n_pts, max_steps, &n_acc, &n_rej)

    return (zs[:n_pts].copy(), xs[:n_pts].copy(), status, int(n_acc), int(n_rej))
