"""Pure-Python fallback kernels for the hot numerical paths.

The compiled extension (``_kernels_cy``) implements exactly the same
algorithms; :mod:`weakflow.kernels` picks whichever is importable.  Both
backends must keep the arithmetic order identical so that results agree
between them and stay deterministic within a backend.

Beam parametrization used by every kernel call::

    params = (k, c_a, c_b, q0_re, q0_im, r_re, r_im)

where ``k`` is the carrier wavenumber, ``c_a``/``c_b`` the transverse slit
centres, ``q0`` the complex beam parameter at z = 0 and ``r`` the amplitude
of slit *b* relative to slit *a*.  The envelope is evaluated in this
normalized "slit-a = 1" form, which makes every weak-value ratio exactly
independent of the overall beam amplitude.
"""

import cmath
import math

STATUS_OK = 0
STATUS_NODE = 1
STATUS_STEP_FAILURE = 2
STATUS_EXITED = 3

# Dormand-Prince 5(4) tableau
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = (
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
)
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71.0 / 57600.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
)

_C2, _C3, _C4, _C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0


def backend_name():
    return "python"


def envelope_norm(params, x, z):
    """Normalized two-slit envelope u_hat = f_a + r*f_b at (x, z)."""
    k, c_a, c_b, q0_re, q0_im, r_re, r_im = params
    q = complex(z + q0_re, q0_im)
    r = complex(r_re, r_im)
    ta = x - c_a
    tb = x - c_b
    half_ik_over_q = 0.5j * k / q
    fa = cmath.exp(half_ik_over_q * ta * ta) / q
    fb = cmath.exp(half_ik_over_q * tb * tb) / q
    return fa + r * fb


def kw_point(params, x, z, eps_node):
    """Complex weak transverse wavenumber k_w = (-i du/dx)/u.

    Returns ``(kw, status)``; on a node (|u_hat| <= eps_node) the value is 0
    and status is STATUS_NODE.
    """
    k, c_a, c_b, q0_re, q0_im, r_re, r_im = params
    q = complex(z + q0_re, q0_im)
    r = complex(r_re, r_im)
    ta = x - c_a
    tb = x - c_b
    ik_over_q = 1j * k / q
    half = 0.5 * ik_over_q
    fa = cmath.exp(half * ta * ta) / q
    fb = cmath.exp(half * tb * tb) / q
    rfb = r * fb
    u = fa + rfb
    if abs(u) <= eps_node:
        return 0j, STATUS_NODE
    du = fa * (ik_over_q * ta) + rfb * (ik_over_q * tb)
    kw = -1j * (du / u)
    if not (math.isfinite(kw.real) and math.isfinite(kw.imag)):
        return 0j, STATUS_NODE
    return kw, STATUS_OK


def _rhs(params, x, z, eps_node, inv_k):
    kw, status = kw_point(params, x, z, eps_node)
    return kw.real * inv_k, status


def integrate_line(params, x0, z0, z1, rtol, atol, eps_node,
                   x_lo, x_hi, z_out, max_steps):
    """Integrate dx/dz = Re(k_w)/k with an adaptive Dormand-Prince 5(4) pair.

    ``z_out``: optional increasing sample positions inside [z0, z1]; when
    given, points are emitted there via cubic Hermite interpolation of the
    accepted steps, otherwise every accepted step is emitted.

    Returns ``(zs, xs, status, n_accepted, n_rejected)`` as Python lists plus
    ints; the wrapper converts to arrays.
    """
    k = params[0]
    inv_k = 1.0 / k
    span = z1 - z0
    zs = []
    xs = []
    n_acc = 0
    n_rej = 0

    dense = z_out is not None
    j_out = 0
    n_out = len(z_out) if dense else 0

    z = z0
    x = x0
    f1, status = _rhs(params, x, z, eps_node, inv_k)
    if status != STATUS_OK:
        return zs, xs, STATUS_NODE, n_acc, n_rej
    if not (x_lo <= x <= x_hi):
        return zs, xs, STATUS_EXITED, n_acc, n_rej

    if dense:
        while j_out < n_out and z_out[j_out] <= z0:
            zs.append(z0)
            xs.append(x0)
            j_out += 1
    else:
        zs.append(z0)
        xs.append(x0)

    h = span * 1e-3
    hmin = span * 1e-14
    steps = 0
    while z < z1:
        if steps >= max_steps:
            return zs, xs, STATUS_STEP_FAILURE, n_acc, n_rej
        steps += 1
        if h < hmin:
            return zs, xs, STATUS_STEP_FAILURE, n_acc, n_rej
        final = z + h >= z1
        if final:
            h = z1 - z

        k1 = f1
        f, s2 = _rhs(params, x + h * (_A21 * k1), z + _C2 * h, eps_node, inv_k)
        if s2 != STATUS_OK:
            return zs, xs, STATUS_NODE, n_acc, n_rej
        k2 = f
        f, s3 = _rhs(params, x + h * (_A31 * k1 + _A32 * k2), z + _C3 * h, eps_node, inv_k)
        if s3 != STATUS_OK:
            return zs, xs, STATUS_NODE, n_acc, n_rej
        k3 = f
        f, s4 = _rhs(params, x + h * (_A41 * k1 + _A42 * k2 + _A43 * k3), z + _C4 * h,
                     eps_node, inv_k)
        if s4 != STATUS_OK:
            return zs, xs, STATUS_NODE, n_acc, n_rej
        k4 = f
        f, s5 = _rhs(params, x + h * (_A51 * k1 + _A52 * k2 + _A53 * k3 + _A54 * k4),
                     z + _C5 * h, eps_node, inv_k)
        if s5 != STATUS_OK:
            return zs, xs, STATUS_NODE, n_acc, n_rej
        k5 = f
        f, s6 = _rhs(params, x + h * (_A61 * k1 + _A62 * k2 + _A63 * k3 + _A64 * k4 + _A65 * k5),
                     z + h, eps_node, inv_k)
        if s6 != STATUS_OK:
            return zs, xs, STATUS_NODE, n_acc, n_rej
        k6 = f

        x_new = x + h * (_B1 * k1 + _B3 * k3 + _B4 * k4 + _B5 * k5 + _B6 * k6)
        z_new = z1 if final else z + h   # exact arrival, no ulp shortfall
        f, s7 = _rhs(params, x_new, z_new, eps_node, inv_k)
        if s7 != STATUS_OK:
            return zs, xs, STATUS_NODE, n_acc, n_rej
        k7 = f

        err = h * (_E1 * k1 + _E3 * k3 + _E4 * k4 + _E5 * k5 + _E6 * k6 + _E7 * k7)
        ax = abs(x)
        axn = abs(x_new)
        scale = atol + rtol * (ax if ax > axn else axn)
        err_norm = abs(err) / scale

        if err_norm <= 1.0:
            n_acc += 1
            if not (x_lo <= x_new <= x_hi):
                return zs, xs, STATUS_EXITED, n_acc, n_rej
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
                    zs.append(zq)
                    xs.append(xq)
                    j_out += 1
            else:
                zs.append(z_new)
                xs.append(x_new)
            z = z_new
            x = x_new
            f1 = k7
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
            n_rej += 1
            factor = 0.9 * err_norm ** -0.2
            if factor < 0.2:
                factor = 0.2
            h *= factor

    return zs, xs, STATUS_OK, n_acc, n_rej
