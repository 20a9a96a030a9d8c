"""Independent oracles used by the test suite.

These deliberately avoid the implementation paths they check: Fresnel
propagation by FFT, finite differences, matrix exponentials, brute-force
quadrature.
"""

import numpy as np


def fresnel_propagate(u0, xs, k, z):
    """Single-FFT (impulse response) Fresnel propagation of a 1-D field.

    Returns (x_out, u_out) on the far-field grid x_out = m * 2*pi*z/(k*L).
    The output carries an overall chirp and scale factor, both common to
    every input component, so interference cross terms are unaffected.
    Valid when the input chirp k*x^2/(2z) is well sampled.
    """
    n = xs.size
    dx = xs[1] - xs[0]
    length = n * dx
    chirp = np.exp(1j * k * xs ** 2 / (2.0 * z))
    spectrum = np.fft.fftshift(np.fft.fft(np.fft.ifftshift(u0 * chirp)))
    x_out = (np.arange(n) - n // 2) * (2.0 * np.pi * z / (k * length))
    return x_out, spectrum


def zero_crossing_spacing(xs, vals, window):
    """Mean spacing of sign changes of ``vals`` inside |x| < window.

    Crossing positions are linearly interpolated; for a pure sinusoidal
    fringe term the result is half the fringe period, independent of any
    envelope.
    """
    sel = np.abs(xs) < window
    x = xs[sel]
    v = vals[sel]
    sign_flip = np.where(np.signbit(v[:-1]) != np.signbit(v[1:]))[0]
    if sign_flip.size < 2:
        raise AssertionError("fewer than two fringe zero crossings found")
    crossings = x[sign_flip] - v[sign_flip] * (x[sign_flip + 1] - x[sign_flip]) / (
        v[sign_flip + 1] - v[sign_flip])
    return float(np.mean(np.diff(crossings)))


def fd_phase_gradient(envelope_fn, x, z, h):
    """Central-difference gradient of the envelope phase, wrap-corrected."""
    up = envelope_fn(x + h, z)
    um = envelope_fn(x - h, z)
    dphi = np.angle(up) - np.angle(um)
    dphi = (dphi + np.pi) % (2.0 * np.pi) - np.pi
    return dphi / (2.0 * h)


def fd_log_density_gradient(envelope_fn, x, z, h):
    """Central-difference of -(d rho/dx)/(2 rho) from envelope magnitudes."""
    rp = np.abs(envelope_fn(x + h, z)) ** 2
    rm = np.abs(envelope_fn(x - h, z)) ** 2
    r0 = np.abs(envelope_fn(x, z)) ** 2
    return -(rp - rm) / (2.0 * h) / (2.0 * r0)
