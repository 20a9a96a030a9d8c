"""Analytic model of a paraxial, polarized, two-slit Gaussian beam.

The beam is a coherent superposition of two identical Gaussian beamlets
centred at x = +d/2 and x = -d/2, each with the circular-cross-section
envelope ``exp(i k rho^2 / (2 q(z))) / q(z)`` and complex beam parameter
``q(z) = z + q0``, ``q0 = -i k sigma0^2`` for a flat wavefront at the slit
plane.  Natural units c = hbar = 1; the monochromatic carrier is
``exp(i k z)`` with omega = k, time dependence folded out.

All weak-value ratios downstream are computed from the amplitude-normalized
envelope (slit amplitudes reduced to a single complex ratio), so they are
exactly independent of the overall beam amplitude.
"""

import cmath
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

DEFAULT_WAVELENGTH_NM = 943.0


@dataclass(frozen=True)
class PolarizationSpinor:
    """Two-component transverse polarization (zeta_x, zeta_y)."""

    zeta_x: complex = 1.0 + 0.0j
    zeta_y: complex = 0.0j

    def norm(self):
        return float(np.sqrt(abs(self.zeta_x) ** 2 + abs(self.zeta_y) ** 2))

    def normalized(self):
        """Return the unit-norm spinor (normalization is explicit, never implicit)."""
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize the zero spinor")
        return PolarizationSpinor(self.zeta_x / n, self.zeta_y / n)

    def is_normalized(self, tol=1e-12):
        return abs(self.norm() - 1.0) <= tol


HORIZONTAL = PolarizationSpinor(1.0 + 0.0j, 0.0j)
VERTICAL = PolarizationSpinor(0.0j, 1.0 + 0.0j)
DIAGONAL = PolarizationSpinor(1.0 / np.sqrt(2.0) + 0.0j, 1.0 / np.sqrt(2.0) + 0.0j)


@dataclass(frozen=True)
class BeamModel:
    """Parameters of the two-slit Gaussian beam (lengths in any one unit).

    ``relative_phase`` is folded into the minus-slit amplitude on
    construction; ``wavefront_radius`` is the radius of curvature of the
    beamlet wavefronts at the slit plane (None = flat, the default).
    """

    wavenumber: float
    slit_separation: float
    waist: float
    amp_plus: complex = 1.0 + 0.0j
    amp_minus: complex = 1.0 + 0.0j
    relative_phase: float = 0.0
    polarization: PolarizationSpinor = field(default_factory=lambda: HORIZONTAL)
    wavefront_radius: float | None = None

    def __post_init__(self):
        if not self.wavenumber > 0.0:
            raise ValueError("wavenumber must be positive")
        if not self.waist > 0.0:
            raise ValueError("waist must be positive")
        if self.slit_separation < 0.0:
            raise ValueError("slit separation must be non-negative")
        if self.amp_plus == 0 and self._amp_minus_eff == 0:
            raise ValueError("both slit amplitudes are zero")
        if not self.polarization.is_normalized():
            raise ValueError("polarization spinor must be normalized explicitly")

    @property
    def _amp_minus_eff(self):
        return self.amp_minus * cmath.exp(1j * self.relative_phase)

    @property
    def rayleigh_range(self):
        return self.wavenumber * self.waist ** 2

    @property
    def q0(self):
        """Complex beam parameter at z = 0 (convention q(z) = z + q0)."""
        if self.wavefront_radius is None:
            return -1j * self.rayleigh_range
        return 1.0 / (1.0 / self.wavefront_radius + 1j / self.rayleigh_range)

    @property
    def _slit_form(self):
        """(c_a, c_b, r, scale): envelope = scale * (f(c_a) + r*f(c_b)), |r| <= 1."""
        a_p = complex(self.amp_plus)
        a_m = self._amp_minus_eff
        half = 0.5 * self.slit_separation
        if abs(a_m) > abs(a_p):
            return -half, half, a_p / a_m, a_m
        return half, -half, a_m / a_p, a_p

    @property
    def kernel_params(self):
        c_a, c_b, r, _ = self._slit_form
        q0 = self.q0
        return (self.wavenumber, c_a, c_b, q0.real, q0.imag, r.real, r.imag)

    @classmethod
    def default(cls, **overrides):
        """Default desk-scale beam: 943 nm source, 10 um waist, d = 4 sigma0.

        Internally lengths are expressed in waist units (sigma0 = 1).
        """
        waist_um = overrides.pop("waist_um", 10.0)
        wavelength_nm = overrides.pop("wavelength_nm", DEFAULT_WAVELENGTH_NM)
        kw = dict(
            wavenumber=2.0 * np.pi * waist_um * 1000.0 / wavelength_nm,
            slit_separation=4.0,
            waist=1.0,
        )
        kw.update(overrides)
        return cls(**kw)


def _beamlet_factors(model, x, z, y=0.0):
    """Common per-beamlet quantities; x, y, z broadcastable arrays or scalars."""
    c_a, c_b, r, scale = model._slit_form
    k = model.wavenumber
    q = np.asarray(z, dtype=complex) + model.q0
    ta = np.asarray(x, dtype=float) - c_a
    tb = np.asarray(x, dtype=float) - c_b
    y = np.asarray(y, dtype=float)
    ik_over_q = 1j * k / q
    ga = np.exp(0.5 * ik_over_q * (ta * ta + y * y)) / q
    gb = np.exp(0.5 * ik_over_q * (tb * tb + y * y)) / q
    return k, q, ta, tb, y, ik_over_q, ga, r * gb, scale


def envelope(model, x, z):
    """Complex envelope u(x, z) of the two-slit beam on the y = 0 plane."""
    _, _, _, _, _, _, ga, rgb, scale = _beamlet_factors(model, x, z)
    u = scale * (ga + rgb)
    if not np.all(np.isfinite(u)):
        raise DomainError("envelope evaluation produced a non-finite value")
    return u


def envelope_normalized(model, x, z):
    """Amplitude-free envelope f_a + r*f_b (identical for any overall scaling)."""
    _, _, _, _, _, _, ga, rgb, _ = _beamlet_factors(model, x, z)
    return ga + rgb


def envelope_derivatives_normalized(model, x, z, y=0.0):
    """Closed-form envelope and derivatives in the amplitude-free form.

    Returns a dict with u, du_dx, du_dz, du_dy, d2u_dx2, d2u_dy2, d2u_dxdy;
    identical for any overall rescaling of the slit amplitudes, which makes
    every ratio built from it exactly amplitude-invariant.
    """
    k, q, ta, tb, y, ik_over_q, ga, rgb, scale = _beamlet_factors(model, x, z, y)
    u = ga + rgb
    pa = ik_over_q * ta
    pb = ik_over_q * tb
    py = ik_over_q * y
    du_dx = ga * pa + rgb * pb
    du_dy = u * py
    du_dz = (ga * (-1.0 / q - 0.5 * ik_over_q * (ta * ta + y * y) / q)
             + rgb * (-1.0 / q - 0.5 * ik_over_q * (tb * tb + y * y) / q))
    d2u_dx2 = ga * (pa * pa + ik_over_q) + rgb * (pb * pb + ik_over_q)
    d2u_dy2 = u * (py * py + ik_over_q)
    d2u_dxdy = (ga * pa + rgb * pb) * py
    return {
        "u": u, "du_dx": du_dx, "du_dy": du_dy, "du_dz": du_dz,
        "d2u_dx2": d2u_dx2, "d2u_dy2": d2u_dy2, "d2u_dxdy": d2u_dxdy,
    }


def envelope_derivatives(model, x, z, y=0.0):
    """Envelope and derivatives at (x, y, z), carrying the amplitude scale."""
    scale = model._slit_form[3]
    norm = envelope_derivatives_normalized(model, x, z, y)
    return {key: scale * val for key, val in norm.items()}


def paraxial_residual(model, x, z, y=0.0):
    """|2ik du/dz + d2u/dx2 + d2u/dy2| for the circular-cross-section envelope.

    The analytic form solves the transverse paraxial equation exactly, so
    this is floating-point noise; exposed for verification.
    """
    d = envelope_derivatives(model, x, z, y)
    return np.abs(2j * model.wavenumber * d["du_dz"] + d["d2u_dx2"] + d["d2u_dy2"])


@dataclass(frozen=True)
class FieldSample:
    """Vector potential (transverse 2-vector) and derived E, B at one point."""

    A: np.ndarray
    E: np.ndarray
    B: np.ndarray
    position: tuple


def fields_at(model, x, y, z):
    """Vector potential, electric and magnetic fields at (x, y, z).

    A = envelope * spinor * exp(ikz); E = i*omega*A with omega = k; B is the
    curl computed from the closed-form envelope derivatives, including the
    longitudinal components required by the transversality condition
    (div A = 0 to paraxial order).  No numerical differentiation.
    """
    k = model.wavenumber
    zx = complex(model.polarization.zeta_x)
    zy = complex(model.polarization.zeta_y)
    d = envelope_derivatives(model, x, z, y)
    carrier = np.exp(1j * k * np.asarray(z, dtype=float))
    u = d["u"]
    ax = zx * u * carrier
    ay = zy * u * carrier
    dz_full = d["du_dz"] + 1j * k * u
    ez = -(zx * d["du_dx"] + zy * d["du_dy"]) * carrier
    ex = 1j * k * ax
    ey = 1j * k * ay
    bx = ((1j / k) * (zx * d["d2u_dxdy"] + zy * d["d2u_dy2"]) - zy * dz_full) * carrier
    by = (zx * dz_full - (1j / k) * (zx * d["d2u_dx2"] + zy * d["d2u_dxdy"])) * carrier
    bz = (zy * d["du_dx"] - zx * d["du_dy"]) * carrier
    A = np.array([ax, ay])
    E = np.array([ex, ey, ez])
    B = np.array([bx, by, bz])
    for arr in (E, B):
        if not np.all(np.isfinite(arr)):
            raise DomainError("field evaluation produced a non-finite value")
    return FieldSample(A=A, E=E, B=B, position=(x, y, z))


class TiltedPlaneWave:
    """Plane wave tilted by a small angle: u = exp(i k theta x).

    A momentum eigenstate; its weak transverse wavenumber is k*theta exactly.
    Used for kernel checks and for calibrating the coupling constant.
    """

    def __init__(self, wavenumber, theta):
        self.wavenumber = float(wavenumber)
        self.theta = float(theta)

    def envelope(self, x, z):
        return np.exp(1j * self.wavenumber * self.theta * np.asarray(x, dtype=float))

    def weak_wavenumber(self, x, z):
        return complex(self.wavenumber * self.theta)
