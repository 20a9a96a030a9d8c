"""Weak values of the Poynting vector and mean-momentum flow lines.

The central quantity is the complex weak transverse wavenumber

    k_w(x, z) = (-i du/dx) / u

of the beam envelope: Re(k_w) is the transverse phase gradient and Im(k_w)
is -(d rho/dx)/(2 rho).  Flow lines integrate dx/dz = Re(k_w)/k with an
adaptive Dormand-Prince 5(4) pair; parametrizing by z instead of t assumes
the paraxial identity between the longitudinal momentum density and k/omega
times the energy density, which holds to O(1/(k sigma0)^2) here.  Because
k_w is evaluated on the amplitude-normalized envelope, every flow line is
exactly independent of the overall beam amplitude (the photon content of
the beam).
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .beam import (BeamModel, envelope, envelope_derivatives_normalized,
                   fields_at)
from .errors import NodeError, StepFailure

NODE_EPS_FRACTION = 1e-12

FLAG_OK = "ok"
FLAG_NODE = "node"
FLAG_STEP_FAILURE = "step_failure"
FLAG_EXITED = "exited"

_STATUS_FLAGS = {
    kernels.STATUS_OK: FLAG_OK,
    kernels.STATUS_NODE: FLAG_NODE,
    kernels.STATUS_STEP_FAILURE: FLAG_STEP_FAILURE,
    kernels.STATUS_EXITED: FLAG_EXITED,
}


@dataclass(frozen=True)
class StepControl:
    """Adaptive step-size tolerances (in the model's length unit)."""

    rtol: float = 1e-9
    atol: float = 1e-12
    max_steps: int = 200_000


@dataclass(frozen=True)
class Domain:
    """Box the flow lines must stay inside; exits are flagged, not clipped."""

    x_min: float
    x_max: float

    @classmethod
    def for_model(cls, model):
        half = 0.5 * model.slit_separation + 12.0 * model.waist
        return cls(-half, half)


@dataclass(frozen=True)
class WeakValueSample:
    """Weak Poynting vector, weak energy density and weak wavenumber at a point."""

    x: float
    z: float
    k_w: complex
    S_w: np.ndarray
    W_w: float
    Q_density: float


@dataclass
class FlowLine:
    """One mean-momentum flow line, sampled at strictly increasing z."""

    zs: np.ndarray
    xs: np.ndarray
    start_weight: float
    flag: str = FLAG_OK
    stats: dict = field(default_factory=dict)

    @property
    def points(self):
        return list(zip(self.xs, self.zs))

    @property
    def truncated(self):
        return self.flag != FLAG_OK


def node_threshold(model, z_lo, z_hi, x_lo=None, x_hi=None):
    """Absolute node guard for the normalized envelope over a domain box.

    The guard is a fixed fraction of the peak normalized amplitude, so it is
    invariant under amplitude rescaling of the beam.
    """
    if x_lo is None or x_hi is None:
        dom = Domain.for_model(model)
        x_lo = dom.x_min if x_lo is None else x_lo
        x_hi = dom.x_max if x_hi is None else x_hi
    xs = np.linspace(x_lo, x_hi, 257)
    zs = np.linspace(z_lo, z_hi, 33)
    from .beam import envelope_normalized

    vals = np.abs(envelope_normalized(model, xs[None, :], zs[:, None]))
    return NODE_EPS_FRACTION * float(vals.max())


def weak_wavenumber_values(u, du_dx):
    """k_w from envelope values: (-i du/dx)/u."""
    return -1j * (np.asarray(du_dx) / np.asarray(u))


def weak_wavenumber(model, x, z, eps_node=None):
    """k_w alone, via the compiled kernel (fast path for pointwise scans)."""
    if eps_node is None:
        eps_node = node_threshold(model, min(z, 0.0), max(z, 1e-9))
    kw, status = kernels.kw_point(model.kernel_params, float(x), float(z), eps_node)
    if status != kernels.STATUS_OK:
        raise NodeError("weak value requested at an interference null", x=x, z=z)
    return kw


def weak_momentum(model, x, z, eps_node=None):
    """Weak Poynting vector, weak energy density and k_w at (x, z), y = 0.

    S_w is assembled from the complex field bilinears E x conj(B); with the
    default x-polarization its transverse component reduces exactly to
    rho * k * k_w.  W_w = (|E|^2 + |B|^2)/2 + Q_density, where Q_density is
    the quantum-potential energy density of the envelope.

    Raises NodeError when |u| falls below the node guard.
    """
    if eps_node is None:
        eps_node = node_threshold(model, min(z, 0.0), max(z, 1e-9))
    d = envelope_derivatives_normalized(model, x, z)
    if abs(d["u"]) <= eps_node:
        raise NodeError("weak value requested at an interference null", x=x, z=z)
    du_over_u = d["du_dx"] / d["u"]
    d2u_over_u = d["d2u_dx2"] / d["u"]
    k_w = -1j * du_over_u
    sample = fields_at(model, x, 0.0, z)
    rho = float(abs(envelope(model, x, z)) ** 2)
    curv = np.real(d2u_over_u) + np.imag(du_over_u) ** 2
    q_density = -0.5 * rho * float(curv)
    classical = 0.5 * float(np.sum(np.abs(sample.E) ** 2 + np.abs(sample.B) ** 2))
    s_w = np.cross(sample.E, np.conj(sample.B))
    return WeakValueSample(
        x=float(x), z=float(z), k_w=complex(k_w), S_w=s_w,
        W_w=classical + q_density, Q_density=q_density,
    )


def weak_field_grid(model, xs, zs, eps_node=None):
    """Vectorized weak-value field on the grid zs x xs.

    Returns a dict of arrays of shape (len(zs), len(xs)): k_w, S_w (leading
    axis 3), W_w, Q_density, rho, plus a boolean node mask (masked cells hold
    NaN values).
    """
    xs = np.asarray(xs, dtype=float)
    zs = np.asarray(zs, dtype=float)
    X = np.broadcast_to(xs[None, :], (zs.size, xs.size))
    Z = np.broadcast_to(zs[:, None], (zs.size, xs.size))
    d = envelope_derivatives_normalized(model, X, Z)
    scale = model._slit_form[3]
    u_hat = d["u"]
    if eps_node is None:
        eps_node = NODE_EPS_FRACTION * float(np.abs(u_hat).max())
    mask = np.abs(u_hat) <= eps_node
    with np.errstate(divide="ignore", invalid="ignore"):
        du_over_u = d["du_dx"] / d["u"]
        d2u_over_u = d["d2u_dx2"] / d["u"]
        k_w = -1j * du_over_u
        sample = fields_at(model, X, 0.0, Z)
        rho = abs(scale) ** 2 * np.abs(d["u"]) ** 2
        curv = np.real(d2u_over_u) + np.imag(du_over_u) ** 2
        q_density = -0.5 * rho * curv
    classical = 0.5 * np.sum(np.abs(sample.E) ** 2 + np.abs(sample.B) ** 2, axis=0)
    s_w = np.cross(sample.E, np.conj(sample.B), axis=0)
    w_w = classical + q_density
    k_w[mask] = np.nan
    s_w[:, mask] = np.nan
    w_w[mask] = np.nan
    q_density[mask] = np.nan
    return {
        "x": X, "z": Z, "k_w": k_w, "S_w": s_w, "W_w": w_w,
        "Q_density": q_density, "rho": rho, "mask": mask,
        "eps_node": eps_node,
    }


def _line_from_kernel(zs, xs, status, n_acc, n_rej, weight):
    return FlowLine(
        zs=np.asarray(zs, dtype=float),
        xs=np.asarray(xs, dtype=float),
        start_weight=weight,
        flag=_STATUS_FLAGS[status],
        stats={"n_accepted": n_acc, "n_rejected": n_rej, "backend": kernels.backend_name()},
    )


def integrate_flow_line(model, x0, z0, z1, step_control=None, z_out=None,
                        domain=None, eps_node=None, weight=None):
    """Integrate one flow line dx/dz = Re(k_w)/k from (x0, z0) to z1.

    ``model`` is either a BeamModel (fast kernel path) or a callable
    ``kw_fn(x, z) -> complex`` (generic path, e.g. a reconstructed field).
    ``z_out``: optional strictly increasing output positions; without it the
    accepted integrator steps are recorded.

    Raises NodeError if the launch point sits at a null and StepFailure if
    the integrator cannot start; mid-flight nodes and domain exits truncate
    the line and set its flag.
    """
    if not z1 > z0:
        raise ValueError("z1 must exceed z0")
    sc = step_control or StepControl()
    if isinstance(model, BeamModel):
        if domain is None:
            domain = Domain.for_model(model)
        if eps_node is None:
            eps_node = node_threshold(model, z0, z1, domain.x_min, domain.x_max)
        if weight is None:
            weight = float(abs(envelope(model, x0, z0)) ** 2)
        z_arr = None if z_out is None else np.ascontiguousarray(z_out, dtype=float)
        zs, xs, status, n_acc, n_rej = kernels.integrate_line(
            model.kernel_params, float(x0), float(z0), float(z1),
            sc.rtol, sc.atol, eps_node,
            domain.x_min, domain.x_max, z_arr, sc.max_steps,
        )
        if len(zs) == 0:
            if status == kernels.STATUS_NODE:
                raise NodeError("flow line launched at an interference null", x=x0, z=z0)
            if status == kernels.STATUS_STEP_FAILURE:
                raise StepFailure("integrator failed at launch")
        line = _line_from_kernel(zs, xs, status, n_acc, n_rej, weight)
    else:
        line = _integrate_generic_kw(model, x0, z0, z1, sc, z_out, domain, weight)
    return line


def _integrate_generic_kw(kw_fn, x0, z0, z1, sc, z_out, domain, weight):
    x_lo = -math.inf if domain is None else domain.x_min
    x_hi = math.inf if domain is None else domain.x_max
    inv_k = 1.0 / _generic_k(kw_fn)

    def rhs2(z, y):
        kw = kw_fn(float(y[0]), float(z))
        return np.array([kw.real * inv_k], dtype=float)

    ts, ys, status, n_acc, n_rej = rk45(
        rhs2, np.array([float(x0)]), float(z0), float(z1),
        rtol=sc.rtol, atol=sc.atol, t_eval=z_out, max_steps=sc.max_steps,
        bounds=(np.array([x_lo]), np.array([x_hi])),
    )
    if len(ts) == 0 and status == kernels.STATUS_NODE:
        raise NodeError("flow line launched at an interference null", x=x0, z=z0)
    return FlowLine(
        zs=np.asarray(ts, dtype=float),
        xs=np.asarray([y[0] for y in ys], dtype=float),
        start_weight=0.0 if weight is None else weight,
        flag=_STATUS_FLAGS[status],
        stats={"n_accepted": n_acc, "n_rejected": n_rej, "backend": "generic"},
    )


def _generic_k(kw_fn):
    return getattr(kw_fn, "wavenumber", 1.0)


@dataclass(frozen=True)
class LaunchSpec:
    """Bundle launch positions: uniform grid or intensity-stratified quantiles."""

    n: int
    x_min: float
    x_max: float
    kind: str = "uniform"

    def positions(self, model, z0):
        if self.kind == "uniform":
            return np.linspace(self.x_min, self.x_max, self.n)
        if self.kind == "intensity":
            grid = np.linspace(self.x_min, self.x_max, 4097)
            pdf = np.abs(envelope(model, grid, z0)) ** 2
            mids = 0.5 * (pdf[1:] + pdf[:-1])
            cdf = np.concatenate([[0.0], np.cumsum(mids * np.diff(grid))])
            cdf /= cdf[-1]
            quantiles = (np.arange(self.n) + 0.5) / self.n
            return np.interp(quantiles, cdf, grid)
        raise ValueError(f"unknown launch kind {self.kind!r}")


@dataclass
class BundleResult:
    lines: list
    x0: np.ndarray
    errors: list


def flow_bundle(model, launch, z0, z1, step_control=None, z_out=None,
                domain=None, threads=1):
    """Integrate a bundle of flow lines; per-line failures never abort the bundle.

    Lines are ordered by launch position; weights are the source intensity
    |u(x0, z0)|^2.  Results are assembled by index, so they are independent
    of thread count and completion order.
    """
    if domain is None:
        domain = Domain.for_model(model)
    sc = step_control or StepControl()
    x0s = launch.positions(model, z0)
    eps_node = node_threshold(model, z0, z1, domain.x_min, domain.x_max)

    def work(i):
        return integrate_flow_line(
            model, x0s[i], z0, z1, step_control=sc, z_out=z_out,
            domain=domain, eps_node=eps_node,
        )

    lines = [None] * len(x0s)
    errors = []
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {i: pool.submit(work, i) for i in range(len(x0s))}
            for i, fut in futures.items():
                try:
                    lines[i] = fut.result()
                except (NodeError, StepFailure) as exc:
                    errors.append((i, f"{type(exc).__name__}: {exc}"))
    else:
        for i in range(len(x0s)):
            try:
                lines[i] = work(i)
            except (NodeError, StepFailure) as exc:
                errors.append((i, f"{type(exc).__name__}: {exc}"))
    return BundleResult(lines=lines, x0=x0s, errors=errors)


def rk45(f, y0, t0, t1, rtol=1e-9, atol=1e-12, t_eval=None, max_steps=1_000_000,
         bounds=None, guard=None):
    """Generic adaptive Dormand-Prince 5(4) integrator for vector ODEs.

    Same tableau and step-control law as the compiled beam kernel.  ``f``
    may raise NodeError to stop the trajectory (flagged, not fatal);
    ``bounds`` is an optional (lower, upper) pair of per-component limits;
    ``guard(t, y)`` may return False to stop.

    Returns (ts, ys, status, n_accepted, n_rejected).
    """
    a = [
        (1 / 5,),
        (3 / 40, 9 / 40),
        (44 / 45, -56 / 15, 32 / 9),
        (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
        (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    ]
    c = (1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0)
    b = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84)
    e = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)

    y = np.array(y0, dtype=complex if np.iscomplexobj(y0) else float)
    t = float(t0)
    span = t1 - t0
    ts, ys = [], []
    n_acc = n_rej = 0
    dense = t_eval is not None
    j_out = 0
    t_out = np.asarray(t_eval, dtype=float) if dense else None

    def emit(tv, yv):
        ts.append(tv)
        ys.append(np.array(yv))

    try:
        f1 = np.asarray(f(t, y))
    except NodeError:
        return ts, ys, kernels.STATUS_NODE, n_acc, n_rej
    if guard is not None and not guard(t, y):
        return ts, ys, kernels.STATUS_NODE, n_acc, n_rej
    if dense:
        while j_out < t_out.size and t_out[j_out] <= t0:
            emit(t0, y)
            j_out += 1
    else:
        emit(t0, y)

    h = span * 1e-3
    hmin = span * 1e-14
    steps = 0
    status = kernels.STATUS_OK
    while t < t1:
        if steps >= max_steps or h < hmin:
            status = kernels.STATUS_STEP_FAILURE
            break
        steps += 1
        final = t + h >= t1
        if final:
            h = t1 - t
        ks = [f1]
        try:
            for i, row in enumerate(a):
                yi = y + h * sum(row[j] * ks[j] for j in range(len(row)))
                ks.append(np.asarray(f(t + c[i] * h, yi)))
            y_new = y + h * sum(b[j] * ks[j] for j in range(6))
            t_new = t1 if final else t + h   # exact arrival, no ulp shortfall
            k7 = np.asarray(f(t_new, y_new))
        except NodeError:
            status = kernels.STATUS_NODE
            break
        ks.append(k7)
        err = h * sum(e[j] * ks[j] for j in range(7))
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err_norm = float(np.sqrt(np.mean(np.abs(err / scale) ** 2)))
        if err_norm <= 1.0:
            n_acc += 1
            if bounds is not None:
                lo, hi = bounds
                yr = y_new.real if np.iscomplexobj(y_new) else y_new
                if np.any(yr < lo) or np.any(yr > hi):
                    status = kernels.STATUS_EXITED
                    break
            if guard is not None and not guard(t_new, y_new):
                status = kernels.STATUS_NODE
                break
            if dense:
                while j_out < t_out.size and t_out[j_out] <= t_new:
                    th = (t_out[j_out] - t) / h
                    th2, th3 = th * th, th * th * th
                    yq = ((2 * th3 - 3 * th2 + 1) * y + (th3 - 2 * th2 + th) * h * f1
                          + (-2 * th3 + 3 * th2) * y_new + (th3 - th2) * h * k7)
                    emit(t_out[j_out], yq)
                    j_out += 1
            else:
                emit(t_new, y_new)
            t, y, f1 = t_new, y_new, k7
            factor = 5.0 if err_norm == 0.0 else min(5.0, max(0.2, 0.9 * err_norm ** -0.2))
            h *= factor
        else:
            n_rej += 1
            h *= max(0.2, 0.9 * err_norm ** -0.2)
    return ts, ys, status, n_acc, n_rej
