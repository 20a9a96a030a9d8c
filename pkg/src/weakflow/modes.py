"""Normal-mode Bohm field theory on a finite, conjugation-closed mode set.

The transverse vector potential is expanded over plane-wave modes of a box
of volume V,

    A(r, t) = (1/sqrt(V)) sum_j eps_j q_j(t) exp(i k_j . r),

with polarization vectors eps_j orthogonal to k_j.  Reality of A requires
the listed modes to close under conjugation: every (k, mu) has a partner
(-k, mu) with the same eps and q_{-k} = conj(q_k).  The independent beables
are therefore one complex amplitude per mode *pair*; a pair is a
two-dimensional harmonic oscillator of frequency kappa = |k| whose two
circular quanta are the +k and -k photons.

Quantum states expose closed-form amplitude R and phase S of the wave
function over the pair amplitudes, so the quantum potential, the
Hamilton-Jacobi and continuity residuals, the guidance velocity and the
energy/momentum densities are all evaluated analytically.  The zero-point
energy of the set is sum_modes kappa/2 (= kappa per pair) and sits entirely
in the quantum potential at q = 0.

Wirtinger convention throughout: for q = x + iy,
d/dq = (d/dx - i d/dy)/2 and d/dq* = (d/dx + i d/dy)/2; the guidance
equation is dq/dt = dS/dq*.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import NodeError, StepFailure
from .weakfield import StepControl, rk45

_NODE_FRACTION = 1e-12


def _lex_positive(n):
    for component in n:
        if component > 0:
            return True
        if component < 0:
            return False
    return False


def _polarization_basis(k):
    """Deterministic orthonormal pair perpendicular to k (shared by +-k)."""
    khat = k / np.linalg.norm(k)
    zhat = np.array([0.0, 0.0, 1.0])
    cross = np.cross(khat, zhat)
    if np.linalg.norm(cross) < 1e-12:
        e1 = np.array([1.0, 0.0, 0.0])
    else:
        e1 = cross / np.linalg.norm(cross)
    e2 = np.cross(khat, e1)
    e2 /= np.linalg.norm(e2)
    return e1, e2


@dataclass(frozen=True)
class Mode:
    """One plane-wave mode: integer lattice triple n, k = 2*pi*n/L, mu in {1, 2}."""

    n: tuple
    k: np.ndarray
    mu: int
    eps: np.ndarray

    @property
    def kappa(self):
        return float(np.linalg.norm(self.k))


class ModeSet:
    """Conjugation-closed list of modes over a cubic box of side ``box_length``."""

    def __init__(self, modes, box_length):
        self.modes = list(modes)
        self.box_length = float(box_length)
        self.volume = self.box_length ** 3
        self._validate()
        self._index_pairs()

    @classmethod
    def plane_waves(cls, entries, box_length):
        """Build a closed set from (n_triple, mu) entries; -n partners are added.

        Duplicate entries (including implied partners) are rejected.
        """
        seen = set()
        modes = []
        for n, mu in entries:
            n = tuple(int(c) for c in n)
            if all(c == 0 for c in n):
                raise ValueError("zero wave vector is not allowed (kappa must be positive)")
            if mu not in (1, 2):
                raise ValueError("polarization index must be 1 or 2")
            n_canon = n if _lex_positive(n) else tuple(-c for c in n)
            k_canon = 2.0 * math.pi * np.array(n_canon, dtype=float) / box_length
            e1, e2 = _polarization_basis(k_canon)
            eps = e1 if mu == 1 else e2
            for sign in (1, -1):
                key = (tuple(sign * c for c in n), mu)
                if key in seen:
                    raise ValueError(f"duplicate mode {key}")
                seen.add(key)
                kvec = 2.0 * math.pi * np.array(key[0], dtype=float) / box_length
                modes.append(Mode(n=key[0], k=kvec, mu=mu, eps=eps))
        return cls(modes, box_length)

    def _validate(self):
        keys = {(m.n, m.mu) for m in self.modes}
        if len(keys) != len(self.modes):
            raise ValueError("duplicate modes in set")
        for m in self.modes:
            if m.kappa <= 0.0:
                raise ValueError("kappa must be positive for every mode")
            if abs(float(np.dot(m.eps, m.k))) > 1e-9 * m.kappa:
                raise ValueError("polarization vector must be orthogonal to k")
            partner = (tuple(-c for c in m.n), m.mu)
            if partner not in keys:
                raise ValueError(f"mode {(m.n, m.mu)} has no conjugate partner")

    def _index_pairs(self):
        index = {(m.n, m.mu): i for i, m in enumerate(self.modes)}
        self.rep_indices = []
        self.partner_of_rep = []
        self.pair_slot = {}
        for i, m in enumerate(self.modes):
            if _lex_positive(m.n):
                j = index[(tuple(-c for c in m.n), m.mu)]
                r = len(self.rep_indices)
                self.rep_indices.append(i)
                self.partner_of_rep.append(j)
                self.pair_slot[i] = (r, "rep")
                self.pair_slot[j] = (r, "partner")
        self.kappa_reps = np.array([self.modes[i].kappa for i in self.rep_indices])
        self.kappas = np.array([m.kappa for m in self.modes])

    @property
    def n_modes(self):
        return len(self.modes)

    @property
    def n_pairs(self):
        return len(self.rep_indices)

    def zero_point_energy(self):
        """sum_modes kappa/2, accumulated pairwise (= kappa per pair)."""
        return float(np.sum(self.kappa_reps))

    def integration_grid(self):
        """Uniform box grid dense enough to integrate every pair harmonic exactly."""
        n_abs = np.array([[abs(c) for c in m.n] for m in self.modes])
        n_max = n_abs.max(axis=0)
        shape = [int(4 * nm + 1) if nm > 0 else 1 for nm in n_max]
        axes = [np.arange(s) * (self.box_length / s) for s in shape]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
        weight = self.volume / grid.shape[0]
        return grid, weight


class ModeConfiguration:
    """Field beables at an instant: one complex amplitude per pair plus time."""

    def __init__(self, modeset, q_reps, t=0.0):
        q_reps = np.asarray(q_reps, dtype=complex)
        if q_reps.shape != (modeset.n_pairs,):
            raise ValueError("need one amplitude per mode pair")
        self.modeset = modeset
        self.q_reps = q_reps
        self.t = float(t)

    @classmethod
    def zero(cls, modeset, t=0.0):
        return cls(modeset, np.zeros(modeset.n_pairs, dtype=complex), t)

    @classmethod
    def from_full(cls, modeset, q_full, t=0.0, tol=1e-12):
        """Build from per-mode amplitudes, enforcing q_{-k} = conj(q_k)."""
        q_full = np.asarray(q_full, dtype=complex)
        if q_full.shape != (modeset.n_modes,):
            raise ValueError("need one amplitude per listed mode")
        q_reps = q_full[modeset.rep_indices]
        partners = q_full[modeset.partner_of_rep]
        if not np.allclose(partners, np.conj(q_reps), rtol=0.0, atol=tol * (1 + np.abs(q_reps).max(initial=0.0))):
            raise ValueError("configuration violates the conjugation constraint")
        return cls(modeset, q_reps, t)

    def q_full(self):
        q = np.empty(self.modeset.n_modes, dtype=complex)
        q[self.modeset.rep_indices] = self.q_reps
        q[self.modeset.partner_of_rep] = np.conj(self.q_reps)
        return q


def _pair_coefficients(modeset, values):
    """Split per-mode values into (rep slot, partner slot) arrays over pairs."""
    values = np.asarray(values, dtype=complex)
    return values[modeset.rep_indices], values[modeset.partner_of_rep]


class FieldState:
    """Base class: closed-form wave function over the pair amplitudes."""

    def __init__(self, modeset):
        self.modeset = modeset

    # subclasses return a dict with per-pair arrays dq, dqs, dqdqs (Wirtinger
    # derivatives of ln F) and scalars dt, val, where
    # Psi = F(q, t) * exp(-sum_pairs kappa |q|^2)
    def _lnF(self, q_reps, t):
        raise NotImplementedError

    def log_amplitude_phase(self, cfg):
        """(ln R, S) at the configuration."""
        d = self._lnF(cfg.q_reps, cfg.t)
        gauss = float(np.sum(self.modeset.kappa_reps * np.abs(cfg.q_reps) ** 2))
        return d["val"].real - gauss, d["val"].imag

    def amplitude_phase(self, cfg):
        ln_r, s = self.log_amplitude_phase(cfg)
        return math.exp(ln_r), s

    def _derivatives(self, cfg):
        k = self.modeset.kappa_reps
        q = cfg.q_reps
        d = self._lnF(q, cfg.t)
        dq_lnR = 0.5 * (d["dq"] + np.conj(d["dqs"])) - k * np.conj(q)
        dq_S = (d["dq"] - np.conj(d["dqs"])) / 2j
        dqdqs_lnR = np.real(d["dqdqs"]) - k
        dqdqs_S = np.imag(d["dqdqs"])
        return {
            "dq_lnR": dq_lnR, "dq_S": dq_S,
            "dqdqs_lnR": dqdqs_lnR, "dqdqs_S": dqdqs_S,
            "dt_lnR": d["dt"].real, "dt_S": d["dt"].imag,
        }

    def _velocity(self, q_reps, t):
        """dq/dt = dS/dq* per pair; subclasses provide cheaper closed forms."""
        d = self._lnF(q_reps, t)
        return np.conj((d["dq"] - np.conj(d["dqs"])) / 2j)


class GroundState(FieldState):
    """Field vacuum: R = exp(-sum (kappa/2) q*q), S = -(sum kappa/2) t."""

    def _lnF(self, q_reps, t):
        e0 = self.modeset.zero_point_energy()
        zero = np.zeros(self.modeset.n_pairs, dtype=complex)
        return {"dq": zero, "dqs": zero.copy(), "dqdqs": zero.copy(),
                "dt": complex(0.0, -e0), "val": complex(0.0, -e0 * t)}

    def _velocity(self, q_reps, t):
        return np.zeros(self.modeset.n_pairs, dtype=complex)


class CoherentState(FieldState):
    """Independent coherent amplitude per listed mode (Glauber alpha).

    The +k and -k members of a pair displace the two circular quanta of the
    pair oscillator; the exact evolving wave function carries the cross term
    -alpha_+ alpha_- e^{-2 i kappa t} in ln F.
    """

    def __init__(self, modeset, alphas):
        super().__init__(modeset)
        alphas = np.asarray(alphas, dtype=complex)
        if alphas.shape != (modeset.n_modes,):
            raise ValueError("need one alpha per listed mode")
        self.alphas = alphas
        self._a_plus, self._a_minus = _pair_coefficients(modeset, alphas)

    def _lnF(self, q_reps, t):
        k = self.modeset.kappa_reps
        e0 = self.modeset.zero_point_energy()
        rot = np.exp(-1j * k * t)
        cp = np.sqrt(2.0 * k) * self._a_plus * rot
        cm = np.sqrt(2.0 * k) * self._a_minus * rot
        cross = cp * cm / (2.0 * k)
        norm = -0.5 * float(np.sum(np.abs(self._a_plus) ** 2 + np.abs(self._a_minus) ** 2))
        val = (np.sum(cp * np.conj(q_reps) + cm * q_reps - cross)
               + norm - 1j * e0 * t)
        dt = (np.sum(-1j * k * (cp * np.conj(q_reps) + cm * q_reps) + 2j * k * cross)
              - 1j * e0)
        return {"dq": cm, "dqs": cp,
                "dqdqs": np.zeros(self.modeset.n_pairs, dtype=complex),
                "dt": complex(dt), "val": complex(val)}

    def _velocity(self, q_reps, t):
        k = self.modeset.kappa_reps
        rot = np.sqrt(2.0 * k) * np.exp(-1j * k * t)
        return np.conj((self._a_minus * rot - np.conj(self._a_plus * rot)) / 2j)


class SinglePhotonState(FieldState):
    """One photon distributed over the listed modes with complex weights f.

    Psi = [sum_j f_j sqrt(2 kappa_j) Q_j] Phi_0 with Q_j the creation
    monomial of mode j (q* on the rep slot of its pair, q on the partner
    slot), each term carrying its own phase e^{-i kappa_j t}.
    """

    def __init__(self, modeset, weights):
        super().__init__(modeset)
        weights = np.asarray(weights, dtype=complex)
        if weights.shape != (modeset.n_modes,):
            raise ValueError("need one weight per listed mode")
        total = float(np.sum(np.abs(weights) ** 2))
        if abs(total - 1.0) > 1e-9:
            raise ValueError("weights must be normalized: sum |f|^2 = 1")
        self.weights = weights
        self._f_plus, self._f_minus = _pair_coefficients(modeset, weights)

    @classmethod
    def sharp(cls, modeset, mode_index):
        f = np.zeros(modeset.n_modes, dtype=complex)
        f[mode_index] = 1.0
        return cls(modeset, f)

    @classmethod
    def gaussian_packet(cls, modeset, center_n, sigma_in_modes, mu=1):
        """Weights f ~ exp(-|n - n_center|^2 / (4 sigma^2)), explicitly normalized."""
        center = np.array(center_n, dtype=float)
        f = np.zeros(modeset.n_modes, dtype=complex)
        for i, m in enumerate(modeset.modes):
            if m.mu != mu:
                continue
            dn = np.array(m.n, dtype=float) - center
            f[i] = math.exp(-float(np.dot(dn, dn)) / (4.0 * sigma_in_modes ** 2))
        norm = math.sqrt(float(np.sum(np.abs(f) ** 2)))
        if norm == 0.0:
            raise ValueError("no modes under the packet envelope")
        return cls(modeset, f / norm)

    def _coeffs(self, t):
        k = self.modeset.kappa_reps
        rot = np.exp(-1j * k * t)
        c_plus = self._f_plus * np.sqrt(2.0 * k) * rot
        c_minus = self._f_minus * np.sqrt(2.0 * k) * rot
        return c_plus, c_minus

    def _lnF(self, q_reps, t):
        k = self.modeset.kappa_reps
        e0 = self.modeset.zero_point_energy()
        c_plus, c_minus = self._coeffs(t)
        terms_plus = c_plus * np.conj(q_reps)
        terms_minus = c_minus * q_reps
        g = complex(np.sum(terms_plus + terms_minus))
        g_scale = float(np.sqrt(np.sum(np.abs(c_plus) ** 2 + np.abs(c_minus) ** 2))
                        * max(np.sqrt(np.sum(np.abs(q_reps) ** 2)), 1e-300))
        if abs(g) <= _NODE_FRACTION * g_scale:
            raise NodeError("single-photon wave function node (R = 0)")
        gdot = complex(np.sum(-1j * k * (terms_plus + terms_minus)))
        return {"dq": c_minus / g, "dqs": c_plus / g,
                "dqdqs": -(c_plus * c_minus) / g ** 2,
                "dt": gdot / g - 1j * e0,
                "val": np.log(g) - 1j * e0 * t}

    def _velocity(self, q_reps, t):
        c_plus, c_minus = self._coeffs(t)
        g = complex(np.sum(c_plus * np.conj(q_reps) + c_minus * q_reps))
        g_scale = float(np.sqrt(np.sum(np.abs(c_plus) ** 2 + np.abs(c_minus) ** 2))
                        * max(np.sqrt(np.sum(np.abs(q_reps) ** 2)), 1e-300))
        if abs(g) <= _NODE_FRACTION * g_scale:
            raise NodeError("single-photon wave function node (R = 0)")
        return np.conj((c_minus / g - np.conj(c_plus / g)) / 2j)


def quantum_potential(state, cfg):
    """Q = -sum_pairs (1/R) d2R/dq dq* from closed-form state derivatives.

    Written over the listed modes this is the conventional
    -sum (1/2R) d2R/dq* dq with pair-aware derivatives.
    """
    d = state._derivatives(cfg)
    return float(-np.sum(d["dqdqs_lnR"] + np.abs(d["dq_lnR"]) ** 2))


def hj_residual(state, cfg):
    """|dS/dt + sum_pairs(|dS/dq|^2 + kappa^2 |q|^2) + Q|.

    Vanishes identically for the closed-form states; evaluated with analytic
    derivatives, so any nonzero value is floating-point noise.
    """
    d = state._derivatives(cfg)
    k = state.modeset.kappa_reps
    q = cfg.q_reps
    kinetic = float(np.sum(np.abs(d["dq_S"]) ** 2))
    potential = float(np.sum(k ** 2 * np.abs(q) ** 2))
    qpot = float(-np.sum(d["dqdqs_lnR"] + np.abs(d["dq_lnR"]) ** 2))
    return abs(d["dt_S"] + kinetic + potential + qpot)


def continuity_residual(state, cfg):
    """Probability-conservation residual per unit R^2.

    |2 dlnR/dt + sum_pairs 2 Re[2 dlnR/dq dS/dq* + d2S/dq dq*]|; the 1/R^2
    scaling keeps the figure in natural (frequency) units.
    """
    d = state._derivatives(cfg)
    total = 2.0 * d["dt_lnR"] + float(np.sum(
        2.0 * np.real(2.0 * d["dq_lnR"] * np.conj(d["dq_S"])) + 2.0 * d["dqdqs_S"]
    ))
    return abs(total)


def guidance_velocity(state, cfg):
    """Beable velocity per pair: dq/dt = dS/dq*."""
    return state._velocity(cfg.q_reps, cfg.t)


def velocity_full(state, cfg):
    """Per-listed-mode velocities (partners are conjugates)."""
    v = guidance_velocity(state, cfg)
    out = np.empty(state.modeset.n_modes, dtype=complex)
    out[state.modeset.rep_indices] = v
    out[state.modeset.partner_of_rep] = np.conj(v)
    return out


def reconstruct_potential(modeset, cfg, rs):
    """Real vector potential A(r) from the configuration; rs is (N, 3)."""
    rs = np.atleast_2d(np.asarray(rs, dtype=float))
    q = cfg.q_full()
    phases = np.exp(1j * rs @ np.array([m.k for m in modeset.modes]).T)
    eps = np.array([m.eps for m in modeset.modes])
    a = (phases * q[None, :]) @ eps / math.sqrt(modeset.volume)
    return a


def _field_el_mag(state, cfg, rs):
    rs = np.atleast_2d(np.asarray(rs, dtype=float))
    ms = state.modeset
    q = cfg.q_full()
    v = velocity_full(state, cfg)
    kvecs = np.array([m.k for m in ms.modes])
    eps = np.array([m.eps for m in ms.modes])
    curl = np.cross(1j * kvecs, eps)
    phases = np.exp(1j * rs @ kvecs.T)
    root_v = math.sqrt(ms.volume)
    e_field = -(phases * v[None, :]) @ eps / root_v
    b_field = (phases * q[None, :]) @ curl / root_v
    return np.real(e_field), np.real(b_field)


def energy_density(state, cfg, rs, normal_ordered=False):
    """(E^2 + B^2)/2 + Q/V at points rs; E is the beable-velocity field.

    The quantum potential is a configuration-level energy and enters as a
    uniform density Q/V, so the box integral recovers the Bohm total energy
    -dS/dt.  ``normal_ordered`` subtracts the zero-point density.
    """
    e_field, b_field = _field_el_mag(state, cfg, rs)
    classical = 0.5 * (np.sum(e_field ** 2, axis=-1) + np.sum(b_field ** 2, axis=-1))
    q_term = quantum_potential(state, cfg) / state.modeset.volume
    if normal_ordered:
        q_term -= state.modeset.zero_point_energy() / state.modeset.volume
    return classical + q_term


def momentum_density(state, cfg, rs):
    """Poynting density E x B of the beable fields at points rs (real, (N, 3))."""
    e_field, b_field = _field_el_mag(state, cfg, rs)
    return np.cross(e_field, b_field)


def total_momentum(state, cfg):
    """Box integral of the momentum density, evaluated analytically."""
    ms = state.modeset
    v = guidance_velocity(state, cfg)
    k_reps = np.array([ms.modes[i].k for i in ms.rep_indices])
    contrib = -2.0 * np.imag(v * np.conj(cfg.q_reps))
    return k_reps.T @ contrib


def total_energy(state, normal_ordered=False):
    """Mean total energy of the state; normal ordering subtracts sum kappa/2."""
    ms = state.modeset
    zero_point = ms.zero_point_energy()
    if isinstance(state, GroundState):
        total = zero_point
    elif isinstance(state, SinglePhotonState):
        total = zero_point + float(np.sum(np.abs(state.weights) ** 2 * ms.kappas))
    elif isinstance(state, CoherentState):
        total = zero_point + float(np.sum(np.abs(state.alphas) ** 2 * ms.kappas))
    else:
        raise TypeError(f"unsupported state {type(state).__name__}")
    if normal_ordered:
        total -= zero_point
    return total


def bohm_total_energy(state, cfg):
    """-dS/dt at the configuration (classical field energy plus Q)."""
    d = state._derivatives(cfg)
    return -d["dt_S"]


def classical_energy(state, cfg):
    """H(q, qdot) of the beable field: sum_pairs(|qdot|^2 + kappa^2 |q|^2)."""
    v = guidance_velocity(state, cfg)
    k = state.modeset.kappa_reps
    return float(np.sum(np.abs(v) ** 2 + k ** 2 * np.abs(cfg.q_reps) ** 2))


def detection_probability(state, rs):
    """Photon absorption probability density at rs, normalized over the box.

    For a single-photon state P(r) = |sum_j f_j sqrt(kappa_j/2V) eps_j
    e^{i k_j r}|^2 / (sum |f|^2 kappa/2); a coherent state uses its alphas as
    weights; the ground state detects nothing.
    """
    ms = state.modeset
    rs = np.atleast_2d(np.asarray(rs, dtype=float))
    if isinstance(state, GroundState):
        return np.zeros(rs.shape[0])
    if isinstance(state, SinglePhotonState):
        weights = state.weights
    elif isinstance(state, CoherentState):
        weights = state.alphas
    else:
        raise TypeError(f"unsupported state {type(state).__name__}")
    kvecs = np.array([m.k for m in ms.modes])
    eps = np.array([m.eps for m in ms.modes])
    coeff = weights * np.sqrt(ms.kappas / (2.0 * ms.volume))
    phases = np.exp(1j * rs @ kvecs.T)
    amp = (phases * coeff[None, :]) @ eps
    norm = float(np.sum(np.abs(weights) ** 2 * ms.kappas / 2.0))
    if norm == 0.0:
        return np.zeros(rs.shape[0])
    return np.sum(np.abs(amp) ** 2, axis=-1) / norm


@dataclass
class BeableTrajectory:
    ts: np.ndarray
    qs: np.ndarray          # (n_samples, n_pairs) complex
    flag: str
    stats: dict = field(default_factory=dict)

    def configuration(self, modeset, i):
        return ModeConfiguration(modeset, self.qs[i], self.ts[i])


def evolve_beables(state, cfg0, t0, t1, step_control=None, t_eval=None,
                   verify_second_order=True):
    """Integrate the guidance equation dq/dt = dS/dq* for all pairs.

    Uses the same adaptive 5(4) scheme as the beam flow lines; R = 0 nodes
    stop the trajectory with a flag.  Raises StepFailure if the integrator
    stalls and NodeError when launched on a node.

    With ``verify_second_order`` the mode equation of motion
    qddot + kappa^2 q = -dQ/dq* is checked at three interior samples of the
    trajectory and the worst residual stored in the stats.
    """
    sc = step_control or StepControl(rtol=1e-12, atol=1e-15)
    ms = state.modeset

    def rhs(t, y):
        return state._velocity(y, t)

    ts, ys, status, n_acc, n_rej = rk45(
        rhs, np.asarray(cfg0.q_reps, dtype=complex), t0, t1,
        rtol=sc.rtol, atol=sc.atol, t_eval=t_eval, max_steps=sc.max_steps,
    )
    if len(ts) == 0:
        if status == kernels.STATUS_NODE:
            raise NodeError("beable trajectory launched on a node")
        raise StepFailure("beable integrator failed at launch")
    flag = {kernels.STATUS_OK: "ok", kernels.STATUS_NODE: "node",
            kernels.STATUS_STEP_FAILURE: "step_failure",
            kernels.STATUS_EXITED: "exited"}[status]
    traj = BeableTrajectory(
        ts=np.asarray(ts, dtype=float), qs=np.asarray(ys, dtype=complex),
        flag=flag, stats={"n_accepted": n_acc, "n_rejected": n_rej},
    )
    if verify_second_order and traj.ts.size >= 3:
        worst = 0.0
        for i in np.linspace(1, traj.ts.size - 2, 3).astype(int):
            try:
                worst = max(worst, second_order_residual(
                    state, traj.configuration(ms, int(i))))
            except NodeError:
                continue
        traj.stats["second_order_residual"] = worst
    return traj


def quantum_force(state, cfg, h=1e-6):
    """-dQ/dq* per pair by central Wirtinger differences of the closed-form Q."""
    ms = state.modeset
    q0 = cfg.q_reps
    out = np.empty(ms.n_pairs, dtype=complex)
    for r in range(ms.n_pairs):
        scale = max(1.0, abs(q0[r]))
        hr = h * scale

        def q_at(dq):
            q = q0.copy()
            q[r] += dq
            return quantum_potential(state, ModeConfiguration(ms, q, cfg.t))

        d_re = (q_at(hr) - q_at(-hr)) / (2.0 * hr)
        d_im = (q_at(1j * hr) - q_at(-1j * hr)) / (2.0 * hr)
        out[r] = 0.5 * (d_re + 1j * d_im)
    return -out


def second_order_residual(state, cfg, h=1e-6):
    """Residual of the mode equation of motion qddot + kappa^2 q = -dQ/dq*.

    qddot is the chain-rule derivative of the guidance velocity along the
    flow, estimated by central differences; the quantum force uses central
    Wirtinger differences of Q.  A diagnostic, accurate to O(h^2).
    """
    ms = state.modeset
    v0 = guidance_velocity(state, cfg)
    t_scale = 1.0 / float(np.max(ms.kappa_reps))
    ht = h * t_scale
    cfg_p = ModeConfiguration(ms, cfg.q_reps + ht * v0, cfg.t + ht)
    cfg_m = ModeConfiguration(ms, cfg.q_reps - ht * v0, cfg.t - ht)
    accel = (guidance_velocity(state, cfg_p) - guidance_velocity(state, cfg_m)) / (2.0 * ht)
    force = quantum_force(state, cfg, h=h)
    resid = accel + ms.kappa_reps ** 2 * cfg.q_reps - force
    return float(np.max(np.abs(resid)))
