"""Acceptance criteria for the primary component.

Each criterion runs at its stated tolerance and prints one PASS/FAIL line;
run under pytest (``pytest tests/test_acceptance.py -v``) or standalone
(``python tests/test_acceptance.py``).
"""

import math
import sys
import time

import numpy as np

from weakflow import beam, modes
from weakflow.beam import BeamModel
from weakflow.polarimetry import (
    CouplingConfig, reconstruct_exact, reconstruct_paper, simulate_measurement,
)
from weakflow.weakfield import LaunchSpec, flow_bundle, integrate_flow_line, weak_field_grid

from _oracles import fd_log_density_gradient, fd_phase_gradient

_RESULTS = []


def _criterion(name, limit_s):
    def wrap(fn):
        def run():
            t0 = time.perf_counter()
            try:
                fn()
                elapsed = time.perf_counter() - t0
                assert elapsed < limit_s, (
                    f"runtime {elapsed:.2f}s exceeds the {limit_s:.0f}s budget")
            except AssertionError as exc:
                print(f"[FAIL] {name}: {exc}")
                raise
            print(f"[PASS] {name} ({elapsed:.2f}s < {limit_s:.0f}s)")

        run.__name__ = fn.__name__
        _RESULTS.append((name, run))
        return run
    return wrap


@_criterion("weak-value identity (Re/Im k_w vs finite differences)", 1.0)
def test_weak_value_identity():
    model = BeamModel.default()
    zr = model.rayleigh_range
    xs = np.linspace(-4.0, 4.0, 100) + 0.0137
    zs = np.linspace(0.5 * zr, 2.0 * zr, 20) + 0.0071 * zr
    kw = weak_field_grid(model, xs, zs)["k_w"]
    h = 1e-5
    env = lambda x, z: beam.envelope(model, x, z)
    X = xs[None, :]
    Z = zs[:, None]
    re_fd = fd_phase_gradient(env, X, Z, h)
    im_fd = fd_log_density_gradient(env, X, Z, h)
    re_floor = 1e-3 * np.max(np.abs(re_fd))
    im_floor = 1e-3 * np.max(np.abs(im_fd))
    re_err = np.max(np.abs(kw.real - re_fd) / np.maximum(np.abs(re_fd), re_floor))
    im_err = np.max(np.abs(kw.imag - im_fd) / np.maximum(np.abs(im_fd), im_floor))
    assert re_err < 1e-6, f"Re k_w mismatch {re_err:.2e}"
    assert im_err < 1e-6, f"Im k_w mismatch {im_err:.2e}"


@_criterion("flow-line bundle reproduces far-field intensity (L1 < 0.05)", 30.0)
def test_flow_bundle_continuity():
    model = BeamModel.default()
    zr = model.rayleigh_range
    z1 = 2.0 * zr
    bundle = flow_bundle(model, LaunchSpec(n=2000, x_min=-8.0, x_max=8.0,
                                           kind="intensity"),
                         0.0, z1, z_out=np.array([z1]))
    assert not bundle.errors, f"{len(bundle.errors)} lines failed"
    ends = np.array([l.xs[-1] for l in bundle.lines])
    edges = np.linspace(-10.0, 10.0, 81)
    counts, _ = np.histogram(ends, bins=edges)
    p = counts / counts.sum()
    fine = np.linspace(-10.0, 10.0, 40001)
    intens = np.abs(beam.envelope(model, fine, z1)) ** 2
    idx = np.clip(np.searchsorted(edges, fine) - 1, 0, edges.size - 2)
    q = np.bincount(idx, weights=intens, minlength=edges.size - 1)
    q /= q.sum()
    l1 = float(np.abs(p - q).sum())
    assert l1 < 0.05, f"L1 distance {l1:.3f}"


@_criterion("non-crossing of 41 uniform flow lines", 5.0)
def test_non_crossing():
    model = BeamModel.default()
    zr = model.rayleigh_range
    z_out = np.linspace(0.0, 2.0 * zr, 101)
    bundle = flow_bundle(model, LaunchSpec(n=41, x_min=-6.0, x_max=6.0),
                         0.0, 2.0 * zr, z_out=z_out)
    assert not bundle.errors
    xs = np.stack([l.xs for l in bundle.lines])
    assert xs.shape == (41, z_out.size)
    assert np.all(np.diff(xs, axis=0) > 0.0), "transverse ordering violated"


@_criterion("photon-content independence of the flow", 5.0)
def test_photon_content_independence():
    model = BeamModel.default()
    scaled = BeamModel.default(amp_plus=10.0 * model.amp_plus,
                               amp_minus=10.0 * model.amp_minus)
    zr = model.rayleigh_range
    z_out = np.linspace(0.0, 2.0 * zr, 51)
    for x0 in np.linspace(-4.0, 4.0, 9):
        l1 = integrate_flow_line(model, x0, 0.0, 2.0 * zr, z_out=z_out)
        l2 = integrate_flow_line(scaled, x0, 0.0, 2.0 * zr, z_out=z_out)
        assert np.array_equal(l1.xs, l2.xs), "flow line changed under x10 amplitudes"
        assert np.array_equal(l1.zs, l2.zs)

    # coherent field state: alpha -> 10 alpha leaves the normalized
    # momentum-density direction field unchanged
    ms = modes.ModeSet.plane_waves([((0, 0, 1), 1)], 2.0 * math.pi)
    kappa = ms.kappa_reps[0]
    rs = np.random.default_rng(5).uniform(0, 2.0 * math.pi, size=(30, 3))

    def direction_field(scale_factor):
        alphas = np.zeros(ms.n_modes, dtype=complex)
        alphas[ms.rep_indices[0]] = scale_factor * (0.7 + 0.2j)
        state = modes.CoherentState(ms, alphas)
        center = alphas[ms.rep_indices[0]] / math.sqrt(2.0 * kappa)
        cfg = modes.ModeConfiguration(ms, np.array([center]), 0.0)
        s = modes.momentum_density(state, cfg, rs)
        return s, s / np.linalg.norm(s, axis=1, keepdims=True)

    s1, n1 = direction_field(1.0)
    s10, n10 = direction_field(10.0)
    assert np.allclose(s10, 100.0 * s1, rtol=1e-10), "density must scale by |10|^2"
    assert np.allclose(n1, n10, rtol=0.0, atol=1e-12), "direction field changed"


@_criterion("measurement round trip and O(eps^2) inversion error", 1.0)
def test_measurement_round_trip():
    w_values = (0.3 + 0.2j, -1.1 + 0.6j, 2.0 - 0.4j, 0.05j, 0.9)
    cfg = CouplingConfig(epsilon=0.3)
    for w in w_values:
        rec = simulate_measurement(w, cfg)
        w_hat, _ = reconstruct_exact(rec, cfg)
        assert abs(w_hat - complex(w)) < 1e-12 * max(1.0, abs(w)), (
            f"round trip error {abs(w_hat - complex(w)):.2e} at w = {w}")

    w = 0.3 + 0.2j
    eps_values = (0.2, 0.1, 0.05)
    errs = []
    for eps in eps_values:
        c = CouplingConfig(epsilon=eps)
        errs.append(abs(reconstruct_paper(simulate_measurement(w, c), c) - w))
    slope = float(np.polyfit(np.log(eps_values), np.log(errs), 1)[0])
    assert abs(slope - 2.0) <= 0.2, f"log-log slope {slope:.3f} not 2.0 +- 0.2"


@_criterion("mode-theory identities (H-J and continuity residuals)", 1.0)
def test_mode_theory_identities():
    ms = modes.ModeSet.plane_waves([((0, 0, 1), 1), ((0, 0, 2), 1)], 2.0 * math.pi)
    rng = np.random.default_rng(101)
    alphas = rng.normal(size=ms.n_modes) + 1j * rng.normal(size=ms.n_modes)
    weights = rng.normal(size=ms.n_modes) + 1j * rng.normal(size=ms.n_modes)
    weights /= np.linalg.norm(weights)
    states = (
        modes.GroundState(ms),
        modes.SinglePhotonState(ms, weights),
        modes.CoherentState(ms, alphas),
    )
    tol = 1e-10 * float(np.sum(ms.kappa_reps))
    for state in states:
        for _ in range(20):
            q = rng.normal(size=ms.n_pairs) + 1j * rng.normal(size=ms.n_pairs)
            cfg = modes.ModeConfiguration(ms, q, float(rng.uniform(0, 5)))
            hj = modes.hj_residual(state, cfg)
            cont = modes.continuity_residual(state, cfg)
            assert hj < tol, f"{type(state).__name__}: hj residual {hj:.2e}"
            assert cont < tol, f"{type(state).__name__}: continuity residual {cont:.2e}"


@_criterion("photon bookkeeping (momentum k', energy kappa', zero point in Q)", 5.0)
def test_photon_bookkeeping():
    ms = modes.ModeSet.plane_waves([((0, 0, 1), 1), ((0, 0, 2), 1)], 2.0 * math.pi)
    rng = np.random.default_rng(7)
    ground = modes.GroundState(ms)
    cfg = modes.ModeConfiguration(
        ms, rng.normal(size=ms.n_pairs) + 1j * rng.normal(size=ms.n_pairs), 0.3)
    grid, weight = ms.integration_grid()
    assert np.max(np.abs(modes.momentum_density(ground, cfg, grid))) == 0.0, (
        "ground state must carry no momentum anywhere")

    idx = ms.rep_indices[0]
    photon = modes.SinglePhotonState.sharp(ms, idx)
    box_momentum = np.sum(modes.momentum_density(photon, cfg, grid), axis=0) * weight
    k_center = ms.modes[idx].k
    mom_err = float(np.max(np.abs(box_momentum - k_center)))
    assert mom_err < 1e-9, f"box momentum error {mom_err:.2e}"

    kappa = ms.modes[idx].kappa
    e_no = modes.total_energy(photon, normal_ordered=True)
    assert abs(e_no - kappa) < 1e-12, f"normal-ordered energy {e_no} != {kappa}"

    q_at_zero = modes.quantum_potential(ground, modes.ModeConfiguration.zero(ms))
    assert q_at_zero == modes.total_energy(ground), (
        "zero-point energy must equal the ground-state quantum potential at q = 0")


@_criterion("beable classical limit (coherent state tracks alpha e^{-i kappa t})", 1.0)
def test_beable_classical_limit():
    ms = modes.ModeSet.plane_waves([((0, 0, 1), 1)], 2.0 * math.pi)
    kappa = ms.kappa_reps[0]
    alphas = np.zeros(ms.n_modes, dtype=complex)
    alphas[ms.rep_indices[0]] = 1.1 + 0.5j
    state = modes.CoherentState(ms, alphas)
    q0 = alphas[ms.rep_indices[0]] / math.sqrt(2.0 * kappa)
    t1 = 10 * 2.0 * math.pi / kappa
    t_eval = np.linspace(0.0, t1, 257)
    traj = modes.evolve_beables(state, modes.ModeConfiguration(ms, np.array([q0]), 0.0),
                                0.0, t1, t_eval=t_eval)
    drift = np.max(np.abs(traj.qs[:, 0] - q0 * np.exp(-1j * kappa * traj.ts)))
    assert drift < 1e-8 * abs(q0), f"classical-orbit drift {drift / abs(q0):.2e}"


def main():
    failures = 0
    for name, run in _RESULTS:
        try:
            run()
        except AssertionError:
            failures += 1
    print(f"\n{len(_RESULTS) - failures}/{len(_RESULTS)} acceptance criteria passed")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
