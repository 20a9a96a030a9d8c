"""Parity between the compiled kernel and the pure-Python fallback."""

import os
import subprocess
import sys

import numpy as np
import pytest

from weakflow import _kernels_py
from weakflow.beam import BeamModel
from weakflow.weakfield import node_threshold

cython_kernels = pytest.importorskip(
    "weakflow._kernels_cy", reason="compiled kernel not built")


@pytest.fixture
def params():
    return BeamModel.default().kernel_params


def test_backend_names():
    assert _kernels_py.backend_name() == "python"
    assert cython_kernels.backend_name() == "cython"


def test_envelope_parity(params):
    rng = np.random.default_rng(2)
    for _ in range(200):
        x = rng.uniform(-8.0, 8.0)
        z = rng.uniform(0.0, 140.0)
        u_py = _kernels_py.envelope_norm(params, x, z)
        u_cy = cython_kernels.envelope_norm(params, x, z)
        assert abs(u_py - u_cy) <= 1e-15 * abs(u_py)


def test_kw_parity_including_status(params):
    m = BeamModel.default()
    eps = node_threshold(m, 0.0, 140.0)
    rng = np.random.default_rng(3)
    for _ in range(200):
        x = rng.uniform(-8.0, 8.0)
        z = rng.uniform(0.0, 140.0)
        kw_py, st_py = _kernels_py.kw_point(params, x, z, eps)
        kw_cy, st_cy = cython_kernels.kw_point(params, x, z, eps)
        assert st_py == st_cy
        assert abs(kw_py - kw_cy) <= 1e-13 * max(1.0, abs(kw_py))


def test_integrate_line_parity(params):
    m = BeamModel.default()
    zr = m.rayleigh_range
    eps = node_threshold(m, 0.0, 2 * zr)
    z_out = np.linspace(0.0, 2 * zr, 41)
    for x0 in (-2.7, -0.6, 1.2, 3.3):
        res_py = _kernels_py.integrate_line(
            params, x0, 0.0, 2 * zr, 1e-9, 1e-12, eps, -14.0, 14.0, z_out, 100000)
        res_cy = cython_kernels.integrate_line(
            params, x0, 0.0, 2 * zr, 1e-9, 1e-12, eps, -14.0, 14.0, z_out, 100000)
        assert res_py[2] == res_cy[2]                      # status
        assert np.allclose(res_py[1], res_cy[1], rtol=0.0, atol=1e-10)
        assert np.array_equal(res_py[0], res_cy[0])        # sample positions


def test_integrate_line_parity_free_steps(params):
    m = BeamModel.default()
    zr = m.rayleigh_range
    eps = node_threshold(m, 0.0, zr)
    res_py = _kernels_py.integrate_line(
        params, 1.0, 0.0, zr, 1e-9, 1e-12, eps, -14.0, 14.0, None, 100000)
    res_cy = cython_kernels.integrate_line(
        params, 1.0, 0.0, zr, 1e-9, 1e-12, eps, -14.0, 14.0, None, 100000)
    # identical step-control law: the accepted step sequence matches closely
    assert res_py[3] == res_cy[3]
    assert len(res_py[0]) == len(res_cy[0])
    assert np.allclose(res_py[1], res_cy[1], rtol=0.0, atol=1e-10)


def test_pure_python_env_override():
    code = ("import weakflow.kernels as k; print(k.backend_name())")
    env = dict(os.environ, WEAKFLOW_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True)
    assert out.stdout.strip() == "python"
    env.pop("WEAKFLOW_PURE_PYTHON")
    out = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True)
    assert out.stdout.strip() == "cython"
