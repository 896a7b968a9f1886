import os
import subprocess
import sys

import numpy as np
import pytest

from chanep import channels as ch
from chanep._accel import BACKEND
from chanep._kernels import charpoly3, depressed_invariants, discriminant3, project_cptp, template_superop
from chanep.circuits import induced_channel, template


def test_charpoly_matches_numpy_poly():
    rng = np.random.default_rng(0)
    Es = rng.normal(size=(50, 3, 3))
    c = charpoly3(Es)
    for E, row in zip(Es, c):
        assert np.allclose(np.poly(E)[1:], row, atol=1e-12)


def test_discriminant_sign():
    assert discriminant3(np.diag([1.0, 2.0, 3.0])[None])[0] > 0
    R = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.5]])
    assert discriminant3(R[None])[0] < 0


def test_triple_root_invariants_vanish():
    J = np.diag([1.0, 1.0], 1) + 0.2 * np.eye(3)
    assert np.allclose(depressed_invariants(J[None]), 0, atol=1e-15)
    assert abs(discriminant3(J[None])[0]) < 1e-15


def test_projection_is_cptp():
    rng = np.random.default_rng(1)
    for _ in range(20):
        G = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        J = project_cptp(np.ascontiguousarray(G + G.conj().T))
        S = ch.superop_from_choi(J)
        assert ch.check_cptp(S, 1e-9).ok


def test_projection_fixes_feasible_point():
    J = ch.choi_of(ch.e3())
    assert np.allclose(project_cptp(np.ascontiguousarray(J)), J, atol=1e-10)


_PROBE = """
import numpy as np
from chanep import channels as ch
from chanep._accel import BACKEND
from chanep.tomography import mle_cptp_fit, simulate_experiment
from chanep._kernels import discriminant3
t = simulate_experiment(ch.interpolate(ch.e1(), ch.e2(), 0.4), 2048, 5)
r = mle_cptp_fit(t)
Es = np.random.default_rng(0).normal(size=(100, 3, 3))
print(BACKEND)
print(repr(r.neg_log_likelihood), r.iterations)
print(" ".join(repr(float(v)) for v in np.concatenate([r.superop.real.ravel(), r.superop.imag.ravel()])))
print(" ".join(repr(float(v)) for v in discriminant3(Es)))
"""


def _probe(pure):
    env = dict(os.environ)
    env.pop("CHANEP_PURE_NUMPY", None)
    if pure:
        env["CHANEP_PURE_NUMPY"] = "1"
    out = subprocess.run([sys.executable, "-c", _PROBE], env=env, capture_output=True, text=True, check=True)
    return out.stdout.splitlines()


@pytest.mark.slow
def test_backends_agree():
    fast, slow = _probe(False), _probe(True)
    assert slow[0] == "numpy"
    assert fast[0] == BACKEND
    # same algorithm, different summation order: agreement to rounding level
    for a, b in zip(fast[2:], slow[2:]):
        assert np.allclose(np.array(a.split(), float), np.array(b.split(), float), rtol=1e-9, atol=1e-9)
    assert float(fast[1].split()[0]) == pytest.approx(float(slow[1].split()[0]), rel=1e-9)


def test_template_kernel_matches_gate_simulation():
    rng = np.random.default_rng(3)
    for x in rng.uniform(-4, 4, (100, 8)):
        assert np.max(np.abs(template_superop(x) - induced_channel(template(x)))) <= 1e-14


def test_template_kernel_repeatable_bits():
    x = np.random.default_rng(4).uniform(-4, 4, 8)
    first = template_superop(x)
    junk = [np.empty(k) for k in range(1, 40)]  # shift allocator state
    assert np.array_equal(first, template_superop(x)) and junk
