import os
import subprocess
import sys

import numpy as np

from spinboson2q.accel import backend_name


SNIPPET = """
import numpy as np
from spinboson2q.accel import backend_name
from spinboson2q.bath import BathSpec, correlation_expansion
from spinboson2q.hierarchy import build_hierarchy
from spinboson2q.heom import heom_rhs
from spinboson2q.config import build_config
from spinboson2q.qops import build_system_hamiltonian

cfg = build_config(preset="WWW")
h_sys = build_system_hamiltonian(cfg)
e1 = correlation_expansion(cfg.bath1, 1, "matsubara")
e2 = correlation_expansion(cfg.bath2, 1, "matsubara")
h = build_hierarchy(e1, e2, 2)
rng = np.random.default_rng(0)
y = rng.standard_normal((h.n_ados, 4, 4)) + 1j * rng.standard_normal((h.n_ados, 4, 4))
out = heom_rhs(h, h_sys, np.ascontiguousarray(y))
print(backend_name())
print(repr(complex(out.sum())))
"""


def run_snippet(force_numpy):
    env = dict(os.environ)
    env["SB2Q_FORCE_NUMPY"] = "1" if force_numpy else "0"
    proc = subprocess.run(
        [sys.executable, "-c", SNIPPET], capture_output=True, text=True, env=env,
        check=True,
    )
    backend, value = proc.stdout.strip().splitlines()
    return backend, complex(value)


def test_env_flag_selects_numpy_path():
    backend, _ = run_snippet(force_numpy=True)
    assert backend == "numpy"


def test_backends_compute_the_same_rhs():
    backend_a, val_a = run_snippet(force_numpy=False)
    backend_b, val_b = run_snippet(force_numpy=True)
    assert backend_b == "numpy"
    assert abs(val_a - val_b) <= 1e-12 * max(1.0, abs(val_a))


def test_default_backend_reports():
    assert backend_name() in ("numba", "numpy")
