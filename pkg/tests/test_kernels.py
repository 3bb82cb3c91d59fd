import os
import subprocess
import sys

import numpy as np
import pytest

from aumcf import generate_dataset, influence_values, ScenarioConfig
from aumcf import _kernels
from aumcf._kernels import (
    HAS_NUMBA,
    _influence_accumulate_numpy,
    active_backend,
    influence_accumulate,
)


def _random_inputs(rng, n=50, k_e=20, k_d=8, m=60):
    x = np.sort(rng.exponential(2.0, n))
    te = np.sort(rng.uniform(0, 5, k_e))
    cum_event = np.cumsum(rng.uniform(0, 0.2, k_e))
    ev_subj = rng.integers(0, n, m)
    ev_w = rng.uniform(0.1, 2.0, m)
    td = np.sort(rng.uniform(0, 5, k_d))
    cum_death = np.cumsum(rng.uniform(0, 0.3, k_d))
    obs_death = rng.uniform(0, 1, n) * (rng.random(n) < 0.4)
    return x, te, cum_event, ev_subj, ev_w, td, cum_death, obs_death


def test_numpy_kernel_against_loop_reference(rng):
    args = _random_inputs(rng)
    x, te, cum_event, ev_subj, ev_w, td, cum_death, obs_death = args
    got = _influence_accumulate_numpy(*args)
    n = x.size
    expect = np.zeros(n)
    for s, w in zip(ev_subj, ev_w):
        expect[s] += w
    for i in range(n):
        ce = sum(np.diff(cum_event, prepend=0.0)[k] for k in range(te.size) if te[k] <= x[i])
        cd = sum(np.diff(cum_death, prepend=0.0)[k] for k in range(td.size) if td[k] <= x[i])
        expect[i] -= ce + obs_death[i] - cd
    assert got == pytest.approx(expect, rel=1e-10, abs=1e-12)


@pytest.mark.skipif(not HAS_NUMBA, reason="numba not installed")
def test_backends_agree(rng):
    from aumcf._kernels import _influence_accumulate_numba

    for _ in range(10):
        args = _random_inputs(rng, n=int(rng.integers(2, 80)))
        a = _influence_accumulate_numpy(*args)
        b = _influence_accumulate_numba(*args)
        assert a == pytest.approx(b, rel=1e-12, abs=1e-15)


def test_backend_env_selection(monkeypatch):
    monkeypatch.setenv("AUMCF_BACKEND", "numpy")
    assert active_backend() == "numpy"
    monkeypatch.setenv("AUMCF_BACKEND", "bogus")
    with pytest.raises(RuntimeError, match="unknown"):
        active_backend()
    monkeypatch.delenv("AUMCF_BACKEND")
    assert active_backend() in ("numba", "numpy")


def test_empty_jump_sets(rng):
    x = np.array([1.0, 2.0])
    empty = np.empty(0)
    out = influence_accumulate(x, empty, empty, np.empty(0, dtype=np.int64),
                               empty, empty, empty, np.zeros(2))
    assert np.allclose(out, 0.0)


def test_numpy_backend_full_pipeline(monkeypatch):
    # influence values must be invariant to the backend choice
    cfg = ScenarioConfig(n_per_arm=120, seed=21)
    arm = generate_dataset(cfg, 0).arm1
    monkeypatch.setenv("AUMCF_BACKEND", "numpy")
    a = influence_values(arm, 1.0).values
    monkeypatch.delenv("AUMCF_BACKEND")
    b = influence_values(arm, 1.0).values
    if HAS_NUMBA:
        assert np.array_equal(a, b) or a == pytest.approx(b, rel=1e-12)
    else:
        assert np.array_equal(a, b)


def test_numpy_only_subprocess():
    # import and run with the numba path disabled end to end
    code = (
        "import numpy as np\n"
        "import aumcf as A\n"
        "from aumcf._kernels import active_backend\n"
        "assert active_backend() == 'numpy'\n"
        "cfg = A.ScenarioConfig(n_per_arm=50, seed=22)\n"
        "study = A.generate_dataset(cfg, 0)\n"
        "res = A.contrast_difference(study)\n"
        "assert np.isfinite(res.se)\n"
        "print(repr(res.point))\n"
    )
    env = dict(os.environ, AUMCF_BACKEND="numpy")
    out = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert out.stdout.strip()
