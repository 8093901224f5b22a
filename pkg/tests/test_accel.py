import os
import subprocess
import sys

import numpy as np
import pytest

from pncollapse import _accel

pytestmark = pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not installed")


@pytest.fixture
def both():
    yield
    _accel.set_backend("numba")


def _run_all(rng):
    pos = rng.normal(size=(70, 3))
    w = rng.normal(size=70)
    t = rng.normal(size=(70, 3, 3))
    tab = (np.linspace(0, 3, 7), np.linspace(5, 1, 7))
    out = []
    for fam in (_accel.COULOMB, _accel.GAUSSIAN, _accel.TABULATED):
        out.append(_accel.radial_matrix(pos, pos[:30], 0.2, fam, *tab))
        out.append(_accel.pair_sum(pos, w, pos, w, 0.2, fam, *tab))
        out.append(_accel.dressed_pair_sum(pos, t, 0.2, fam, *tab))
    out.append(_accel.green_sum(pos, np.stack([w, 2 * w], 1), pos[:5] + 10))
    return out


def test_backends_agree(both):
    res = {}
    for b in ("numba", "numpy"):
        _accel.set_backend(b)
        res[b] = _run_all(np.random.default_rng(0))
    for a, c in zip(res["numba"], res["numpy"]):
        np.testing.assert_allclose(a, c, rtol=1e-12, atol=1e-12 * np.max(np.abs(c)))


def test_profile_values():
    r = np.array([[0.0, 0, 0], [0.05, 0, 0], [2.0, 0, 0]])
    g = _accel.radial_matrix(r, np.zeros((1, 3)), 0.1, _accel.COULOMB)[:, 0]
    np.testing.assert_allclose(g, [10.0, 10.0, 0.5])


def test_unknown_backend():
    with pytest.raises(ValueError):
        _accel.set_backend("cuda")


def test_env_flag_selects_numpy():
    code = "from pncollapse import _accel; print(_accel.get_backend())"
    env = dict(os.environ, PNCOLLAPSE_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


def test_thread_count_does_not_change_results():
    code = ("import numpy as np; from pncollapse import _accel;"
            "r=np.random.default_rng(1); p=r.normal(size=(300,3)); w=r.normal(size=300);"
            "print(repr(_accel.pair_sum(p,w,p,w,0.1,0)))")
    outs = set()
    for n in ("1", "3"):
        env = dict(os.environ, PNCOLLAPSE_THREADS=n)
        outs.add(subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                                text=True, check=True).stdout)
    assert len(outs) == 1
