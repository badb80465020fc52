import os
import subprocess
import sys

import numpy as np

from dsigma import _pykernels, kernels


def backend_in_subprocess(flag):
    env = {**os.environ, "DSIGMA_PURE_PYTHON": flag}
    res = subprocess.run([sys.executable, "-c", "import dsigma.kernels as k; print(k.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True)
    return res.stdout.strip()


def test_switch_forces_fallback():
    assert backend_in_subprocess("1") == "python"
    try:
        from dsigma import _ckernels  # noqa: F401
        expected = "compiled"
    except ImportError:
        expected = "python"
    assert backend_in_subprocess("0") == expected


def test_backends_agree_on_random_inputs():
    rng = np.random.default_rng(0)
    for n in (1, 2, 9, 300):
        perm = rng.permutation(n)
        assert kernels.count_inversions(perm) == _pykernels.count_inversions(perm)
        offsets = np.stack([rng.integers(0, np.arange(n) + 1) for _ in range(5)])
        assert np.array_equal(kernels.rim_insert(offsets), _pykernels.rim_insert(offsets))
