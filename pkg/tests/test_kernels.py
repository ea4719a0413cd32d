import json
import os
import subprocess
import sys

import numpy as np
import pytest

from spoofoptics import _kernels_py, kernels
from spoofoptics.sh import _norm_table


def random_dirs(rng, n):
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def test_backend_is_reported():
    assert kernels.BACKEND in ("cython", "python")


@pytest.mark.skipif(kernels.BACKEND != "cython", reason="extension not built")
@pytest.mark.parametrize("order", [0, 1, 2, 3, 6, 10])
def test_basis_backends_agree(order):
    from spoofoptics import _kernels

    dirs = random_dirs(np.random.default_rng(order), 500)
    norm = _norm_table(order)
    got = _kernels.real_sh_basis(dirs, order, norm)
    want = _kernels_py.real_sh_basis(dirs, order, norm)
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-12)
    assert np.array_equal(got, want)


def test_gram_matches_definition():
    rng = np.random.default_rng(3)
    design = rng.normal(size=(1000, 16))
    target = rng.normal(size=1000)
    gtg, gty, yty = kernels.gram(design, target)
    np.testing.assert_allclose(gtg, np.einsum("ia,ib->ab", design, design), rtol=1e-12, atol=1e-10)
    np.testing.assert_allclose(gty, np.einsum("ia,i->a", design, target), rtol=1e-12, atol=1e-10)
    assert yty == pytest.approx(float(np.sum(target**2)), rel=1e-12)


def test_gram_is_deterministic():
    rng = np.random.default_rng(4)
    design = rng.normal(size=(300, 9))
    target = rng.normal(size=300)
    a = kernels.gram(design, target)
    b = kernels.gram(design.copy(), target.copy())
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_pure_python_switch():
    script = (
        "import json, numpy as np\n"
        "from spoofoptics import kernels\n"
        "from spoofoptics.sh import sh_basis\n"
        "d = np.array([[0.6, 0.0, 0.8], [0.0, 1.0, 0.0]])\n"
        "print(json.dumps([kernels.BACKEND, sh_basis(d, 4).tolist()]))\n"
    )
    env = dict(os.environ, SPOOFOPTICS_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", script], env=env, capture_output=True, text=True, check=True)
    backend, basis = json.loads(out.stdout)
    assert backend == "python"
    from spoofoptics.sh import sh_basis

    d = np.array([[0.6, 0.0, 0.8], [0.0, 1.0, 0.0]])
    np.testing.assert_allclose(np.array(basis), sh_basis(d, 4), atol=1e-13)
