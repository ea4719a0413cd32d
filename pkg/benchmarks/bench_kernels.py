"""Compiled vs pure-Python timings of the hot kernels.

Run from the repository root after building the extension::

    python3 benchmarks/bench_kernels.py [--repeat N]

Both backends are imported directly, so the SPOOFOPTICS_PURE_PYTHON switch
does not matter here. Reports the best of ``repeat`` runs per case and the
max abs difference between backends.
"""

import argparse
import timeit

import numpy as np

from spoofoptics import _kernels_py
from spoofoptics.image import sphere_normal_map
from spoofoptics.sh import _norm_table

try:
    from spoofoptics import _kernels as _compiled
except ImportError:
    _compiled = None


def best_time(fn, repeat):
    timer = timeit.Timer(fn)
    loops, _ = timer.autorange()
    return min(timer.repeat(repeat, loops)) / loops


def cases():
    for res, order in ((64, 2), (64, 3), (128, 3), (128, 6), (256, 10)):
        dirs = np.ascontiguousarray(sphere_normal_map(res).valid_normals())
        yield f"basis  res={res:<4d} L={order:<3d}", "basis", dirs, order


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _compiled is None:
        print("compiled extension not built; only the Python backend is timed")
    print(f"{'case':<26}{'python ms':>12}{'cython ms':>12}{'speedup':>10}{'max diff':>12}")
    for name, _, dirs, order in cases():
        norm = np.ascontiguousarray(_norm_table(order))
        py = best_time(lambda: _kernels_py.real_sh_basis(dirs, order, norm), args.repeat)
        row = f"{name:<26}{py * 1e3:>12.3f}"
        if _compiled is not None:
            cy = best_time(lambda: _compiled.real_sh_basis(dirs, order, norm), args.repeat)
            got = np.asarray(_compiled.real_sh_basis(dirs, order, norm))
            diff = np.max(np.abs(got - _kernels_py.real_sh_basis(dirs, order, norm)))
            row += f"{cy * 1e3:>12.3f}{py / cy:>10.1f}{diff:>12.1e}"
        print(row)


if __name__ == "__main__":
    main()
