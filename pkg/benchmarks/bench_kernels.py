"""Compare the compiled kernels against the pure-Python fallbacks.

Run:  python3 benchmarks/bench_kernels.py

Covers the two hot loops: plant integration (RK4 substeps per sample) and
the ADMM inner loop on a representative condensed tracking QP.
"""

import time

import numpy as np

from koopcar import _kernels
from koopcar._kernels import plant_py, qp_py
from koopcar.plant import VehicleParams, excite

try:
    from koopcar._kernels import _plant_cy, _qp_cy
except ImportError:
    _plant_cy = _qp_cy = None


def timeit(fn, repeat=5):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_plant():
    params = VehicleParams()
    controls = excite(5000, seed=0, params=params)
    s0 = np.zeros(6)
    args = (s0, controls, params.as_vector(), params.dt, params.n_substeps)
    rows = []
    rows.append(("plant rollout 5000 steps", "python",
                 timeit(lambda: plant_py.rollout(*args))))
    if _plant_cy is not None:
        rows.append(("plant rollout 5000 steps", "compiled",
                     timeit(lambda: _plant_cy.rollout(*args))))
    return rows


def bench_admm():
    rng = np.random.default_rng(0)
    n, mrows = 62, 126            # condensed tracking problem shape
    M = rng.normal(size=(n, n)) / np.sqrt(n)
    P = M @ M.T + 0.1 * np.eye(n)
    q = rng.normal(size=n)
    C = np.vstack([rng.normal(size=(mrows - n, n)) / np.sqrt(n), np.eye(n)])
    l = np.full(mrows, -2.0)
    u = np.full(mrows, 2.0)
    sigma, rho = 1e-6, 0.1
    Minv = np.linalg.inv(P + sigma * np.eye(n) + rho * C.T @ C)
    state = lambda: (np.zeros(n), np.zeros(mrows), np.zeros(mrows))
    args = (sigma, rho, 1.6, 2000, 25, 1e-9, 1e-9)

    rows = []
    rows.append(("admm 2000 iterations", "python", timeit(
        lambda: qp_py.admm_iterate(Minv, P, C, q, l, u, *state(), *args))))
    if _qp_cy is not None:
        rows.append(("admm 2000 iterations", "compiled", timeit(
            lambda: _qp_cy.admm_iterate(Minv, P, C, q, l, u, *state(), *args))))
    return rows


def main():
    print(f"active backends: plant={_kernels.PLANT_BACKEND} "
          f"qp={_kernels.QP_BACKEND}\n")
    all_rows = bench_plant() + bench_admm()
    by_case = {}
    for case, backend, secs in all_rows:
        by_case.setdefault(case, {})[backend] = secs
    for case, results in by_case.items():
        line = f"{case:28s}"
        for backend in ("python", "compiled"):
            if backend in results:
                line += f"  {backend} {results[backend] * 1e3:9.2f} ms"
        if "python" in results and "compiled" in results:
            line += f"  speedup {results['python'] / results['compiled']:5.1f}x"
        print(line)


if __name__ == "__main__":
    main()
