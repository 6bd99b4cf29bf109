"""Time the compiled kernels against the numpy fallback on representative inputs.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``.  Each row
reports the best wall time per backend, the speedup and the largest
absolute difference between the two outputs.
"""
import argparse
import math
import timeit

import numpy as np

from seqreadout import _kernels
from seqreadout.hilbert import coherent_state


def cases():
    rho = coherent_state(5.8 * np.exp(0.4j), 150).density_matrix()
    psi = coherent_state(5.8, 150).data
    axis = np.linspace(-8, 8, 40)
    alphas = (axis[:, None] + 1j * axis[None, :]).ravel()
    mus = np.linspace(-12, 12, 201)
    mus = (mus[:, None] + 1j * mus[None, :]).ravel()
    rng = np.random.default_rng(0)
    x, y = rng.normal(size=(2, 1_000_000)) * 3
    g, sigma = 2 * math.pi * 7.2e6, 28e-9
    t_eval = np.linspace(-4 * sigma, 4 * sigma, 225)
    kr, kb = 2 * math.pi * 250e3, 2 * math.pi * 21e6
    return {
        "wigner_iterative 40x40 dim150": ("wigner_iterative", (rho, alphas)),
        "husimi_amplitudes 201x201 dim150": ("husimi_amplitudes", (psi, mus)),
        "hist2d_uniform 1e6 samples": ("hist2d_uniform", (x, y, -12.0, 0.12, 200, -12.0, 0.12, 200)),
        "beam_splitter_dp45 default pulse": (
            "beam_splitter_dp45",
            (1.0 + 0j, g, sigma, 0.0, 4 * sigma, -4 * sigma, 4 * sigma, kr, kb,
             1e-10, 1e-14, t_eval, 2_000_000)),
    }


def _max_diff(a, b):
    if isinstance(a, tuple):
        return max(_max_diff(u, v) for u, v in zip(a, b) if isinstance(u, np.ndarray))
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    py, cy = _kernels.python_backend, _kernels.cython_backend
    if cy is None:
        print("compiled extension not built; only the fallback is available")
    print(f"{'kernel':36s} {'python s':>10s} {'cython s':>10s} {'speedup':>8s} {'max diff':>10s}")
    for label, (name, call_args) in cases().items():
        fp = getattr(py, name)
        tp = min(timeit.repeat(lambda: fp(*call_args), number=1, repeat=args.repeat))
        if cy is None:
            print(f"{label:36s} {tp:10.4f}")
            continue
        fc = getattr(cy, name)
        tc = min(timeit.repeat(lambda: fc(*call_args), number=1, repeat=args.repeat))
        diff = _max_diff(fp(*call_args), fc(*call_args))
        print(f"{label:36s} {tp:10.4f} {tc:10.4f} {tp / tc:8.1f} {diff:10.2e}")


if __name__ == "__main__":
    main()
