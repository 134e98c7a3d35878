"""Compare the compiled spread-functional kernel with the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]

Times ``mv_terms`` (objective plus gradient residual) on a 1-D and a 2-D
frame and checks that both backends agree.
"""

import argparse
import time

import numpy as np

from wanloc import _kernels_py
from wanloc.pipeline import build_frame, setup
from wanloc.fiber import BandWindow, preset

try:
    from wanloc import _kernels
except ImportError:  # extension not built
    _kernels = None


def frame_for(name, amp, sizes, cutoff, window):
    lat, pot = preset(name, amp)
    prob = build_frame(setup(lat, pot, sizes, cutoff, window))
    return prob.frame


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    cases = [("mathieu1d N=64", frame_for("mathieu1d", 0.5, [64], 8.0, BandWindow(0, 1))),
             ("cos2d N=16x16", frame_for("cos2d", 1.0, [16, 16], 6.0, BandWindow(1, 2)))]
    print(f"{'case':<18}{'numpy [ms]':>12}{'cython [ms]':>13}{'speedup':>9}{'max diff':>11}")
    for label, fr in cases:
        st = fr.stencil
        call = (fr.coeffs, st.fwd, st.bwd, st.zcoef, st.xcoef, True)
        t_py, ref = best_of(lambda: _kernels_py.mv_terms(*call), args.repeat)
        if _kernels is None:
            print(f"{label:<18}{1e3 * t_py:>12.3f}{'n/a':>13}")
            continue
        t_cy, got = best_of(lambda: _kernels.mv_terms(*call), args.repeat)
        diff = max(float(np.abs(a - b).max()) for a, b in zip(ref, got))
        print(f"{label:<18}{1e3 * t_py:>12.3f}{1e3 * t_cy:>13.3f}{t_py / t_cy:>9.2f}{diff:>11.1e}")


if __name__ == "__main__":
    main()
