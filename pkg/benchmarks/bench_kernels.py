"""Compare the compiled kernels against the numpy fallback.

Runs both implementations of frame_analyze and dtw_table on identical
seeded workloads, checks they agree, and prints best-of-5 wall times.

    python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

from hedkit._kernels import _py

try:
    from hedkit._kernels import _core
except ImportError:
    _core = None

REPEATS = 5


def best_of(fn, *args):
    times = []
    for _ in range(REPEATS):
        t0 = time.perf_counter()
        out = fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times), out


def frame_analyze_workload():
    # 3 s of synthetic speech-band audio at 16 kHz, 25 ms frames / 10 ms hop
    rng = np.random.default_rng(0)
    sr = 16000
    t = np.arange(3 * sr) / sr
    samples = np.sin(2 * np.pi * 150 * t) + 0.3 * rng.normal(size=t.size)
    args = (samples, 400, 160, int(sr / 400), int(sr / 60), sr, 0.3)
    return args


def dtw_workload():
    rng = np.random.default_rng(1)
    return (rng.uniform(0, 1, size=(400, 400)),)


def main():
    rows = []
    for name, workload in [("frame_analyze", frame_analyze_workload()),
                           ("dtw_table", dtw_workload())]:
        t_py, out_py = best_of(getattr(_py, name), *workload)
        if _core is None:
            rows.append((name, t_py, None, None))
            continue
        t_c, out_c = best_of(getattr(_core, name), *workload)
        out_py = out_py if isinstance(out_py, tuple) else (out_py,)
        out_c = out_c if isinstance(out_c, tuple) else (out_c,)
        for a, b in zip(out_py, out_c):
            assert np.allclose(a, b, atol=1e-10), f"{name}: backends disagree"
        rows.append((name, t_py, t_c, t_py / t_c))

    print(f"{'kernel':<16} {'numpy':>10} {'cython':>10} {'speedup':>8}")
    for name, t_py, t_c, speedup in rows:
        if t_c is None:
            print(f"{name:<16} {t_py * 1e3:>8.2f}ms {'n/a':>10} {'n/a':>8}")
        else:
            print(f"{name:<16} {t_py * 1e3:>8.2f}ms {t_c * 1e3:>8.2f}ms "
                  f"{speedup:>7.1f}x")
    if _core is None:
        print("compiled backend not built; only the fallback was timed")


if __name__ == "__main__":
    main()
