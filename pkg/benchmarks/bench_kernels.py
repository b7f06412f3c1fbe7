"""Compare the numba kernels with the pure-numpy fallback.

Each backend runs in its own interpreter (the switch is read at import time).

    python3 benchmarks/bench_kernels.py --repeats 3
"""
import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

WORKER = r"""
import json, sys, time
import numpy as np
from quasilevel import _accel
from quasilevel.qp_core import TrigSeries, QuasiperiodicFunction, AffineEmbedding
from quasilevel import kernels, plane_trace, torus3

repeats, small = int(sys.argv[1]), sys.argv[2] == "1"
f3 = TrigSeries.cos_sum(3)
qp = QuasiperiodicFunction(TrigSeries.cos_sum(2), AffineEmbedding(np.eye(2), np.zeros(2)))
K, ph, cr, ci = f3.kernel_arrays()
Y = np.random.default_rng(0).random((20_000 if small else 200_000, 3))
F = np.random.default_rng(1).random((65, 65) if small else (257, 257))
N = 8 if small else 16
B = np.array([1.0, 2 ** 0.5 / 10, 3 ** 0.5 / 10])

cases = {
    "eval_points": lambda: float(kernels.eval_points(K, ph, cr, ci, Y).sum()),
    "escape_levels": lambda: float(kernels.escape_levels_jit(F).sum()),
    "trace_level": lambda: len(plane_trace.trace_level(qp, 0.3, 2.0 if small else 6.0, 1 / 32)),
    "level_surface": lambda: int(torus3.extract_level_surface(f3, 0.1, N).tris.shape[0]),
    "verdict": lambda: torus3.verdict(f3, B, 0.1, resolution=N, confirm=False).kind,
}
out = {"backend": _accel.backend()}
for name, fn in cases.items():
    torus3._extract_cached.cache_clear()
    t0 = time.perf_counter()
    first = fn()                      # includes compilation on the numba side
    t_first = time.perf_counter() - t0
    best = float("inf")
    for _ in range(repeats):
        torus3._extract_cached.cache_clear()
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    out[name] = {"first": t_first, "best": best, "result": first}
print(json.dumps(out))
"""


def run_backend(pure, repeats, small):
    env = dict(os.environ)
    env["QUASILEVEL_PURE_NUMPY"] = "1" if pure else "0"
    p = subprocess.run([sys.executable, "-c", WORKER, str(repeats), "1" if small else "0"], env=env,
                       capture_output=True, text=True, check=True)
    return json.loads(p.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--small", action="store_true", help="reduced sizes, for a quick check")
    args = ap.parse_args(argv)

    t0 = time.perf_counter()
    jit = run_backend(False, args.repeats, args.small)
    ref = run_backend(True, args.repeats, args.small)
    print(f"{'kernel':<16}{'numba s':>12}{'numpy s':>12}{'speedup':>10}  same result")
    for name in jit:
        if name == "backend":
            continue
        a, b = jit[name], ref[name]
        same = np.isclose(a["result"], b["result"]) if isinstance(a["result"], float) else a["result"] == b["result"]
        print(f"{name:<16}{a['best']:>12.4f}{b['best']:>12.4f}{b['best'] / max(a['best'], 1e-9):>10.1f}  {same}")
    print(f"backends: {jit['backend']} / {ref['backend']}, wall {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
