"""Time the likelihood kernels under numba and plain numpy.

Usage: python benchmarks/bench_kernels.py [--repeat N]

Reports per-call time of the state objective (the inner loop of state MLE)
and the wall time of one full two-qubit reconstruction with each backend.
The full reconstruction runs in a subprocess so that ``PHONONMEM_NUMBA``
takes effect at import.
"""

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from phononmem import _kernels as K
from phononmem import tomography as tomo

_FULL = """
import json, time
import numpy as np
from phononmem import _kernels, memory, tomography as tomo
recs = tomo.simulate_state_records(memory.werner_state(0.4), tomo.state_settings(2, 0, 450), 6.45,
                                   np.random.default_rng(0))
tomo.mle_state_tomography(recs)
t = time.perf_counter()
for _ in range({n}):
    tomo.mle_state_tomography(recs)
print(json.dumps({{"backend": _kernels.BACKEND, "seconds": (time.perf_counter() - t) / {n}}}))
"""


def kernel_times(repeat):
    rng = np.random.default_rng(0)
    settings = tomo.state_settings(2, 0.0, 450.0)
    E = np.stack([s.projector for s in settings])
    n = rng.poisson(80.0, len(settings)).astype(float)
    w = np.full(len(settings), 450.0)
    theta = rng.standard_normal(16)
    out = {"numpy": timeit.timeit(lambda: K.state_objective_numpy(theta, E, n, w), number=repeat) / repeat}
    if K.HAVE_NUMBA:
        K.state_objective_numba(theta, E, n, w)  # compile outside the timed region
        out["numba"] = timeit.timeit(lambda: K.state_objective_numba(theta, E, n, w), number=repeat) / repeat
    return out


def full_times(n):
    out = {}
    for flag in ("0", "1"):
        env = dict(os.environ, PHONONMEM_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", _FULL.format(n=n)], env=env,
                             capture_output=True, text=True, check=True)
        row = json.loads(res.stdout)
        out[row["backend"]] = row["seconds"]
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=2000, help="kernel calls per timing")
    ap.add_argument("--reconstructions", type=int, default=20, help="full MLE runs per backend")
    args = ap.parse_args(argv)

    k = kernel_times(args.repeat)
    f = full_times(args.reconstructions)
    print(f"{'':28s}{'numpy':>12s}{'numba':>12s}{'speedup':>10s}")
    for label, t in (("state objective call", k), ("two-qubit MLE", f)):
        nb = t.get("numba")
        speed = f"{t['numpy'] / nb:9.1f}x" if nb else "      n/a"
        nb_txt = f"{nb * 1e6:10.1f}us" if nb else "         n/a"
        print(f"{label:28s}{t['numpy'] * 1e6:10.1f}us{nb_txt}{speed}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
