"""Time the hot kernels with numba and with the pure-numpy fallback.

Each backend runs in its own interpreter because the switch is read at
import time.  Run from the repository root::

    python benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import json
import os
import subprocess
import sys

_WORKER = r"""
import json, sys, time
import numpy as np
from chanep import channels as ch
from chanep._accel import BACKEND
from chanep._kernels import discriminant3, template_residual
from chanep.tomography import mle_cptp_fit, simulate_experiment

repeat = int(sys.argv[1])
rng = np.random.default_rng(0)
Es = rng.normal(size=(20000, 3, 3))
table = simulate_experiment(ch.interpolate(ch.e1(), ch.e2(), 0.4), 4096, 1)
target = np.ascontiguousarray(ch.interpolate(ch.e1(), ch.e2(), 0.25))
xs = rng.uniform(-np.pi, np.pi, (2000, 8))

def timed(fn):
    t0 = time.perf_counter()
    fn()
    return time.perf_counter() - t0

def disc():
    discriminant3(Es)

def mle():
    mle_cptp_fit(table)

def resid():
    for x in xs:
        template_residual(x, target, True)

out = {"backend": BACKEND}
for name, fn in [("discriminant (20000 matrices)", disc), ("MLE fit (4096 shots)", mle),
                 ("template residual (2000 calls)", resid)]:
    fn()  # warm-up, includes compilation
    out[name] = min(timed(fn) for _ in range(repeat))
print(json.dumps(out))
"""


def run(pure: bool, repeat: int) -> dict:
    env = dict(os.environ)
    env.pop("CHANEP_PURE_NUMPY", None)
    if pure:
        env["CHANEP_PURE_NUMPY"] = "1"
    r = subprocess.run([sys.executable, "-c", _WORKER, str(repeat)], env=env,
                       capture_output=True, text=True, check=True)
    return json.loads(r.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    fast, slow = run(False, args.repeat), run(True, args.repeat)
    print(f"{'kernel':34s} {fast['backend']:>10s} {slow['backend']:>10s} {'speedup':>8s}")
    for key in fast:
        if key == "backend":
            continue
        print(f"{key:34s} {fast[key]:9.4f}s {slow[key]:9.4f}s {slow[key] / fast[key]:7.1f}x")


if __name__ == "__main__":
    main()
