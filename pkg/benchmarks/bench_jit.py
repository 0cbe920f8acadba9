"""Compare the compiled kernels with the pure-numpy fallback.

Each workload runs in a fresh interpreter, once with the default settings and
once with ``CONSERVO_DISABLE_JIT=1``.  Compilation is excluded: the timed
region starts after a one-step warm-up run.

    python benchmarks/bench_jit.py [--repeat 3]
"""

import argparse
import json
import os
import statistics
import subprocess
import sys

WORKLOADS = [
    # name, method, t_final
    ("lv2", "direct", 20.0),
    ("lv3", "mixed_svd", 5.0),
    ("arenstorf", "rk4", 0.02),
    ("schwarzschild", "mixed", 10.0),
]

CHILD = """
import json, sys, time
import conservo
from conservo import StepperConfig, integrate
from conservo.systems import EXPERIMENTS
name, method, t_final = sys.argv[1], sys.argv[2], float(sys.argv[3])
exp = EXPERIMENTS[name]
system, x0 = exp.build(0)
cfg = StepperConfig(tau=exp.tau, variant=method)
integrate(system, cfg, x0, exp.t0, exp.t0 + exp.tau)
start = time.perf_counter()
traj = integrate(system, cfg, x0, exp.t0, t_final)
elapsed = time.perf_counter() - start
print(json.dumps({"jit": conservo.JIT_ENABLED, "steps": len(traj.diagnostics), "s": elapsed}))
"""


def measure(workload, disable_jit, repeat):
    env = dict(os.environ)
    env["CONSERVO_DISABLE_JIT"] = "1" if disable_jit else "0"
    times = []
    for _ in range(repeat):
        out = subprocess.run([sys.executable, "-c", CHILD, *map(str, workload)], env=env,
                             capture_output=True, text=True, check=True)
        result = json.loads(out.stdout)
        times.append(result["s"])
    return result["steps"], statistics.median(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    print(f"{'workload':<26}{'steps':>8}{'jit s':>11}{'numpy s':>11}{'speedup':>10}")
    for workload in WORKLOADS:
        steps, fast = measure(workload, False, args.repeat)
        _, slow = measure(workload, True, args.repeat)
        label = f"{workload[0]}/{workload[1]}"
        print(f"{label:<26}{steps:>8}{fast:>11.4f}{slow:>11.4f}{slow / fast:>9.0f}x")


if __name__ == "__main__":
    main()
