"""Compare the compiled and pure-Python integration kernels.

Runs the training-data generation step on the Van der Pol grid with each
backend, checks that the outputs are bit-identical and prints timings.

    python benchmarks/bench_kernels.py [--per-axis 30] [--lambda 1e6] [--repeat 3]
"""
import argparse
import time

from koopgen._kernels import available_backends
from koopgen.datagen import GenConfig, SamplePlan, generate
from koopgen.dictionary import monomials_2d
from koopgen.dynamics import Flow, vanderpol


def best_time(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - start)
    return best, out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--per-axis", type=int, default=30)
    parser.add_argument("--lambda", dest="lam", type=float, default=1e6)
    parser.add_argument("--tau", type=float, default=1.0)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)

    d = monomials_2d(3, 2)
    plan = SamplePlan(((-1.0, 1.0), (-1.0, 1.0)), args.per_axis)
    cfg = GenConfig(args.lam, args.tau)
    backends = available_backends()
    print(f"M={plan.count} samples, N={d.N}, lambda={args.lam:g}, tau={args.tau:g}; "
          f"backends: {', '.join(backends)}")

    results = {}
    for name in backends:
        flow = Flow(vanderpol(), backend=name)
        results[name] = best_time(lambda: generate(flow, d, plan, cfg), args.repeat)
        secs = results[name][0]
        print(f"  {name:<9} {secs:8.3f} s   {1e6 * secs / plan.count:9.1f} us/sample")

    if "compiled" in results:
        (tc, a), (tp, b) = results["compiled"], results["python"]
        same = a.Y.tobytes() == b.Y.tobytes()
        print(f"speedup {tp / tc:.1f}x; outputs bit-identical: {same}")
        return 0 if same else 1
    print("compiled kernels not built; nothing to compare")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
