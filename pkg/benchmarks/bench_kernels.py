"""Compare the numba and numpy kernel backends on realistic workloads.

Times the three hot paths (exact evaluation, value-and-gradient, and the
Monte Carlo simulator) on the built-in benchmarks at a couple of controller
sizes, once per backend.  Numba timings exclude the first call so JIT
compilation does not pollute the numbers.

Run:  python benchmarks/bench_kernels.py [--episodes 2000] [--repeat 5]
"""

from __future__ import annotations

import argparse
import time

from decfsc import backend as backend_mod
from decfsc import domains, random_deterministic
from decfsc.evaluation import evaluate, value_and_gradient
from decfsc.simulate import RolloutConfig, estimate_value


def _time(fn, repeat: int) -> float:
    fn()  # warm-up (JIT compile / cache touch)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--episodes", type=int, default=2000)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    cases = [
        ("broadcast", 3, 1),
        ("broadcast", 4, 1),
        ("tiger", 3, 2),
        ("recycling", 4, 1),
    ]
    backends = ["numpy"]
    if backend_mod.numba_import_error is None:
        backends.insert(0, "numba")
    else:
        print(f"numba unavailable ({backend_mod.numba_import_error}); "
              f"benchmarking numpy only")

    header = (f"{'case':<22} {'kernel':<18} "
              + " ".join(f"{b + ' (s)':>14}" for b in backends))
    print(header)
    print("-" * len(header))

    for domain, nodes, device in cases:
        model = domains.build(domain)
        policy = random_deterministic(model, nodes, device, seed=1)
        rollout = RolloutConfig(num_episodes=args.episodes, seed=0)
        rows = {
            "evaluate": lambda k: lambda: _with_kernels(
                k, evaluate, model, policy),
            "value_and_gradient": lambda k: lambda: _with_kernels(
                k, value_and_gradient, model, policy),
            "simulate": lambda k: lambda: _with_kernels(
                k, estimate_value, model, policy, rollout),
        }
        case = f"{domain} K={nodes} C={device}"
        for kernel_name, make in rows.items():
            cells = []
            for b in backends:
                t = _time(make(b), args.repeat)
                cells.append(f"{t:>14.6f}")
            print(f"{case:<22} {kernel_name:<18} " + " ".join(cells))


def _with_kernels(backend_name: str, fn, *args):
    """Run fn with the chosen kernel set patched in."""
    saved = backend_mod.kernels
    backend_mod.kernels = backend_mod.get_kernels(backend_name)
    try:
        return fn(*args)
    finally:
        backend_mod.kernels = saved


if __name__ == "__main__":
    main()
