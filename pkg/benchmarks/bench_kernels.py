"""Time one closed-loop episode per controller kind on each kernel backend.

    python benchmarks/bench_kernels.py [--seconds 5] [--repeat 3]
"""

import argparse
import time

import numpy as np

from vsr_snca import kernels
from vsr_snca.assessment import LocomotionProtocol, evaluate_locomotion
from vsr_snca.morphology import BIPED, WORM, parse_morphology
from vsr_snca.nca import PRESETS, build_controller, genotype_length
from vsr_snca.terrain import make_terrain


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seconds", type=float, default=5.0, help="simulated seconds per episode")
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    backends = ["python"] + (["cython"] if kernels.compiled is not None else [])
    protocol = LocomotionProtocol(duration=args.seconds, transient=min(1.0, args.seconds / 2))
    terrain = make_terrain("hilly", {"h": 1.0, "d": 5.0}, seed=0)
    rng = np.random.default_rng(0)

    print(f"{'body':6} {'preset':9} " + " ".join(f"{b:>12}" for b in backends) + "   speedup")
    for shape_name, shape in (("worm", WORM), ("biped", BIPED)):
        grid = parse_morphology(shape)
        for preset in ("ud", "non-ud", "und-snca"):
            cfg = PRESETS[preset]
            genotype = rng.uniform(-1, 1, genotype_length(cfg, grid))
            controller = build_controller(cfg, grid, genotype)
            per_sim_s = {}
            for b in backends:
                elapsed = best_of(lambda: evaluate_locomotion(controller, terrain, protocol,
                                                              backend=b), args.repeat)
                per_sim_s[b] = elapsed / args.seconds
            cells = " ".join(f"{per_sim_s[b] * 1e3:9.2f} ms" for b in backends)
            speedup = (f"{per_sim_s['python'] / per_sim_s['cython']:8.1f}x"
                       if "cython" in per_sim_s else "       -")
            print(f"{shape_name:6} {preset:9} {cells}  {speedup}")
    print("(wall time per simulated second, best of "
          f"{args.repeat}; active default backend: {kernels.BACKEND})")


if __name__ == "__main__":
    main()
