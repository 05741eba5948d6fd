"""SLM against the grid oracle on seeded random instances.

    python scripts/compare_solvers.py --instances 50 --seed 20240601
"""
import argparse
import time

import numpy as np

from fogslm.experiments import random_instance
from fogslm.oracle import grid_oracle
from fogslm.slm import slm_run


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--instances", type=int, default=50)
    ap.add_argument("--seed", type=int, default=20240601)
    ap.add_argument("--grid-step", type=float, default=1e-3, help="SLM power-fraction step")
    ap.add_argument("--oracle-step", type=float, default=1e-2)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    gaps, t_slm, t_oracle = [], 0.0, 0.0
    for _ in range(args.instances):
        inst = random_instance(rng)
        t0 = time.perf_counter()
        slm, trace = slm_run(inst, grid_step=args.grid_step)
        t1 = time.perf_counter()
        ref = grid_oracle(inst, args.oracle_step)
        t2 = time.perf_counter()
        t_slm += t1 - t0
        t_oracle += t2 - t1
        gaps.append((slm.t - ref.t) / ref.t)
    gaps = np.array(gaps)
    print(f"instances: {args.instances}")
    print(f"relative gap (slm - oracle) / oracle: mean {gaps.mean():.2e}, "
          f"max {gaps.max():.2e}, min {gaps.min():.2e}")
    print(f"within 1%: {int(np.sum(np.abs(gaps) <= 0.01))}/{args.instances}")
    print(f"time: slm {t_slm:.2f} s, oracle {t_oracle:.2f} s")


if __name__ == "__main__":
    main()
