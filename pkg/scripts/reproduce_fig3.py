"""Mean latency vs workload at SNR_IF = 2, 5 and 10 dB.

Writes one CSV per SNR and prints the 2 ms crossing and the per-megabit
slope of each curve.

    python scripts/reproduce_fig3.py --realizations 4000 --out-dir results
"""
import argparse
import dataclasses
from pathlib import Path

from fogslm.config import MEGABIT
from fogslm.experiments import THREE_LAYER, figure_configs, linear_fit, run_sweep, threshold_crossing


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--realizations", type=int, default=4000)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--solver", choices=("slm", "oracle", "both"), default="slm")
    ap.add_argument("--workers", type=int, default=0, help="0 means one per CPU")
    ap.add_argument("--out-dir", default="results")
    args = ap.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, cfg in figure_configs("fig3").items():
        cfg = dataclasses.replace(cfg, n_realizations=args.realizations, seed=args.seed,
                                  solver=args.solver, workers=args.workers)
        result = run_sweep(cfg)
        result.write_csv(out / f"{name}.csv")
        x, y, _ = result.series(THREE_LAYER)
        slope, _, r2 = linear_fit(x / MEGABIT, y * 1e3)
        cross = threshold_crossing(x / MEGABIT, y, 2e-3)
        cross_text = "none" if cross is None else f"{cross:.3f} Mb"
        print(f"{name}: slope {slope:.3f} ms/Mb (R^2 {r2:.4f}), 2 ms crossing at {cross_text}")


if __name__ == "__main__":
    main()
