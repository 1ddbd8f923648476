"""Mean photon number and g2 of the switching source versus the number of SPDCs,
closed form, exact distribution and Monte-Carlo side by side."""

import argparse
import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ctcsim.fockctc import SpodParams, spod_exact_stats, spod_montecarlo, spod_stats


@dataclass
class SpodScan:
    chi: float = 0.01
    n_min: int = 1000
    n_max: int = 100_000
    points: int = 12
    trials: int = 100_000
    seed: int = 0
    out: str = "results/spod_scan.csv"


def run(cfg: SpodScan):
    Ns = np.unique(np.geomspace(cfg.n_min, cfg.n_max, cfg.points).astype(int))
    header = ["N", "mean_n", "g2", "mean_n_exact", "g2_exact", "mc_mean_n", "mc_stderr_mean", "mc_g2", "mc_stderr_g2"]
    rows = []
    for i, N in enumerate(Ns):
        p = SpodParams(cfg.chi, int(N))
        a, e = spod_stats(p), spod_exact_stats(p)
        mc = spod_montecarlo(p, cfg.trials, cfg.seed + i)
        rows.append([N, a["mean_n"], a["g2"], e["mean_n"], e["g2"], mc.mean_n, mc.stderr_mean, mc.g2, mc.stderr_g2])
    path = Path(cfg.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows([[format(x, ".17g") for x in r] for r in rows])
    return path


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    for f, v in vars(SpodScan()).items():
        ap.add_argument(f"--{f.replace('_', '-')}", type=type(v), default=v)
    print(run(SpodScan(**vars(ap.parse_args()))))
