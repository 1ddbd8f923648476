"""Quadrature variances after M open-timelike-curve passes, circuit vs closed form,
plus the ancilla photon cost of the R = N, M = N family."""

import argparse
from dataclasses import dataclass

import numpy as np

from ctcsim.gaussianctc import hup_demo, hup_resource_scaling, otc_circuit_simulate, otc_variances


@dataclass
class HupConfig:
    M_max: int = 10
    r: float = 5.0


def main(cfg: HupConfig):
    print(f"{'M':>3} {'VarQ circuit':>14} {'VarQ closed':>14} {'sigmaQ sigmaP':>14}")
    for M in range(1, cfg.M_max + 1):
        st = otc_circuit_simulate(M, cfg.r)
        vq, _ = otc_variances(M, cfg.r)
        print(f"{M:3d} {st.cov[0, 0]:14.6e} {vq:14.6e} {hup_demo(M, cfg.r).product_std:14.6e}")
    print(f"\n{'N':>3} {'VarQ * 2^N':>12} {'ancilla <n>':>14}")
    for N in range(1, cfg.M_max + 1):
        K, n = hup_resource_scaling(N)
        print(f"{N:3d} {K:12.6f} {n:14.6e}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--M-max", type=int, default=10)
    ap.add_argument("--r", type=float, default=5.0)
    a = ap.parse_args()
    main(HupConfig(a.M_max, a.r))
