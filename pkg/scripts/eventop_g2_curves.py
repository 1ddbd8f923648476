"""g2 versus eta for a set of kappa values (the event-operator interpolation curves)."""

import argparse
import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ctcsim.eventop import CommutatorKernel, Contracted, eo_g2


@dataclass
class G2Config:
    kappas: list = field(default_factory=lambda: [0.01, 0.1, 0.3, 0.5, 1.0, 10.0])
    eta_step: float = 0.01
    out: str = "results/eventop_g2.csv"


def run(cfg: G2Config):
    etas = np.round(np.arange(cfg.eta_step, 1.0, cfg.eta_step), 10)
    rows = []
    for k in cfg.kappas:
        K = CommutatorKernel.gaussian(k)
        for e in etas:
            rows.append([k, e, eo_g2(float(e), K, Contracted())])
    path = Path(cfg.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kappa", "eta", "g2"])
        w.writerows([[format(x, ".17g") for x in r] for r in rows])
    return path


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--kappas", type=float, nargs="+", default=G2Config().kappas)
    ap.add_argument("--eta-step", type=float, default=0.01)
    ap.add_argument("--out", default=G2Config.out)
    a = ap.parse_args()
    print(run(G2Config(a.kappas, a.eta_step, a.out)))
