"""Compare the bound for each coordinate across the built-in charts of every canonical family."""

import argparse
import sys
from dataclasses import dataclass

import numpy as np

from crbound import ParameterFunction, crb, fisher_matrix, pullback, reparameterize
from crbound.canonical import canonical_families
from crbound.geometry import builtin_charts
from crbound.model_space import probe_points


@dataclass
class Config:
    per_dim: int = 3
    tol: float = 1e-6


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--per-dim", type=int, default=3)
    ap.add_argument("--tol", type=float, default=1e-6)
    cfg = Config(**vars(ap.parse_args(argv)))

    worst_all = 0.0
    for name, fam in canonical_families().items():
        for chart in builtin_charts(fam):
            new = reparameterize(fam, chart)
            worst_law = worst_rel = 0.0
            for phi in probe_points(fam, cfg.per_dim):
                psi = chart.to_new(phi)
                J = chart.jacobian_at(psi)
                law = fisher_matrix(new, psi).entries - J.T @ fisher_matrix(fam, phi).entries @ J
                worst_law = max(worst_law, float(np.max(np.abs(law))))
                for j in range(fam.k):
                    theta = ParameterFunction.coordinate(j)
                    b0 = crb(theta, fam, phi)
                    worst_rel = max(worst_rel, abs(crb(pullback(theta, chart), new, psi) - b0) / b0)
            worst_all = max(worst_all, worst_law, worst_rel)
            print(f"{name:<22}{chart.label:<10} tensor law {worst_law:.2e}   bound rel. diff {worst_rel:.2e}")
    return 0 if worst_all <= cfg.tol else 1


if __name__ == "__main__":
    sys.exit(main())
