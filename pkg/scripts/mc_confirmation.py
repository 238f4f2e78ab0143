"""Monte Carlo confirmation of the bound: many seeds per canonical case.

Each seed draws ``samples`` observations, estimates the estimator variance with
its standard error, and passes if it is at least ``bound - 3 * std_error``.

    python scripts/mc_confirmation.py --seeds 20 --samples 100000
"""

import argparse
import sys
import time
from dataclasses import dataclass
from typing import Optional

from crbound import mc_verify
from crbound.canonical import canonical_cases
from crbound.cli import dumps
from crbound.estimation import MC_PASS_RATE


@dataclass
class Config:
    seeds: int = 20
    first_seed: int = 0
    samples: int = 100_000
    workers: int = 1
    only: Optional[str] = None
    json_path: Optional[str] = None


def run(cfg: Config) -> dict:
    seeds = range(cfg.first_seed, cfg.first_seed + cfg.seeds)
    out = {}
    for case in canonical_cases():
        if cfg.only and cfg.only not in case.name:
            continue
        p = case.points[0]
        summary = mc_verify(case.estimator, case.theta, case.family, p, seeds, cfg.samples,
                            workers=cfg.workers)
        out[case.name] = {"at": list(p), **summary.to_dict()}
    return out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--first-seed", type=int, default=0)
    ap.add_argument("--samples", type=int, default=100_000)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--only")
    ap.add_argument("--json", dest="json_path")
    cfg = Config(**vars(ap.parse_args(argv)))

    t0 = time.perf_counter()
    results = run(cfg)
    print(f"{'case':<26}{'bound':>12}{'mean var':>12}{'min slack':>12}{'pass rate':>11}")
    for name, s in results.items():
        mean_var = sum(s["variances"]) / len(s["variances"])
        print(f"{name:<26}{s['bound']:>12.6g}{mean_var:>12.6g}{s['min_slack']:>12.2e}{s['pass_rate']:>11.2f}")
    print(f"{len(results)} cases, {cfg.seeds} seeds x {cfg.samples} samples, {time.perf_counter() - t0:.1f}s")
    if cfg.json_path:
        with open(cfg.json_path, "w", encoding="utf-8") as fh:
            fh.write(dumps(results) + "\n")
    return 0 if all(s["pass_rate"] >= MC_PASS_RATE for s in results.values()) else 1


if __name__ == "__main__":
    sys.exit(main())
