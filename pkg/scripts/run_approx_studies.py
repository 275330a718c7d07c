"""Approximation studies on the three analytic manifolds.

Writes one long-form CSV per configuration and prints the error metrics at
the largest N.

    python scripts/run_approx_studies.py configs/approx_1d.json [...]
"""

import argparse
import logging
import os

from genrb.studies import ExperimentConfig, run_approx_study, write_atomic


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("configs", nargs="*", default=[
        "configs/approx_1d.json", "configs/approx_2d.json", "configs/approx_3d.json"])
    ap.add_argument("--out")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    for path in args.configs:
        cfg = ExperimentConfig.from_json(path)
        if args.out:
            cfg.out = args.out
        res = run_approx_study(cfg)
        dest = os.path.join(cfg.out, f"approx-{cfg.problem}-{cfg.config_hash()}.csv")
        write_atomic(dest, res.to_csv())
        N = max(cfg.N_list)
        print(f"{cfg.problem}  N={N}  ({dest})")
        for r in res.select(N=N, metric="error_metric_absolute"):
            print(f"  {r['activation']:>10} {r['space']:>4}  {r['value']:.3e}")


if __name__ == "__main__":
    main()
