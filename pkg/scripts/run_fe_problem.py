"""Greedy sampling followed by test-grid evaluation for a finite-element problem.

    python scripts/run_fe_problem.py configs/greedy_convdiff.json configs/eval_convdiff.json
    python scripts/run_fe_problem.py configs/greedy_reacdiff.json configs/eval_reacdiff.json

The greedy trace, the final artifact and the evaluation CSV go to the
evaluation config's output directory. Models for every N in the evaluation
config (up to the greedy sample size, plus the terminal N) are rebuilt on
prefixes of the greedy sample.
"""

import argparse
import logging
import os
import time

from genrb.artifact import save_rom
from genrb.studies import ExperimentConfig, make_problem, run_greedy, run_rom_eval, write_atomic


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("greedy_config")
    ap.add_argument("eval_config")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    gcfg = ExperimentConfig.from_json(args.greedy_config)
    gcfg.threads = args.threads
    ecfg = ExperimentConfig.from_json(args.eval_config)
    fom = make_problem(gcfg)

    t0 = time.perf_counter()
    sample, rm, trace = run_greedy(gcfg, fom)
    print(f"greedy: N={len(sample)} in {time.perf_counter() - t0:.1f}s, "
          f"final max estimate {trace.records[-1].max_estimate:.3e}")
    stem = os.path.join(ecfg.out, f"greedy-{gcfg.problem}-{gcfg.config_hash()}")
    write_atomic(stem + ".csv", trace.to_csv())
    save_rom(rm, stem + ".grb")

    ecfg.N_list = sorted({n for n in ecfg.N_list if n <= len(sample)} | {len(sample)})
    res = run_rom_eval(ecfg, sample.points, fom)
    dest = os.path.join(ecfg.out, f"rom-eval-{ecfg.problem}-{ecfg.config_hash()}.csv")
    write_atomic(dest, res.to_csv())
    N = len(sample)
    std = res.value(space="standard", N=N, metric="eps_s_max_rel")
    print(f"terminal N={N}: standard RB max output error {std:.3e}")
    for act in ecfg.activations:
        gen = res.value(space="generative", activation=act, N=N, metric="eps_s_max_rel")
        print(f"  {act:>10}: {gen:.3e}  (ratio {gen / std:.2e})")
    print(dest)


if __name__ == "__main__":
    main()
