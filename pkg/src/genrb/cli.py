"""Command-line entry point: ``genrb <subcommand> [options]``.

Exit codes: 0 success, 1 usage or configuration error, 2 parameter outside
the domain, 3 unreadable or corrupt artifact.
"""

import argparse
import json
import logging
import os
import sys
import time

import numpy as np

from .artifact import load_rom, read_header, save_rom
from .errors import ArtifactError, GenRBError, InvalidInputError, OutOfDomainError
from .rom import estimate_errors, online_solve
from .studies import (
    ExperimentConfig,
    run_approx_study,
    run_greedy,
    run_rom_eval,
    write_atomic,
)

__all__ = ["main", "online_query", "build_parser"]

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN, EXIT_ARTIFACT = 0, 1, 2, 3


def _g(x):
    return format(float(x), ".17g")


def online_query(path, mu):
    """Answer a query from the artifact alone; returns the printed record as a dict."""
    rm = load_rom(path)
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    if mu.shape != (rm.box.P,):
        raise OutOfDomainError(f"expected {rm.box.P} parameters, got {mu.size}")
    r1 = online_solve(rm, mu, 1)
    t0 = time.perf_counter()
    est = estimate_errors(rm, mu, r1)
    t_est = time.perf_counter() - t0
    return {
        "mu": [float(v) for v in mu],
        "N": rm.meta.get("N"),
        "M1": rm.M1,
        "M2": rm.M2,
        "output": r1.output,
        "output_est": est.output_est,
        "solution_est": est.solution_est,
        "output_rel": est.output_rel,
        "solution_rel": est.solution_rel,
        "solve_seconds": r1.seconds,
        "estimate_seconds": t_est,
    }


def _format_record(rec, timings=True):
    keys = [k for k in rec if timings or not k.endswith("seconds")]
    lines = []
    for k in keys:
        v = rec[k]
        if isinstance(v, float):
            v = _g(v)
        elif isinstance(v, list):
            v = " ".join(_g(x) for x in v)
        lines.append(f"{k} = {v}")
    return "\n".join(lines)


def _load_config(args):
    if args.config is None:
        raise InvalidInputError("--config is required for this subcommand")
    try:
        with open(args.config) as fh:
            d = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInputError(f"cannot read config: {exc}") from exc
    if args.out is not None:
        d["out"] = args.out
    if args.threads is not None:
        d["threads"] = args.threads
    if args.no_basis:
        d["store_bases"] = False
    if args.seed is not None:
        d["seed"] = args.seed
    return ExperimentConfig.from_dict(d)


def _cmd_approx(args):
    cfg = _load_config(args)
    res = run_approx_study(cfg)
    path = os.path.join(cfg.out, f"approx-{cfg.problem}-{cfg.config_hash()}.csv")
    write_atomic(path, res.to_csv())
    print(path)


def _cmd_greedy(args):
    cfg = _load_config(args)
    sample, rm, trace = run_greedy(cfg)
    stem = os.path.join(cfg.out, f"greedy-{cfg.problem}-{cfg.config_hash()}")
    write_atomic(stem + ".csv", trace.to_csv())
    os.makedirs(cfg.out, exist_ok=True)
    save_rom(rm, stem + ".grb")
    print(stem + ".csv")
    print(stem + ".grb")


def _cmd_rom_eval(args):
    cfg = _load_config(args)
    model = None
    if args.artifact is not None:
        model = load_rom(args.artifact)
        if model.sample is None:
            raise ArtifactError("artifact carries no parameter sample")
        if not model.has_bases:
            raise ArtifactError("true errors need an artifact stored with bases")
        sample = model.sample
    elif args.sample is not None:
        sample = np.loadtxt(args.sample, delimiter=",", ndmin=2)
    else:
        raise InvalidInputError("rom-eval needs --artifact or --sample")
    res = run_rom_eval(cfg, sample, model=model)
    path = os.path.join(cfg.out, f"rom-eval-{cfg.problem}-{cfg.config_hash()}.csv")
    write_atomic(path, res.to_csv())
    print(path)


def _cmd_online(args):
    rec = online_query(args.artifact, args.mu)
    print(_format_record(rec, timings=not args.no_timings))


def _cmd_inspect(args):
    header = read_header(args.artifact)
    print(json.dumps(header, indent=2, sort_keys=True))


def build_parser():
    p = argparse.ArgumentParser(prog="genrb", description="Generative reduced basis toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON experiment description")
        sp.add_argument("--out", help="output directory (overrides config)")
        sp.add_argument("--threads", type=int)
        sp.add_argument("--no-basis", action="store_true",
                        help="store artifacts without the basis vectors")
        sp.add_argument("--seed", type=int)

    sp = sub.add_parser("approx-study", help="approximation error of RB spaces")
    common(sp)
    sp.set_defaults(func=_cmd_approx)

    sp = sub.add_parser("greedy", help="greedy sampling; writes trace and artifact")
    common(sp)
    sp.set_defaults(func=_cmd_greedy)

    sp = sub.add_parser("rom-eval", help="test-grid errors and estimates")
    common(sp)
    sp.add_argument("--artifact", help="GRB1 file whose sample and model are evaluated")
    sp.add_argument("--sample", help="CSV of parameter points (one per row)")
    sp.set_defaults(func=_cmd_rom_eval)

    sp = sub.add_parser("online", help="query an artifact at one parameter point")
    sp.add_argument("artifact")
    sp.add_argument("mu", type=float, nargs="+")
    sp.add_argument("--no-timings", action="store_true",
                    help="omit timings so repeated queries print identical records")
    sp.set_defaults(func=_cmd_online)

    sp = sub.add_parser("inspect", help="dump an artifact header")
    sp.add_argument("artifact")
    sp.set_defaults(func=_cmd_inspect)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        args.func(args)
    except OutOfDomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except ArtifactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARTIFACT
    except (InvalidInputError, GenRBError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
