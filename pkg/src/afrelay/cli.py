"""Command-line entry point: ``afrelay {design,ber,sumrate,complexity}``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

import argparse
import csv
import json
import logging
import os
import sys
import time

import numpy as np

from . import __version__
from .complexity import complexity_rows, CSV_HEADER
from .config import RunConfig, load_config
from .exceptions import (
    AfRelayError,
    ConfigError,
    DegenerateError,
    InfeasibleConstraintError,
    SingularMatrixError,
    ValidationError,
)
from .mmse import run_mmse
from .msr import run_msr
from .network import Topology, draw_channels
from .sim import BerRow, SumRateRow, make_constraint, run_ber_sweep, run_sumrate_sweep

log = logging.getLogger("afrelay")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(x):
    return f"{x:.12g}"


def cmd_design(cfg, out_dir):
    top = Topology.from_snr_db(cfg.node_counts, cfg.design.snr_db)
    channels = draw_channels(top, np.random.SeedSequence([cfg.seed]))
    d = cfg.design
    cons = make_constraint(d.constraint, top, cfg.total_power)
    res = run_mmse(top, channels, cons, iterations=d.iterations)

    trace_rows = [(k, f"mmse-{d.constraint}", "mse", _fmt(v)) for k, v in enumerate(res.mse_trace)]
    gain_rows = []
    for i, a in enumerate(res.gains):
        for j, g in enumerate(a):
            if d.constraint == "global":
                lam = res.multipliers
            elif d.constraint == "local":
                lam = res.multipliers[i]
            else:
                lam = res.multipliers[i][j]
            gain_rows.append(
                (f"mmse-{d.constraint}", i + 1, j + 1, _fmt(g.real), _fmt(g.imag), _fmt(float(lam)))
            )
    if top.n_sources == 1:
        local = make_constraint("local", top, cfg.total_power)
        sr = run_msr(top, channels, local, iterations=d.iterations, solver=d.solver)
        trace_rows += [(k, f"msr-{d.solver}", "sr_bps_hz", _fmt(v)) for k, v in enumerate(sr.sr_trace)]
        for i, a in enumerate(sr.gains):
            for j, g in enumerate(a):
                gain_rows.append((f"msr-{d.solver}", i + 1, j + 1, _fmt(g.real), _fmt(g.imag), ""))
    else:
        log.info("sum-rate design skipped: it needs a single source")

    trace_path = os.path.join(out_dir, "design_trace.csv")
    gains_path = os.path.join(out_dir, "design_gains.csv")
    _write_csv(trace_path, ("iteration", "design", "metric", "value"), trace_rows)
    _write_csv(gains_path, ("design", "group", "node", "gain_re", "gain_im", "multiplier"), gain_rows)
    return [trace_path, gains_path]


def cmd_ber(cfg, out_dir):
    rows = run_ber_sweep(cfg.sim_config())
    path = os.path.join(out_dir, "ber.csv")
    _write_csv(path, BerRow.CSV_FIELDS, [r.csv_row() for r in rows])
    power_path = os.path.join(out_dir, "ber_power.csv")
    _write_csv(
        power_path,
        ("snr_db", "design", "constraint", "feedback", "max_rel_power_violation"),
        [(f"{r.snr_db:g}", r.design, r.constraint, r.feedback, f"{r.power_violation:.6g}") for r in rows],
    )
    return [path, power_path]


def cmd_sumrate(cfg, out_dir):
    rows = run_sumrate_sweep(cfg.sim_config())
    path = os.path.join(out_dir, "sumrate.csv")
    _write_csv(path, SumRateRow.CSV_FIELDS, [r.csv_row() for r in rows])
    return [path]


def cmd_complexity(cfg, out_dir):
    c = cfg.complexity
    rows = complexity_rows(c.n_values, c.m, c.n0, c.n_dest, c.n_q, c.n_p)
    path = os.path.join(out_dir, "complexity.csv")
    _write_csv(path, CSV_HEADER, rows)
    return [path]


COMMANDS = {
    "design": cmd_design,
    "ber": cmd_ber,
    "sumrate": cmd_sumrate,
    "complexity": cmd_complexity,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="afrelay", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=fn.__name__.replace("cmd_", "") + " run")
        p.add_argument("--config", help="YAML experiment file (defaults apply when omitted)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--threads", type=int, help="worker processes for Monte-Carlo runs")
        p.add_argument("--out-dir", default="out", help="directory for CSV outputs and the manifest")
        p.add_argument("--iterations", type=int, help="alternating iterations per design")
        p.add_argument("--constraint", choices=("global", "local", "individual"))
        p.add_argument("--solver", choices=("qr", "power"))
        p.add_argument("--feedback", choices=("perfect", "bsc"))
        p.add_argument("--pe", type=float, help="bit error probability of the feedback channel")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def apply_overrides(cfg, args):
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be >= 0")
        cfg = cfg.replace(seed=args.seed)
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg = cfg.replace(threads=args.threads)
    design = {}
    if args.iterations is not None:
        if args.iterations < 1:
            raise ConfigError("--iterations must be >= 1")
        design["iterations"] = args.iterations
    if args.constraint is not None:
        design["constraint"] = args.constraint
    if args.solver is not None:
        design["solver"] = args.solver
    if design:
        cfg = cfg.replace("design", **design)
    feedback = {}
    if args.feedback is not None:
        feedback["model"] = args.feedback
    if args.pe is not None:
        if not 0.0 <= args.pe <= 0.5:
            raise ConfigError("--pe must lie in [0, 0.5]")
        feedback["pe"] = args.pe
    if feedback:
        cfg = cfg.replace("feedback", **feedback)
    return cfg


def run(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    start = time.perf_counter()
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        cfg = apply_overrides(cfg, args)
        cfg.sim_config()
    except (ConfigError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = os.path.abspath(args.out_dir)
    os.makedirs(out_dir, exist_ok=True)
    try:
        outputs = COMMANDS[args.command](cfg, out_dir)
    except ValidationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (
        DegenerateError,
        SingularMatrixError,
        InfeasibleConstraintError,
        ArithmeticError,
        AfRelayError,
        np.linalg.LinAlgError,
    ) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    manifest = {
        "command": args.command,
        "version": __version__,
        "seed": cfg.seed,
        "wall_time_s": round(time.perf_counter() - start, 6),
        "config": cfg.to_dict(),
        "outputs": [os.path.basename(p) for p in outputs],
    }
    path = os.path.join(out_dir, f"{args.command}_manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    for p in outputs:
        print(p)
    return EXIT_OK


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
