"""Command-line interface.

Exit codes: 0 success, 2 usage or configuration error, 1 runtime error
(diagnostic on stderr).  The --threads flag pins the BLAS/OpenMP thread
count and must take effect before any numerical library is imported, so
this module defers all heavy imports into the subcommand handlers.
"""

from __future__ import annotations

import argparse
import os
import sys


class CliError(Exception):
    """Usage-level problem detected after argument parsing."""


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gshape",
        description="Geometric constellation shaping for the AWGN channel.",
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=0,
        metavar="N",
        help="worker threads for numerical kernels (0 = library default)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a baseline constellation file")
    gen.add_argument(
        "kind",
        choices=["qpsk", "bpsk", "qam", "apsk2", "random", "sp12d", "product"],
    )
    gen.add_argument("-o", "--output", required=True, metavar="FILE")
    gen.add_argument("--name", default=None, help="name stored in the file")
    gen.add_argument("-N", "--dims", type=int, default=2)
    gen.add_argument("-M", "--size", type=int, default=16,
                     help="point count (qam order / random size)")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--inner", type=int, default=4, help="apsk2 inner ring size")
    gen.add_argument("--outer", type=int, default=4, help="apsk2 outer ring size")
    gen.add_argument("--ratio", type=float, default=2.0, help="apsk2 radius ratio")
    gen.add_argument("--phase", type=float, default=None, help="apsk2 outer phase offset")
    gen.add_argument("-a", "--first", metavar="FILE", help="product: first factor")
    gen.add_argument("-b", "--second", metavar="FILE", help="product: second factor")
    gen.set_defaults(func=_cmd_generate)

    for cmd, needs_output in (("evaluate", False), ("sweep", True)):
        ev = sub.add_parser(
            cmd,
            help="evaluate AIR on an SNR grid"
            + (" and write CSV" if needs_output else ""),
        )
        ev.add_argument("-c", "--constellation", required=True, metavar="FILE")
        ev.add_argument("--metric", default="MI", choices=["MI", "GMI", "mi", "gmi"])
        ev.add_argument("--snr", required=True, help="SNR in dB: X or A:B:STEP")
        ev.add_argument("--estimator", default="gh:10",
                        help="gh:N | mc:SAMPLES[:SEED] | rq:COUNT[:SEED]")
        ev.add_argument("--seed", type=int, default=0, help="sweep-level seed")
        ev.add_argument("-o", "--output", required=needs_output, metavar="CSV")
        ev.add_argument("--capacity", action="store_true",
                        help="add a per-2D capacity column to the CSV")
        ev.set_defaults(func=_cmd_evaluate)

    opt = sub.add_parser("optimize", help="run a shaping optimisation from a config")
    opt.add_argument("-f", "--config", required=True, metavar="CONFIG")
    opt.add_argument("-o", "--outdir", default=None, metavar="DIR",
                     help="override the config's output directory")
    opt.set_defaults(func=_cmd_optimize)

    gain = sub.add_parser("gain", help="dB gain of sweep A over sweep B at a target AIR")
    gain.add_argument("-a", "--first", required=True, metavar="SWEEP_A")
    gain.add_argument("-b", "--second", required=True, metavar="SWEEP_B")
    gain.add_argument("--target-air", type=float, required=True)
    gain.set_defaults(func=_cmd_gain)

    gauss = sub.add_parser("gaussianity", help="pooled-coordinate shape statistics")
    gauss.add_argument("-c", "--constellation", required=True, metavar="FILE")
    gauss.add_argument("--bins", type=int, default=61)
    gauss.add_argument("-o", "--output", default=None, metavar="CSV",
                       help="write the histogram")
    gauss.set_defaults(func=_cmd_gaussianity)

    quad = sub.add_parser("quadcheck", help="node budgets and the GH/RQ cost ratio")
    quad.add_argument("-N", "--dims", type=int, required=True)
    quad.add_argument("-n", "--order", type=int, default=10, help="GH order per axis")
    quad.set_defaults(func=_cmd_quadcheck)

    return parser


def _load_labeled(path):
    from .model import load_constellation

    try:
        return load_constellation(path)
    except FileNotFoundError:
        raise CliError(f"{path}: no such file")
    except ValueError as exc:
        raise CliError(f"{path}: {exc}")


def _cmd_generate(args) -> int:
    from .generators import (
        apsk_two_ring,
        brgc,
        cartesian_bpsk,
        cartesian_product,
        qam,
        random_constellation,
        sp_bpsk_12d,
    )
    from .model import BitLabeling, save_constellation
    import math

    labeling = None
    if args.kind in ("qpsk", "bpsk"):
        constellation, labeling = cartesian_bpsk(args.dims)
        name = f"bpsk{args.dims}d"
    elif args.kind == "qam":
        constellation, labeling = qam(args.size)
        name = f"qam{args.size}"
    elif args.kind == "apsk2":
        constellation, labeling = apsk_two_ring(
            (args.inner, args.outer), args.ratio, args.phase
        )
        name = f"apsk{args.inner}+{args.outer}"
    elif args.kind == "random":
        constellation = random_constellation(args.size, args.dims, args.seed)
        m_bits = round(math.log2(args.size))
        if 2**m_bits == args.size:
            labeling = BitLabeling(brgc(m_bits))
        name = f"random{args.size}"
    elif args.kind == "sp12d":
        constellation, labeling = sp_bpsk_12d()
        name = "sp-bpsk-12d"
    else:  # product
        if not args.first or not args.second:
            raise CliError("product needs -a and -b factor files")
        c_a, lab_a, name_a = _load_labeled(args.first)
        c_b, lab_b, name_b = _load_labeled(args.second)
        if lab_a is None or lab_b is None:
            raise CliError("product factors must carry bit labels")
        constellation, labeling = cartesian_product((c_a, lab_a), (c_b, lab_b))
        name = f"{name_a}x{name_b}"

    save_constellation(args.output, constellation, labeling,
                       args.name if args.name is not None else name)
    print(f"wrote {args.output}: M={constellation.size} N={constellation.dims} "
          f"m={labeling.bits_per_symbol if labeling else 0}")
    return 0


def _cmd_evaluate(args) -> int:
    from .air import parse_estimator
    from .config import parse_snr_values
    from .evaluation import snr_sweep, write_sweep_csv

    constellation, labeling, _name = _load_labeled(args.constellation)
    try:
        spec = parse_estimator(args.estimator)
        single, grid = parse_snr_values(args.snr)
    except ValueError as exc:
        raise CliError(str(exc))
    if single is not None:
        values = [single]
    else:
        lo, hi, step = grid
        values = []
        v = lo
        while v <= hi + step * 0.5:
            values.append(round(v, 12))
            v += step
    metric = args.metric.upper()
    if metric == "GMI" and labeling is None:
        raise CliError("GMI needs a labeled constellation (file has m=0)")
    sweep = snr_sweep(constellation, labeling, metric, values, spec, seed=args.seed)
    if args.output:
        write_sweep_csv(sweep, args.output, include_capacity=args.capacity)
        print(f"wrote {args.output}: {len(sweep.rows)} rows")
    else:
        for row in sweep.rows:
            err = "" if row.std_error is None else f" std_error={row.std_error:.6g}"
            print(
                f"snr_db={row.snr_db:g} value={row.value:.6f} "
                f"value_per_2d={row.value_per_2d:.6f} ngmi={row.ngmi:.6f}"
                f"{err} method={row.method}"
            )
    return 0


def _cmd_optimize(args) -> int:
    from .config import build_constellation, load_run_config, materialize_run_config
    from .evaluation import write_trace_csv
    from .model import save_constellation
    from .optimizer import optimize
    import dataclasses

    try:
        cfg = load_run_config(args.config)
    except FileNotFoundError:
        raise CliError(f"{args.config}: no such file")
    except ValueError as exc:
        raise CliError(str(exc))
    if args.outdir is not None:
        cfg = dataclasses.replace(cfg, output_directory=args.outdir)
    try:
        opt_config = cfg.optimizer_config()
    except ValueError as exc:
        raise CliError(str(exc))
    constellation, labeling, name = build_constellation(cfg)
    if opt_config.metric == "GMI" and labeling is None:
        raise CliError("GMI optimisation needs a labeled constellation")

    run = optimize(opt_config, constellation, labeling)

    os.makedirs(cfg.output_directory, exist_ok=True)
    base = os.path.join(cfg.output_directory, cfg.output_name)
    if "gs" in cfg.output_formats:
        save_constellation(f"{base}.gs", run.final, labeling, f"{name}-optimized")
        print(f"wrote {base}.gs")
    if "csv" in cfg.output_formats:
        write_trace_csv(run.trace, f"{base}_trace.csv")
        print(f"wrote {base}_trace.csv")
    with open(os.path.join(cfg.output_directory, "config.ini"), "w",
              encoding="utf-8") as fh:
        fh.write(materialize_run_config(cfg))
    print(f"wrote {os.path.join(cfg.output_directory, 'config.ini')}")
    print(
        f"initial {run.config.metric} {run.initial_reference.value:.6f} -> "
        f"best {run.best_reference.value:.6f} at iteration {run.best_iteration}"
        + (" [collapsed]" if run.collapsed else "")
    )
    return 0


def _cmd_gain(args) -> int:
    from .evaluation import gain_db, read_sweep_csv

    try:
        sweep_a = read_sweep_csv(args.first)
        sweep_b = read_sweep_csv(args.second)
    except FileNotFoundError as exc:
        raise CliError(str(exc))
    except ValueError as exc:
        raise CliError(str(exc))
    value = gain_db(sweep_a, sweep_b, args.target_air)
    print(f"gain_db={value:.6f}")
    return 0


def _cmd_gaussianity(args) -> int:
    from .evaluation import coordinate_gaussianity, write_gaussianity_csv

    constellation, _labeling, _name = _load_labeled(args.constellation)
    try:
        report = coordinate_gaussianity(constellation, args.bins)
    except ValueError as exc:
        raise CliError(str(exc))
    print(f"ks_distance={report.ks_distance:.6f} "
          f"excess_kurtosis={report.excess_kurtosis:.6f}")
    if args.output:
        write_gaussianity_csv(report, args.output)
        print(f"wrote {args.output}")
    return 0


def _cmd_quadcheck(args) -> int:
    from .quadrature import default_quadrature_count

    if args.dims < 1:
        raise CliError(f"dims must be >= 1, got {args.dims}")
    if args.order < 1:
        raise CliError(f"order must be >= 1, got {args.order}")
    rq_count = default_quadrature_count(args.dims)
    gh_count = args.order**args.dims
    ratio = gh_count / rq_count
    print(f"N = {args.dims}")
    print(f"RQ node budget L = {rq_count}")
    print(f"GH tensor nodes n^N (n={args.order}) = {gh_count}")
    print(f"ratio R = {ratio:.6e}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2

    if args.threads < 0:
        print("error: --threads must be >= 0", file=sys.stderr)
        return 2
    if args.threads > 0:
        for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)

    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except BrokenPipeError:
        return 1
    except Exception as exc:  # runtime failures: diagnostic, not a traceback
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
