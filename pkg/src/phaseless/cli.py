"""Command-line front end.

Exit status: 0 on success, 1 on usage or input errors, 2 on numerical
failures (singular ``R(x)``, solver breakdown), which are also reported as
a JSON object on stderr.
"""

import argparse
import json
import sys

import numpy as np

from . import bench, crlb, frame as fr, solver

DEFAULTS = solver.SolverConfig()


class UsageError(Exception):
    pass


class NumericalError(Exception):
    def __init__(self, kind, message, **extra):
        super().__init__(message)
        self.payload = {"error": kind, "message": message, **extra}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def parse_snr_range(text: str) -> tuple:
    """``"start:step:end"`` with both ends included, or a comma list."""
    try:
        if ":" in text:
            start, step, end = (float(t) for t in text.split(":"))
            if step <= 0 or end < start:
                raise ValueError
            k = int(np.floor((end - start) / step + 1e-9))
            return tuple(start + i * step for i in range(k + 1))
        return tuple(float(t) for t in text.split(","))
    except ValueError:
        raise UsageError(f"--snr-db: cannot parse {text!r}, expected start:step:end") from None


def parse_mu_policy(text: str) -> dict:
    if text == "max1":
        return {"mu_policy": "max_one_lambda"}
    if text == "lambda":
        return {"mu_policy": "equal_lambda"}
    if text.startswith("const:"):
        try:
            return {"mu_policy": "constant", "mu_constant": float(text[6:])}
        except ValueError:
            pass
    raise UsageError(f"--mu-policy: expected max1, lambda or const:C, got {text!r}")


def _solver_config(args) -> solver.SolverConfig:
    try:
        return solver.SolverConfig(alpha=args.alpha, lambda_decay=args.decay, eps=args.eps,
                                   t_max=args.tmax, min_steps=args.min_steps,
                                   **parse_mu_policy(args.mu_policy))
    except ValueError as e:
        raise UsageError(f"solver flags: {e}") from None


def _load(reader, path, flag):
    try:
        return reader(path)
    except OSError as e:
        raise UsageError(f"{flag}: cannot read {path}: {e.strerror}") from None
    except (ValueError, TypeError) as e:
        raise UsageError(f"{flag}: {path}: {e}") from None


def _emit(args, payload):
    text = json.dumps(payload, indent=1) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_gen_frame(args):
    F, x = bench.gen_instance(args.n, args.m, args.seed)
    _emit(args, F.to_dict())
    if args.signal_out:
        with open(args.signal_out, "w") as fh:
            json.dump(fr.signal_to_dict(x), fh, indent=1)
            fh.write("\n")


def cmd_analyze(args):
    F = _load(fr.read_frame, args.frame, "--frame")
    x = _load(fr.read_signal, args.signal, "--signal")
    try:
        y = fr.analyze(F, x)
    except fr.DimensionError as e:
        raise UsageError(f"--signal: {e}") from None
    _emit(args, fr.intensities_to_dict(y))


def cmd_check(args):
    F = _load(fr.read_frame, args.frame, "--frame")
    try:
        part = fr.partition_injectivity_check(F)
        part_txt = f"{str(part.injective).lower()} (partition)"
        part_json = {"injective": part.injective,
                     "witness": list(part.witness) if part.witness is not None else None}
    except fr.EnumerationTooLarge:
        part_txt, part_json = "unknown (too many vectors to enumerate)", None
    try:
        spark, bad = fr.full_spark_check(F)
        spark_txt = str(spark).lower()
    except fr.EnumerationTooLarge:
        spark, bad, spark_txt = None, None, "unknown"
    a0 = fr.a0_estimate(F, args.a0_samples, args.seed)
    if args.format == "json":
        _emit(args, {"partition": part_json, "full_spark": spark,
                     "full_spark_witness": list(bad) if bad else None, "a0": a0})
    else:
        line = f"injective: {part_txt}, full-spark: {spark_txt}, a0≈{a0:.4g}\n"
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(line)
        else:
            sys.stdout.write(line)


def cmd_solve(args):
    F = _load(fr.read_frame, args.frame, "--frame")
    y = _load(fr.read_intensities, args.measurements, "--measurements")
    if y.shape != (F.m,):
        raise UsageError(f"--measurements: 'values' has {y.size} entries, frame has m={F.m}")
    cfg = _solver_config(args)
    try:
        res = solver.reconstruct(F, y, cfg, args.algorithm)
    except solver.SolverError as e:
        raise NumericalError("solver", str(e)) from None
    if args.trace:
        res.write_trace_csv(args.trace)
    _emit(args, {
        "coords": res.estimate.tolist(),
        "residual": res.residual,
        "iterations": res.iterations,
        "stop_reason": res.stop_reason,
        "objective": float(res.objective_trace[-1]) if res.objective_trace.size else None,
        "algorithm": args.algorithm,
        "config": cfg.to_dict(),
    })
    e1 = solver.principal_eigenpair(fr.quadratic_Q(F, y))[0]
    if e1 <= 0:
        # the zero estimate was written, but flag that no signal is recoverable
        raise NumericalError("nonpositive_e1", f"top eigenvalue of Q is {e1:.6g}; "
                             "the least-squares optimum is x = 0", e1=e1)


def cmd_crlb(args):
    F = _load(fr.read_frame, args.frame, "--frame")
    x = _load(fr.read_signal, args.signal, "--signal")
    if x.shape != (F.n,):
        raise UsageError(f"--signal: 'coords' has {x.size} entries, frame has n={F.n}")
    if not (np.isfinite(args.sigma) and args.sigma > 0):
        raise UsageError("--sigma: must be positive")
    try:
        rep = crlb.bounds_report(F, x, args.sigma)
    except crlb.UnidentifiableError as e:
        raise NumericalError("unidentifiable", str(e), null_vector=e.null_vector.tolist()) from None
    out = {"sigma": rep.sigma, "fisher": rep.fisher.tolist(), "crlb_trace": rep.crlb_trace,
           "similarity": rep.similarity}
    if args.lifted:
        out["lifted_bound"] = rep.lifted_bound
    if args.mle:
        out.update(mle_mse_bound=rep.mle_mse_bound, delta=rep.delta.tolist(),
                   delta_matrix=rep.delta_matrix.tolist(), mle_mean=rep.mle_mean.tolist())
    _emit(args, out)


def cmd_bench(args):
    sign = {"fixed": "fixed_first_positive", "oracle": "oracle"}[args.sign]
    try:
        cfg = bench.SweepConfig(n=args.n, redundancy=args.redundancy,
                                snr_grid_db=parse_snr_range(args.snr_db), trials=args.trials,
                                algorithm=args.algorithm, sign_convention=sign,
                                master_seed=args.seed, solver=_solver_config(args),
                                instance_per_point=args.instance_per_point)
    except ValueError as e:
        raise UsageError(f"bench: {e}") from None
    res = bench.run_sweep(cfg, jobs=args.jobs)
    fmt = args.format or "csv"
    if args.out:
        bench.emit_results(res.rows, args.out, fmt, args.plots)
    else:
        if fmt == "csv":
            sys.stdout.write(bench.rows_to_csv(res.rows))
        else:
            json.dump([r.__dict__ for r in res.rows], sys.stdout, indent=1)
            sys.stdout.write("\n")
        if args.plots:
            bench.write_plots(res.rows, args.plots)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (default: %(default)s)")
    common.add_argument("--out", default=None, help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default=None,
                        help="output / diagnostics format (default: text for check, csv for bench)")

    solv = _Parser(add_help=False)
    solv.add_argument("--algorithm", type=int, choices=(1, 2), default=2,
                      help="1: last iterate, 2: best-residual iterate (default: %(default)s)")
    solv.add_argument("--alpha", type=float, default=DEFAULTS.alpha,
                      help="initial lambda = alpha * top eigenvalue of Q (default: %(default)s)")
    solv.add_argument("--decay", type=float, default=DEFAULTS.lambda_decay,
                      help="lambda is divided by this every step (default: %(default)s)")
    solv.add_argument("--eps", type=float, default=DEFAULTS.eps,
                      help="stall / lambda-floor tolerance (default: %(default)s)")
    solv.add_argument("--tmax", type=int, default=DEFAULTS.t_max,
                      help="iteration cap (default: %(default)s)")
    solv.add_argument("--min-steps", type=int, default=DEFAULTS.min_steps,
                      help="iterations before stopping tests apply (default: %(default)s)")
    solv.add_argument("--mu-policy", default="max1",
                      help="max1 (mu=max(1,lambda)), lambda (mu=lambda) or const:C (default: %(default)s)")

    p = _Parser(prog="phaseless", description="Sign retrieval from squared frame coefficients.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-frame", parents=[common], help="random Gaussian frame (and signal)")
    g.add_argument("--n", type=int, required=True, help="dimension")
    g.add_argument("--m", type=int, required=True, help="number of frame vectors")
    g.add_argument("--signal-out", default=None, help="also write a random signal here (default: none)")
    g.set_defaults(func=cmd_gen_frame)

    a = sub.add_parser("analyze", parents=[common], help="squared frame coefficients of a signal")
    a.add_argument("--frame", required=True, help="frame JSON")
    a.add_argument("--signal", required=True, help="signal JSON")
    a.set_defaults(func=cmd_analyze)

    c = sub.add_parser("check", parents=[common], help="injectivity diagnostics")
    c.add_argument("--frame", required=True, help="frame JSON")
    c.add_argument("--a0-samples", type=int, default=2000,
                   help="sphere samples for the a0 estimate (default: %(default)s)")
    c.set_defaults(func=cmd_check)

    s = sub.add_parser("solve", parents=[common, solv], help="reconstruct a signal")
    s.add_argument("--frame", required=True, help="frame JSON")
    s.add_argument("--measurements", required=True, help='intensities JSON {"values": [...]}')
    s.add_argument("--trace", default=None, help="write per-step t,lambda,mu,j,L CSV here (default: none)")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("crlb", parents=[common], help="lower bounds at a signal")
    b.add_argument("--frame", required=True, help="frame JSON")
    b.add_argument("--signal", required=True, help="signal JSON")
    b.add_argument("--sigma", type=float, required=True, help="noise standard deviation")
    b.add_argument("--lifted", action="store_true", help="include the rank-one lifted bound")
    b.add_argument("--mle", action="store_true", help="include the bias-corrected MLE bound")
    b.set_defaults(func=cmd_crlb)

    w = sub.add_parser("bench", parents=[common, solv], help="Monte Carlo SNR sweep")
    w.add_argument("--n", type=int, default=10, help="dimension (default: %(default)s)")
    w.add_argument("--redundancy", type=float, default=3, help="m / n (default: %(default)s)")
    w.add_argument("--snr-db", default="-20:10:80",
                   help="start:step:end, ends included (default: %(default)s)")
    w.add_argument("--trials", type=int, default=None,
                   help="noise realisations per point (default: 100 for algorithm 1, 1000 for 2)")
    w.add_argument("--sign", choices=("fixed", "oracle"), default="fixed",
                   help="sign alignment before scoring (default: %(default)s)")
    w.add_argument("--plots", default=None, help="directory for SVG plots (default: none)")
    w.add_argument("--jobs", type=int, default=1, help="worker processes (default: %(default)s)")
    w.add_argument("--instance-per-point", action="store_true",
                   help="draw a fresh frame and signal for every SNR value")
    w.set_defaults(func=cmd_bench)
    return p


def _fix_negative_values(argv):
    # let "--snr-db -20:10:80" through; argparse would read it as a flag
    out, it = [], iter(argv)
    for tok in it:
        if tok == "--snr-db":
            nxt = next(it, None)
            out.append(tok if nxt is None else f"--snr-db={nxt}")
        else:
            out.append(tok)
    return out


def _unknown_flags(parser, argv):
    # argparse reports missing required flags first; name stray ones instead
    subs = parser._subparsers._group_actions[0].choices
    if not argv or argv[0] not in subs:
        return
    known = subs[argv[0]]._option_string_actions
    bad = [t.split("=", 1)[0] for t in argv[1:] if t.startswith("--") and t.split("=", 1)[0] not in known]
    if bad:
        raise UsageError(f"phaseless {argv[0]}: unrecognized arguments: {' '.join(bad)}")


def _sniff_format(argv):
    # diagnostics format must be known even when parsing fails
    for i, tok in enumerate(argv):
        if tok == "--format=json" or (tok == "--format" and argv[i + 1:i + 2] == ["json"]):
            return "json"
    return None


def _report(args_format, payload):
    if args_format == "json":
        sys.stderr.write(json.dumps(payload) + "\n")
    else:
        sys.stderr.write(payload["message"] + "\n")


def dispatch(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    fmt = _sniff_format(argv)
    parser = build_parser()
    try:
        argv = _fix_negative_values(argv)
        _unknown_flags(parser, argv)
        args = parser.parse_args(argv)
        args.func(args)
    except SystemExit as e:       # --help
        return int(e.code or 0)
    except UsageError as e:
        _report(fmt, {"error": "usage", "message": str(e)})
        return 1
    except NumericalError as e:
        sys.stderr.write(json.dumps(e.payload) + "\n")
        return 2
    except OSError as e:
        _report(fmt, {"error": "io", "message": f"{e.filename}: {e.strerror}"})
        return 1
    return 0


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
