"""Command-line interface.

Subcommands: ``generate`` (synthetic scenes), ``unmix`` (run the
factorization), ``evaluate`` (score estimates against ground truth),
``interpolate`` (held-out divergence selection sweep) and ``experiment``
(batch sweep from a spec file).  Report paths write delimited output
plus rendered figures; ``--no-plots`` skips the figures.

Exit codes: 0 success, 2 input/parse problem, 3 numerical/domain
failure, 4 configuration problem.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import (
    ConfigurationError,
    DimensionMismatch,
    DomainError,
    NumericalFailure,
    ParseError,
)
from .masked import interpolation_sweep
from .matrixio import read_matrix, write_matrix
from .metrics import (
    align_endmembers,
    asam,
    gmse_sq,
    otsu_threshold,
    outlier_detection_scores,
)
from .model import check_abundances, energy_vector, l21_norm
from .solver import InitSpec, SolverConfig, solve
from .synth import MODELS, SceneSpec, generate, load_endmember_library
from . import experiment as exp

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3
EXIT_CONFIG = 4

DEFAULT_BETA_GRID = [-1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0]


def _float_list(raw):
    try:
        return [float(tok) for tok in raw.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigurationError("cannot parse number list %r" % raw) from exc


def build_parser():
    parser = argparse.ArgumentParser(
        prog="grnmf",
        description="Group-robust NMF for nonlinear hyperspectral unmixing.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a synthetic scene")
    p.add_argument("--model", choices=MODELS, required=True)
    p.add_argument("--L", type=int, required=True, help="number of bands")
    p.add_argument("--K", type=int, required=True, help="number of endmembers")
    p.add_argument("--P", type=int, default=0, help="number of pixels")
    p.add_argument("--width", type=int, default=0)
    p.add_argument("--height", type=int, default=0)
    p.add_argument("--snr-db", type=float, default=30.0)
    p.add_argument("--pure-pixels", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--nonlinear-fraction", type=float, default=0.25)
    p.add_argument("--endmembers", required=True, help="spectra file (K or more columns)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--format", choices=("binary", "csv"), default="binary")
    p.add_argument("--no-plots", action="store_true")

    p = sub.add_parser("unmix", help="factorize a data matrix")
    p.add_argument("input", help="data matrix file")
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--beta", type=float, default=2.0)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--lambda", dest="lam", type=float, default=None)
    g.add_argument("--lambda-auto", action="store_true", default=False)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--policy", choices=("table-one", "over-relaxed"), default="table-one")
    p.add_argument("--penalty-norm", choices=("l2", "l1"), default="l2")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init", choices=("random", "dirichlet", "from-truth"), default="random")
    p.add_argument("--truth", help="truth directory for --init from-truth")
    p.add_argument("--init-r", choices=("zero", "eps"), default="zero",
                   help="outlier start for --init from-truth")
    p.add_argument("--r-reseed", action="store_true")
    p.add_argument("--width", type=int, default=0, help="scene width, for the energy map")
    p.add_argument("--height", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--format", choices=("binary", "csv"), default="binary")
    p.add_argument("--no-plots", action="store_true")

    p = sub.add_parser("evaluate", help="score estimates against ground truth")
    p.add_argument("--truth", required=True, help="truth directory from generate")
    p.add_argument("--estimates", required=True, help="output directory from unmix")
    p.add_argument("--out", default=None, help="metrics CSV (default: estimates dir)")
    p.add_argument("--threshold", type=float, default=None,
                   help="outlier energy threshold (default: histogram split)")
    p.add_argument("--no-plots", action="store_true")

    p = sub.add_parser("interpolate", help="held-out divergence selection sweep")
    p.add_argument("input", help="data matrix file")
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--observe-fraction", type=float, action="append", default=None,
                   help="repeatable; defaults to 0.25 0.5 0.75")
    p.add_argument("--beta-grid", type=str, default=None,
                   help="comma list; defaults to -1..3 step 0.5")
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--max-iter", type=int, default=300)
    p.add_argument("--simplex", action="store_true")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--no-plots", action="store_true")

    p = sub.add_parser("experiment", help="run a batch sweep from a spec file")
    p.add_argument("spec", help="experiment spec file")
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--no-plots", action="store_true")

    return parser


def _write_json(path, payload):
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for v in row:
            cells.append(repr(float(v)) if isinstance(v, float) else str(v))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def cmd_generate(args):
    if args.nonlinear_fraction < 0 or args.nonlinear_fraction > 1:
        raise ConfigurationError("--nonlinear-fraction must lie in [0, 1]")
    M_lib = load_endmember_library(args.endmembers)
    if M_lib.shape[1] < args.K:
        raise DimensionMismatch(
            "endmember file has %d columns, need %d" % (M_lib.shape[1], args.K)
        )
    if M_lib.shape[0] != args.L:
        raise DimensionMismatch(
            "endmember file has %d bands, need %d" % (M_lib.shape[0], args.L)
        )
    spec = SceneSpec(
        model=args.model, L=args.L, K=args.K, P=args.P,
        width=args.width, height=args.height, snr_db=args.snr_db,
        pure_pixels=args.pure_pixels, nonlinear_fraction=args.nonlinear_fraction,
        seed=args.seed,
    )
    Y, truth = generate(spec, M_lib[:, : args.K])

    out = Path(args.out_dir)
    truth_dir = out / "truth"
    truth_dir.mkdir(parents=True, exist_ok=True)
    ext = ".grnmf" if args.format == "binary" else ".csv"
    write_matrix(out / ("Y" + ext), Y, args.format)
    write_matrix(truth_dir / ("M_true" + ext), truth.M_true, args.format)
    write_matrix(truth_dir / ("A_true" + ext), truth.A_true, args.format)
    write_matrix(
        truth_dir / ("nonlinear_mask" + ext),
        truth.nonlinear_mask.astype(float)[None, :],
        args.format,
    )
    if truth.B_true is not None and truth.B_true.size:
        write_matrix(truth_dir / ("B_true" + ext), truth.B_true, args.format)
    if truth.Gamma_true is not None and truth.Gamma_true.size:
        write_matrix(truth_dir / ("Gamma_true" + ext), truth.Gamma_true, args.format)
    _write_json(out / "manifest.json", {
        "model": spec.model, "L": spec.L, "K": spec.K, "P": spec.P,
        "width": spec.width, "height": spec.height,
        "snr_db": spec.snr_db, "pure_pixels": spec.pure_pixels,
        "nonlinear_fraction": spec.nonlinear_fraction, "seed": spec.seed,
        "nonlinear_pixels": int(truth.nonlinear_mask.sum()),
        "noise_sigma": truth.noise_sigma,
        "empirical_snr_db": truth.empirical_snr_db,
        "clamped_fraction": truth.clamped_fraction,
        "format": args.format,
    })
    if not args.no_plots:
        from . import figures
        figures.save_endmember_spectra(truth.M_true, out / "endmembers.png")
    print("wrote scene %s (%dx%d, %d nonlinear pixels) to %s"
          % (spec.model, spec.L, spec.P, int(truth.nonlinear_mask.sum()), out))
    return EXIT_OK


def _truth_init(truth_dir, Y, K, init_r):
    truth_dir = Path(truth_dir)
    m_path = _find_matrix(truth_dir, "M_true")
    a_path = _find_matrix(truth_dir, "A_true")
    M0 = read_matrix(m_path)
    A0 = read_matrix(a_path)
    sums = A0.sum(axis=0)
    A0 = np.where(sums > 0, A0 / np.where(sums > 0, sums, 1.0), 1.0 / A0.shape[0])
    R0 = None
    if init_r == "eps":
        R0 = np.full(Y.shape, 1e-2 * float(Y.mean()))
    return InitSpec(kind="from-matrices", M0=M0, A0=check_abundances(A0), R0=R0)


def _find_matrix(directory, stem):
    for ext in (".grnmf", ".csv"):
        cand = Path(directory) / (stem + ext)
        if cand.is_file():
            return cand
    raise ParseError("no %s matrix found in %s" % (stem, directory))


def cmd_unmix(args):
    Y = read_matrix(args.input)
    lam = args.lam
    lambda_auto = lam is None
    if args.init == "from-truth":
        if not args.truth:
            raise ConfigurationError("--init from-truth requires --truth DIR")
        init = _truth_init(args.truth, Y, args.K, args.init_r)
        if init.R0 is None:
            init.R0 = np.zeros(Y.shape)
    elif args.init == "dirichlet":
        init = InitSpec(kind="dirichlet")
    else:
        init = InitSpec(kind="random-uniform")
    config = SolverConfig(
        beta=args.beta, lam=lam, tol=args.tol, max_iter=args.max_iter,
        policy=args.policy, seed=args.seed, init=init,
        r_reseed=args.r_reseed, penalty_norm=args.penalty_norm,
    )
    report = solve(Y, args.K, config)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ext = ".grnmf" if args.format == "binary" else ".csv"
    state = report.state
    energy = energy_vector(state.R)
    write_matrix(out / ("M" + ext), state.M, args.format)
    write_matrix(out / ("A" + ext), state.A, args.format)
    write_matrix(out / ("R" + ext), state.R, args.format)
    write_matrix(out / ("energy" + ext), energy[None, :], args.format)
    payload = report.to_dict()
    payload.update({
        "lambda_auto": lambda_auto,
        "config": {
            "K": args.K, "beta": args.beta, "tol": args.tol,
            "max_iter": args.max_iter, "policy": args.policy,
            "penalty_norm": args.penalty_norm, "seed": args.seed,
            "init": args.init,
        },
    })
    _write_json(out / "report.json", payload)
    _write_csv(out / "trace.csv", ("iteration", "objective"),
               list(enumerate(float(v) for v in report.objective_trace)))
    if not args.no_plots:
        from . import figures
        figures.save_objective_trace(report.objective_trace, out / "trace.png")
        figures.save_energy_map(energy, out / "energy.png",
                                width=args.width or None, height=args.height or None)
    print("stop=%s iterations=%d lambda=%.6g objective=%.6g"
          % (report.stop_reason, report.iterations, report.lam,
             report.objective_trace[-1]))
    return EXIT_OK


EVALUATE_COLUMNS = ("asam", "gmse_sq", "outlier_precision", "outlier_recall",
                    "outlier_f1", "outlier_l21")


def cmd_evaluate(args):
    truth_dir = Path(args.truth)
    est_dir = Path(args.estimates)
    M_true = read_matrix(_find_matrix(truth_dir, "M_true"))
    A_true = read_matrix(_find_matrix(truth_dir, "A_true"))
    mask = read_matrix(_find_matrix(truth_dir, "nonlinear_mask")).ravel() > 0.5
    M_est = read_matrix(_find_matrix(est_dir, "M"))
    A_est = read_matrix(_find_matrix(est_dir, "A"))
    R_est = read_matrix(_find_matrix(est_dir, "R"))

    M_al, A_al = align_endmembers(M_true, M_est, A_est)
    energy = energy_vector(R_est)
    thr = args.threshold if args.threshold is not None else otsu_threshold(energy)
    det = outlier_detection_scores(energy, mask, thr)
    row = {
        "asam": asam(M_true, M_al),
        "gmse_sq": gmse_sq(A_true, A_al),
        "outlier_precision": det["precision"],
        "outlier_recall": det["recall"],
        "outlier_f1": det["f1"],
        "outlier_l21": l21_norm(R_est),
    }
    out_path = Path(args.out) if args.out else est_dir / "metrics.csv"
    _write_csv(out_path, EVALUATE_COLUMNS, [[row[c] for c in EVALUATE_COLUMNS]])
    if not args.no_plots:
        from . import figures
        figures.save_detection_overview(energy, out_path.with_suffix(".png"),
                                        mask_true=mask, threshold=thr)
    print(",".join("%s=%.6g" % (c, row[c]) for c in EVALUATE_COLUMNS))
    return EXIT_OK


def cmd_interpolate(args):
    Y = read_matrix(args.input)
    fractions = args.observe_fraction or [0.25, 0.5, 0.75]
    for frac in fractions:
        if not 0.0 < frac < 1.0:
            raise ConfigurationError(
                "--observe-fraction %r leaves no held-out entries to score" % frac
            )
    betas = _float_list(args.beta_grid) if args.beta_grid else list(DEFAULT_BETA_GRID)
    if not betas:
        raise ConfigurationError("--beta-grid is empty")
    if args.restarts < 1:
        raise ConfigurationError("--restarts must be at least 1")
    rows = interpolation_sweep(
        Y, args.K, betas, fractions, args.restarts, seed=args.seed,
        tol=args.tol, max_iter=args.max_iter, simplex=args.simplex,
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(
        out / "sweep.csv",
        ("beta", "restart", "fraction_observed", "heldout_asam"),
        [[r["beta"], r["restart"], r["fraction_observed"], r["heldout_asam"]]
         for r in rows],
    )
    _write_json(out / "report.json", {
        "K": args.K, "betas": betas, "fractions": fractions,
        "restarts": args.restarts, "seed": args.seed,
        "rows": len(rows),
        "max_relative_increase": max(r["max_relative_increase"] for r in rows),
    })
    if not args.no_plots:
        from . import figures
        figures.save_interpolation_curves(rows, out / "sweep.png")
    best = {}
    for r in rows:
        best.setdefault(r["beta"], []).append(r["heldout_asam"])
    means = {b: float(np.mean(v)) for b, v in best.items()}
    b_star = min(means, key=means.get)
    print("best beta=%g (mean heldout angle %.6g rad over %d restarts)"
          % (b_star, means[b_star], args.restarts))
    return EXIT_OK


def cmd_experiment(args):
    spec = exp.parse_experiment_spec(args.spec)
    rows = exp.run_experiment(spec, jobs=args.jobs)
    if not args.no_plots:
        from . import figures
        figures.save_experiment_summary(rows, spec.output / "summary.png")
    print("wrote %d aggregate rows to %s" % (len(rows), spec.output / "aggregate.csv"))
    return EXIT_OK


_DISPATCH = {
    "generate": cmd_generate,
    "unmix": cmd_unmix,
    "evaluate": cmd_evaluate,
    "interpolate": cmd_interpolate,
    "experiment": cmd_experiment,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _DISPATCH[args.command](args)
    except (ParseError, DimensionMismatch, FileNotFoundError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return EXIT_INPUT
    except NumericalFailure as exc:
        where = " (iteration %s)" % exc.iteration if exc.iteration is not None else ""
        print("numerical failure: %s%s" % (exc, where), file=sys.stderr)
        return EXIT_NUMERICAL
    except DomainError as exc:
        print("domain error: %s" % exc, file=sys.stderr)
        return EXIT_NUMERICAL
    except ConfigurationError as exc:
        print("configuration error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
