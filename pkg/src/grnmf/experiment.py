"""Batch experiment runner: a cartesian sweep of scenes and solver settings.

The sweep is described by an INI-style text file.  Every (cell, restart)
unit generates its own scene, runs the solver, scores the result against
the ground truth and writes a JSON manifest into its own directory, so
units can run in a worker pool without sharing any output path.  A
failing unit is recorded in its manifest and in the aggregate table
instead of aborting the sweep.
"""

import configparser
import itertools
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .metrics import (
    align_endmembers,
    asam,
    gmse_sq,
    otsu_threshold,
    outlier_detection_scores,
)
from .model import energy_vector
from .solver import InitSpec, SolverConfig, solve
from .synth import MODELS, SceneSpec, generate, load_endmember_library


@dataclass
class ExperimentSpec:
    """Parsed sweep description."""

    endmembers: Path
    L: int
    width: int
    height: int
    snr_db: float = 30.0
    nonlinear_fraction: float = 0.25
    models: list = field(default_factory=lambda: ["lmm"])
    Ks: list = field(default_factory=lambda: [3])
    pure: list = field(default_factory=lambda: [True])
    betas: list = field(default_factory=lambda: [2.0])
    lambdas: list = field(default_factory=lambda: ["auto"])
    tol: float = 1e-5
    max_iter: int = 300
    policy: str = "table-one"
    restarts: int = 1
    seed: int = 0
    jobs: int = 0
    output: Path = Path("results")

    def cells(self):
        return list(itertools.product(self.models, self.Ks, self.pure,
                                      self.betas, self.lambdas))


def _split(raw):
    return [tok.strip() for tok in raw.split(",") if tok.strip()]


def _parse_bool(tok):
    t = tok.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ConfigurationError("cannot parse boolean value %r" % tok)


def parse_experiment_spec(path):
    """Load and validate an experiment file; all axes must be nonempty
    and every referenced file must already exist."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError("experiment spec %s does not exist" % path)
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigurationError("cannot parse experiment spec: %s" % exc) from exc

    if "scene" not in cp:
        raise ConfigurationError("experiment spec needs a [scene] section")
    scene = cp["scene"]
    base = path.parent

    endmembers = scene.get("endmembers", "")
    if not endmembers:
        raise ConfigurationError("[scene] endmembers is required")
    endmembers = (base / endmembers).resolve()
    if not endmembers.is_file():
        raise ConfigurationError("endmember file %s does not exist" % endmembers)

    try:
        spec = ExperimentSpec(
            endmembers=endmembers,
            L=scene.getint("L"),
            width=scene.getint("width"),
            height=scene.getint("height"),
            snr_db=scene.getfloat("snr_db", fallback=30.0),
            nonlinear_fraction=scene.getfloat("nonlinear_fraction", fallback=0.25),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigurationError("bad [scene] section: %s" % exc) from exc
    if spec.L is None or spec.width is None or spec.height is None:
        raise ConfigurationError("[scene] needs L, width and height")

    if "solver" in cp:
        sv = cp["solver"]
        spec.tol = sv.getfloat("tol", fallback=spec.tol)
        spec.max_iter = sv.getint("max_iter", fallback=spec.max_iter)
        spec.policy = sv.get("policy", fallback=spec.policy)
        if sv.get("beta", ""):
            spec.betas = [float(sv.get("beta"))]
        lam_raw = sv.get("lambda", fallback="auto")
        spec.lambdas = [lam_raw.strip()]

    if "sweep" in cp:
        sw = cp["sweep"]
        for key in sw:
            toks = _split(sw.get(key))
            if not toks:
                raise ConfigurationError("sweep axis %r is empty" % key)
            if key == "model":
                bad = [t for t in toks if t not in MODELS]
                if bad:
                    raise ConfigurationError("unknown model(s) %r" % bad)
                spec.models = toks
            elif key.lower() == "k":
                spec.Ks = [int(t) for t in toks]
            elif key == "pure_pixels":
                spec.pure = [_parse_bool(t) for t in toks]
            elif key == "beta":
                spec.betas = [float(t) for t in toks]
            elif key == "lambda":
                spec.lambdas = toks
            else:
                raise ConfigurationError("unknown sweep axis %r" % key)

    if "run" in cp:
        run = cp["run"]
        spec.restarts = run.getint("restarts", fallback=1)
        spec.seed = run.getint("seed", fallback=0)
        spec.jobs = run.getint("jobs", fallback=0)
        spec.output = (base / run.get("output", "results")).resolve()

    if spec.restarts < 1:
        raise ConfigurationError("restarts must be at least 1")
    for lam in spec.lambdas:
        if lam != "auto":
            try:
                float(lam)
            except ValueError as exc:
                raise ConfigurationError("lambda must be 'auto' or a number, got %r" % lam) from exc
    return spec


def _unit_seed(base, cell_index, restart, slot):
    ss = np.random.SeedSequence(entropy=(int(base), int(cell_index), int(restart), slot))
    return int(ss.generate_state(1)[0])


def _cell_name(model, K, pure, beta, lam):
    lam_tag = "auto" if lam == "auto" else ("%g" % float(lam))
    return "%s-K%d-%s-beta%g-lam%s" % (
        model, K, "pure" if pure else "nopure", beta, lam_tag
    )


def run_unit(payload):
    """Generate, unmix and score one (cell, restart) unit.

    Returns a result dict; never raises (failures are reported in the
    ``status`` field).  Top-level so process pools can pickle it.
    """
    out_dir = Path(payload["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "cell": payload["cell_name"],
        "restart": payload["restart"],
        "config": {k: payload[k] for k in
                   ("model", "K", "pure_pixels", "beta", "lambda",
                    "L", "width", "height", "snr_db", "nonlinear_fraction",
                    "tol", "max_iter", "policy")},
        "scene_seed": payload["scene_seed"],
        "solver_seed": payload["solver_seed"],
    }
    t0 = time.perf_counter()
    try:
        M_lib = load_endmember_library(payload["endmembers"])
        K = payload["K"]
        if M_lib.shape[1] < K:
            raise ConfigurationError(
                "endmember file has %d columns, cell needs %d" % (M_lib.shape[1], K)
            )
        scene = SceneSpec(
            model=payload["model"], L=payload["L"], K=K,
            width=payload["width"], height=payload["height"],
            snr_db=payload["snr_db"], pure_pixels=payload["pure_pixels"],
            nonlinear_fraction=payload["nonlinear_fraction"],
            seed=payload["scene_seed"],
        )
        Y, truth = generate(scene, M_lib[:, :K])
        lam = None if payload["lambda"] == "auto" else float(payload["lambda"])
        config = SolverConfig(
            beta=payload["beta"], lam=lam, tol=payload["tol"],
            max_iter=payload["max_iter"], policy=payload["policy"],
            seed=payload["solver_seed"], init=InitSpec(),
        )
        report = solve(Y, K, config)
        M_al, A_al = align_endmembers(truth.M_true, report.state.M, report.state.A)
        energy = energy_vector(report.state.R)
        thr = otsu_threshold(energy)
        det = outlier_detection_scores(energy, truth.nonlinear_mask, thr)
        metrics = {
            "asam": asam(truth.M_true, M_al),
            "gmse_sq": gmse_sq(truth.A_true, A_al),
            "outlier_precision": det["precision"],
            "outlier_recall": det["recall"],
            "outlier_f1": det["f1"],
            "outlier_l21": float(np.sum(energy)),
            "iterations": report.iterations,
            "stop_reason": report.stop_reason,
            "lambda_used": report.lam,
        }
        manifest.update(status="ok", metrics=metrics,
                        timings={"solve_s": report.wall_time,
                                 "unit_s": time.perf_counter() - t0})
    except Exception as exc:  # per-unit isolation
        manifest.update(status="failed", error="%s: %s" % (type(exc).__name__, exc),
                        timings={"unit_s": time.perf_counter() - t0})
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n"
    )
    return manifest


def _payloads(spec):
    out = []
    for ci, (model, K, pure, beta, lam) in enumerate(spec.cells()):
        name = _cell_name(model, K, pure, beta, lam)
        for r in range(spec.restarts):
            out.append({
                "cell_index": ci, "cell_name": name, "restart": r,
                "model": model, "K": K, "pure_pixels": pure,
                "beta": beta, "lambda": lam,
                "L": spec.L, "width": spec.width, "height": spec.height,
                "snr_db": spec.snr_db,
                "nonlinear_fraction": spec.nonlinear_fraction,
                "tol": spec.tol, "max_iter": spec.max_iter, "policy": spec.policy,
                "endmembers": str(spec.endmembers),
                "scene_seed": _unit_seed(spec.seed, ci, r, 0),
                "solver_seed": _unit_seed(spec.seed, ci, r, 1),
                "out_dir": str(spec.output / "cells" / name / ("r%d" % r)),
            })
    return out


AGGREGATE_COLUMNS = (
    "model", "K", "pure_pixels", "beta", "lambda", "restarts", "failures",
    "asam", "gmse_sq", "outlier_precision", "outlier_recall", "outlier_f1",
    "outlier_l21", "iterations",
)


def aggregate_rows(spec, manifests):
    """Mean metrics per cell over its successful restarts."""
    by_cell = {}
    for m in manifests:
        by_cell.setdefault(m["cell"], []).append(m)
    rows = []
    for ci, (model, K, pure, beta, lam) in enumerate(spec.cells()):
        name = _cell_name(model, K, pure, beta, lam)
        units = by_cell.get(name, [])
        ok = [u for u in units if u["status"] == "ok"]
        row = {
            "model": model, "K": K, "pure_pixels": pure, "beta": beta,
            "lambda": lam, "restarts": len(units), "failures": len(units) - len(ok),
        }
        for key in ("asam", "gmse_sq", "outlier_precision", "outlier_recall",
                    "outlier_f1", "outlier_l21", "iterations"):
            row[key] = (
                float(np.mean([u["metrics"][key] for u in ok])) if ok else float("nan")
            )
        rows.append(row)
    return rows


def write_aggregate_csv(rows, path):
    lines = [",".join(AGGREGATE_COLUMNS)]
    for row in rows:
        cells = []
        for col in AGGREGATE_COLUMNS:
            v = row[col]
            if isinstance(v, bool):
                cells.append("true" if v else "false")
            elif isinstance(v, float):
                cells.append(repr(v))
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def run_experiment(spec, jobs=None):
    """Execute the full sweep; returns the aggregate rows.

    ``jobs`` overrides the spec's worker count; 0 or None means one
    worker per logical core, 1 runs everything inline.
    """
    if jobs is None:
        jobs = spec.jobs
    if not jobs:
        jobs = os.cpu_count() or 1
    payloads = _payloads(spec)
    spec.output.mkdir(parents=True, exist_ok=True)
    if jobs == 1:
        manifests = [run_unit(p) for p in payloads]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            manifests = list(pool.map(run_unit, payloads))
    rows = aggregate_rows(spec, manifests)
    write_aggregate_csv(rows, spec.output / "aggregate.csv")
    return rows
