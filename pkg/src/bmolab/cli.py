"""Command-line experiment runner.

    bmolab TASK CONFIG.toml [--set block.key=value ...] [--out DIR]
    bmolab keys

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
Outputs are written to a scratch directory and moved into place only when
the whole task succeeds. Set BMOLAB_THREADS to run corpus members in parallel.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import os
import shutil
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import carleson as carl
from .bmo import bmo_phi, bmo_phi_A, bmo_phi_A_max, bmo_phi_A_p, bmo_tilde_p
from .config import SCHEMA_VERSION, TASKS, ConfigError, config_hash, key_table, load_config
from .corpus import Corpus, generate_corpus
from .grid import (Ball, Grid, GridError, GridFunction, check_ball, make_ball_menu, make_grid,
                   standard_radii, stride_centers)
from .growth import (ap_constant, check_afnj, ky_log, log_type, nested_pairs_from_menu, power,
                     radial_power_weight, rh_constant, weighted_power)
from .jn import (FitError, NotAdmissible, admissible_lambda, bound_excess,
                 distribution_normalization, fit_exponential, fit_polynomial_tail, jn_distribution,
                 jn_weighted_distribution, normalized_lambdas, oscillation_max)
from .luxembourg import NormError, luxembourg_norm
from .semigroup import (box, decay_admissibility, heat, lower_bound_check, poisson,
                        semigroup_check)

THREADS_ENV = "BMOLAB_THREADS"
LAMBDA_LO, LAMBDA_HI = 0.1, 20.0
DECAY_PROBE = 50.0  # decay order probed for kernels with unbounded order


class NumericalFailure(RuntimeError):
    def __init__(self, operation: str, exc: BaseException):
        super().__init__(f"{operation}: {exc}")
        self.operation = operation


@contextlib.contextmanager
def stage(name: str):
    """Re-raise numerical exceptions as NumericalFailure naming the operation."""
    try:
        yield
    except (ConfigError, NumericalFailure):
        raise
    except (ArithmeticError, ValueError, RuntimeError, NormError, FitError, NotAdmissible,
            np.linalg.LinAlgError) as exc:
        raise NumericalFailure(name, exc) from exc


# setup -------------------------------------------------------------------------


@dataclass
class Setup:
    config: dict
    digest: str
    grid: Grid
    phi: object
    op: object
    menu: object
    corpus: Corpus


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV}: expected an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{THREADS_ENV}: must be >= 1")
    return n


def _ordered_map(fn, items):
    """Map in parallel when BMOLAB_THREADS > 1; results keep the input order."""
    items = list(items)
    n = _threads()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def build(config: dict) -> Setup:
    c = config
    try:
        grid = make_grid(c["grid.dim"], c["grid.L"], c["grid.N"])
        anchor = tuple(c["growth.anchor"])
        fam = c["growth.family"]
        if fam == "power":
            phi = power(grid, c["growth.p"], c["growth.scale"])
        elif fam == "weighted_power":
            w = radial_power_weight(grid, c["growth.weight_exponent"], anchor)
            phi = weighted_power(grid, w, c["growth.p"], c["growth.ap_exponent"],
                                 c["growth.rh_exponent"], c["growth.scale"])
        elif fam == "log_type":
            phi = log_type(grid, c["growth.p"], c["growth.beta"], c["growth.gamma"], anchor,
                           c["growth.scale"])
        else:
            phi = ky_log(grid, c["growth.p"], anchor, c["growth.lower_type"], c["growth.scale"])
        kind = c["kernel.kind"]
        if kind == "poisson":
            op = poisson(grid.dim, c["kernel.backend"])
        elif kind == "heat":
            op = heat(c["kernel.backend"])
        else:
            op = box(c["kernel.m"], c["kernel.backend"])
        stride = c["menu.stride"] or max(1, grid.points_per_side // 64)
        radii = c["menu.radii"] or standard_radii(grid, c["menu.levels"])
        menu = make_ball_menu(grid, stride, radii)
        corpus = generate_corpus(grid, c["corpus.seed"], tuple(c["corpus.members"]))
        if c["corpus.function_file"]:
            f = GridFunction.load(c["corpus.function_file"])
            if f.grid != grid:
                raise ConfigError("corpus.function_file: grid differs from the grid block")
            corpus = Corpus(grid, corpus.seed, {**corpus.members, "file": f})
    except ConfigError:
        raise
    except (GridError, ValueError, OSError, KeyError) as exc:
        raise ConfigError(str(exc)) from None
    return Setup(c, config_hash(c), grid, phi, op, menu, corpus)


# reports -----------------------------------------------------------------------


@dataclass
class Report:
    tables: dict = field(default_factory=dict)  # name -> (header, rows)
    data: dict = field(default_factory=dict)  # name -> (x, y, labels)
    summary: dict = field(default_factory=dict)


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (tuple, list)):
        return " ".join(_cell(x) for x in v)
    return "" if v is None else str(v)


def render_csv(header, rows, digest: str) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(["config_hash", *header])
    for row in rows:
        w.writerow([digest, *(_cell(v) for v in row)])
    return buf.getvalue()


def render_data(x, y, labels) -> str:
    lines = [f"# {labels[0]} {labels[1]}"]
    lines += [f"{float(a)!r} {float(b)!r}" for a, b in zip(x, y)]
    return "\n".join(lines) + "\n"


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if np.isfinite(v) else str(v)
    return v


def write_outputs(task: str, setup: Setup, report: Report, outdir: Path) -> list[Path]:
    formats = set(setup.config["output.formats"])
    files = {}
    if "csv" in formats:
        for name, (header, rows) in report.tables.items():
            files[f"{name}.csv"] = render_csv(header, rows, setup.digest)
    if "dat" in formats:
        for name, (x, y, labels) in report.data.items():
            files[f"{name}.dat"] = render_data(x, y, labels)
    if "json" in formats:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "task": task,
            "config_hash": setup.digest,
            "config": setup.config,
            "files": sorted(files),
            "results": report.summary,
        }
        files[f"{task}.json"] = json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"
    outdir = Path(outdir)
    outdir.parent.mkdir(parents=True, exist_ok=True)
    scratch = Path(tempfile.mkdtemp(prefix=".bmolab-", dir=outdir.parent))
    try:
        for name, text in files.items():
            with open(scratch / name, "w", newline="", encoding="utf-8") as fh:
                fh.write(text)
        outdir.mkdir(exist_ok=True)
        written = []
        for name in sorted(files):
            os.replace(scratch / name, outdir / name)
            written.append(outdir / name)
    finally:
        shutil.rmtree(scratch, ignore_errors=True)
    return written


# tasks ---------------------------------------------------------------------------


def _nonconstant(setup: Setup):
    """Members with a nonzero classical seminorm, and the names dropped."""
    keep, dropped = [], []
    for name, f in setup.corpus:
        with stage("bmo_phi"):
            v = bmo_phi(f, setup.phi, setup.menu).value
        (keep if v > 0 else dropped).append((name, f))
    return keep, [n for n, _ in dropped]


def task_norms(s: Setup) -> Report:
    pt = s.config["task.p_tilde"]

    def one(item):
        name, f = item
        with stage("bmo_phi"):
            a = bmo_phi(f, s.phi, s.menu).value
        with stage("bmo_phi_A"):
            b = bmo_phi_A(f, s.phi, s.op, s.menu).value
        with stage("bmo_phi_A_max"):
            c = bmo_phi_A_max(f, s.phi, s.op).value
        with stage("bmo_phi_A_p"):
            d = bmo_phi_A_p(f, s.phi, s.op, s.menu, pt).value
        with stage("bmo_tilde_p"):
            e = bmo_tilde_p(f, s.phi, s.op, s.menu, pt).value
        return [name, s.phi.label(), s.op.name, a, b, c, d, e, pt, "menu-restricted"]

    rows = _ordered_map(one, list(s.corpus))
    header = ["member", "growth", "kernel", "bmo_phi", "bmo_phi_A", "bmo_phi_A_max",
              "bmo_phi_A_p", "bmo_tilde_p", "p_tilde", "note"]
    summary = {r[0]: dict(zip(header[3:8], r[3:8])) for r in rows}
    return Report({"norms": (header, rows)}, {}, summary)


def task_norm(s: Setup) -> Report:
    tol = s.config["task.norm_tol"]

    def one(item):
        name, f = item
        with stage("luxembourg_norm"):
            r = luxembourg_norm(s.phi, f, tol)
        return [name, s.phi.label(), r.value, r.modular_at_value, r.iterations]

    rows = _ordered_map(one, list(s.corpus))
    header = ["member", "growth", "norm", "modular_at_norm", "iterations"]
    return Report({"norm": (header, rows)}, {}, {r[0]: r[2] for r in rows})


def task_weights(s: Setup) -> Report:
    rows = []
    curves = {}
    for kind, fn, exps in (("A_p", ap_constant, s.config["task.ap_exponents"]),
                           ("RH_q", rh_constant, s.config["task.rh_exponents"])):
        xs, ys = [], []
        for p in exps:
            with stage(f"{fn.__name__}(p={p:g})"):
                rep = fn(s.phi, s.menu, p)
            rows.append([kind, rep.exponent, rep.constant, rep.argmax_ball, rep.argmax_t])
            xs.append(rep.exponent)
            ys.append(rep.constant)
        curves[f"{kind.lower()}_curve"] = (xs, ys, ("exponent", "constant"))
    with stage("check_afnj"):
        afnj = check_afnj(s.phi, nested_pairs_from_menu(s.menu, s.grid))
    rows.append(["afnj", "", afnj, "", ""])
    b = carl.index_condition_check(s.phi)
    summary = {"constants": {f"{r[0]}({_cell(r[1])})": r[2] for r in rows if r[0] != "afnj"},
               "afnj": afnj, "index_condition": b}
    header = ["kind", "exponent", "constant", "argmax_ball", "argmax_t"]
    return Report({"weights": (header, rows)}, curves, summary)


def _jn_balls(s: Setup):
    """The task.jn_balls menu centers closest to the origin at the distribution radius."""
    g = s.grid
    r = s.config["task.jn_radius"] or g.side_length / 8
    centers = stride_centers(g, s.menu.center_stride)
    d = np.sqrt(((centers - g.points_per_side // 2) ** 2).sum(axis=1))
    order = np.lexsort((np.arange(len(d)), d))[: s.config["task.jn_balls"]]
    return [check_ball(g, Ball(tuple(int(v) for v in centers[i]), r)) for i in order]


def task_jn(s: Setup) -> Report:
    members, dropped = _nonconstant(s)
    balls = _jn_balls(s)
    cfg = s.config
    p1 = cfg["task.p1"]
    p1c = p1 / (p1 - 1) if p1 > 1 else np.inf

    def one(item):
        name, f = item
        with stage("bmo_phi_A"):
            sem = bmo_phi_A(f, s.phi, s.op, s.menu).value
        with stage("bmo_phi_A_p"):
            semp = bmo_phi_A_p(f, s.phi, s.op, s.menu, cfg["task.p_tilde"]).value
        rows, data = [], {}
        for k, ball in enumerate(balls):
            with stage("jn_distribution"):
                norm = distribution_normalization(f, s.phi, s.op, ball, sem)
                # the grid stops below the largest oscillation so bounded members keep points
                hi = min(LAMBDA_HI, 0.999 * oscillation_max(f, s.op, ball) * norm)
                if not hi > LAMBDA_LO:
                    raise FloatingPointError("oscillation too small for the lambda grid")
                lam = normalized_lambdas(norm, LAMBDA_LO, hi, cfg["task.lambda_points"])
                curve = jn_distribution(f, s.phi, s.op, ball, lam, sem)
                wc = jn_weighted_distribution(f, s.phi, s.op, ball, lam, sem)
            status = "ok"
            try:
                fit = fit_exponential(curve)
            except FitError as exc:
                fit, status = None, f"fit_failed: {exc}"
            if fit is not None:
                excess = bound_excess(curve, fit)
                with stage("exp_integrability"):
                    lam_ok, avg = admissible_lambda(f, s.phi, s.op, ball, fit.c2,
                                                    cfg["task.exp_cap"], sem)
                fit_vals = [fit.c1, fit.c2, fit.r2, fit.points, excess, lam_ok, avg]
            else:
                fit_vals = [None] * 7
            try:
                tail = fit_polynomial_tail(wc, p1c)
                tail_vals = [tail.slope, tail.r2, tail.exponential_dominated]
            except FitError:
                tail_vals = [None, None, None]
            rows.append([name, k, ball.center, ball.radius, *fit_vals, *tail_vals, status])
            data[f"jn_{name}_{k}"] = (curve.lambdas, curve.measures, ("lambda", "measure"))
            data[f"jnw_{name}_{k}"] = (wc.lambdas, wc.measures, ("lambda", "weighted_measure"))
        return rows, data, [name, sem, semp, semp / sem]

    results = _ordered_map(one, members)
    rows = [r for res in results for r in res[0]]
    data = {k: v for res in results for k, v in res[1].items()}
    ratios = [res[2] for res in results]
    header = ["member", "ball", "center", "radius", "c1", "c2", "r2", "fit_points", "bound_excess",
              "admissible_lambda", "exp_average", "tail_slope", "tail_r2", "exponential_dominated",
              "status"]
    rh = ["member", "bmo_phi_A", "bmo_phi_A_p", "ratio"]
    c2 = {}
    for r in rows:
        if r[5] is not None:
            c2.setdefault(r[0], []).append(r[5])
    summary = {
        "excluded": dropped,
        "c2": c2,
        "c2_median": {k: float(np.median(v)) for k, v in c2.items()},
        "p_tilde": cfg["task.p_tilde"],
        "ratio_window": [min(r[3] for r in ratios), max(r[3] for r in ratios)] if ratios else [],
    }
    return Report({"jn": (header, rows), "jn_ratios": (rh, ratios)}, data, summary)


def _square_op(s: Setup):
    if s.op.kind not in ("poisson", "heat"):
        raise ConfigError("kernel.kind: square functions need poisson or heat")
    return s.op


def task_carleson(s: Setup) -> Report:
    op = _square_op(s)
    scales = carl.default_scales(s.grid, s.config["task.t_points"])
    fine = carl.refined_scales(scales)

    def one(item):
        name, f = item
        with stage("phi_carleson_norm"):
            rep = carl.phi_carleson_norm(f, s.phi, op, s.menu, scales)
            rep2 = carl.phi_carleson_norm(f, s.phi, op, s.menu, fine)
        with stage("g_function"):
            g = carl.g_function(f, op, scales)
        with stage("bmo_phi_A"):
            sem = bmo_phi_A(f, s.phi, op, s.menu).value
        l2 = f.l2_norm()
        g_ratio = g.l2_norm() / l2 if l2 > 0 else 0.0
        change = abs(rep2.value / rep.value - 1) if rep.value > 0 else 0.0
        with stage("tent_sample"):
            ts = carl.tent_sample(f, op, rep.ball, scales)
        prof = ts.density.sum(axis=1) * s.grid.cell_measure
        row = [name, op.name, rep.value, rep2.value, change, rep.ball.center, rep.ball.radius,
               g_ratio, sem, rep.value / sem if sem > 0 else None]
        return row, (f"tent_{name}", (ts.scales, prof, ("scale", "ball_field_energy")))

    results = _ordered_map(one, list(s.corpus))
    rows = [r[0] for r in results]
    header = ["member", "kernel", "carleson", "carleson_refined", "refinement_change",
              "argmax_center", "argmax_radius", "g_l2_ratio", "bmo_phi_A", "carleson_over_bmo_A"]
    data = dict(r[1] for r in results)
    summary = {r[0]: {"carleson": r[2], "refinement_change": r[4], "g_l2_ratio": r[7]}
               for r in rows}
    return Report({"carleson": (header, rows)}, data, summary)


def task_equiv(s: Setup) -> Report:
    members, dropped = _nonconstant(s)
    corpus = s.corpus.subset([n for n, _ in members])
    scales = carl.default_scales(s.grid, s.config["task.t_points"])
    with stage("equivalence_report"):
        tab = carl.equivalence_report(corpus, s.phi, s.menu, scales)
    rows = [[name, *tab.values[i]] for i, name in enumerate(tab.members)]
    ratio_rows = [[a, b, lo, hi] for (a, b), (lo, hi) in tab.ratios.items()]
    summary = {"excluded": dropped, "members": list(tab.members),
               "windows": {f"{a}/{b}": [lo, hi] for a, b, lo, hi in ratio_rows}}
    return Report({"equiv": (["member", *tab.columns], rows),
                   "equiv_ratios": (["numerator", "denominator", "min", "max"], ratio_rows)},
                  {}, summary)


def task_kernel_check(s: Setup) -> Report:
    m = s.op.m
    L = s.grid.side_length
    t = s.config["task.t"] or (L / 16) ** m
    u = s.config["task.s"] or (L / 32) ** m
    tol = s.config["task.tolerance"]

    def one(item):
        name, f = item
        with stage("semigroup_check"):
            c = semigroup_check(s.op, f, t, u)
        return [name, s.op.name, t, u, c.composition_error, c.mass_error, c.ok(tol)]

    rows = _ordered_map(one, list(s.corpus))
    header = ["member", "kernel", "t", "s", "composition_error", "mass_error", "ok"]
    with stage("lower_bound_check"):
        lower = lower_bound_check(s.op, s.grid, t, [(s.grid.points_per_side // 2,) * s.grid.dim])
    M = min(s.op.decay_order, DECAY_PROBE)
    with stage("decay_admissibility"):
        decay_ok, witness = decay_admissibility(s.op, M, s.grid.dim)
    summary = {"failures": [r[0] for r in rows if not r[-1]], "tolerance": tol,
               "lower_bound": lower, "decay": {"ok": decay_ok, **witness}}
    return Report({"kernel_check": (header, rows)}, {}, summary)


def task_bmo(s: Setup) -> Report:
    tables = {}
    summary = {}
    for name, f in s.corpus:
        with stage("bmo_phi"):
            a = bmo_phi(f, s.phi, s.menu)
        with stage("bmo_phi_A"):
            b = bmo_phi_A(f, s.phi, s.op, s.menu)
        rows = [[i, ball.center, ball.radius, a.contributions[i], b.contributions[i]]
                for i, ball in enumerate(s.menu.balls)]
        rows.append(["summary", "", "", a.value, b.value])
        tables[f"bmo_{name}"] = (["ball", "center", "radius", "bmo_phi", "bmo_phi_A"], rows)
        summary[name] = {"bmo_phi": a.value, "bmo_phi_A": b.value, "argmax_phi": a.argmax,
                         "argmax_A": b.argmax}
    return Report(tables, {}, summary)


RUNNERS = {
    "norms": task_norms,
    "norm": task_norm,
    "weights": task_weights,
    "jn": task_jn,
    "carleson": task_carleson,
    "equiv": task_equiv,
    "kernel-check": task_kernel_check,
    "bmo": task_bmo,
}
assert set(RUNNERS) == set(TASKS)


def run(task: str, config: dict, outdir=None) -> list[Path]:
    """Run one task on a resolved configuration and write its outputs."""
    setup = build(config)
    report = RUNNERS[task](setup)
    return write_outputs(task, setup, report, Path(outdir or config["output.directory"]))


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bmolab", description="BMO-type seminorm laboratory")
    sub = ap.add_subparsers(dest="task", required=True)
    for t in TASKS:
        p = sub.add_parser(t, help=f"run the {t} task")
        p.add_argument("config", help="TOML configuration file")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override a configuration key")
        p.add_argument("--out", default=None, help="output directory (overrides output.directory)")
    sub.add_parser("keys", help="list configuration keys")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.task == "keys":
        for row in key_table():
            print("\t".join(row))
        return 0
    try:
        config = load_config(args.config, args.overrides)
        files = run(args.task, config, args.out)
    except ConfigError as exc:
        print(f"bmolab: config error: {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"bmolab: numerical failure in {exc}", file=sys.stderr)
        return 3
    for p in files:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
