"""Command-line surface: select-k, fit, predict, reproduce, diagnose.

Every command is deterministic given its full flag set (including --seed),
and every output file embeds a format version plus the effective config.
"""

import csv
import json
import os
from pathlib import Path

import click
import numpy as np

from . import __version__
from .cost_matrix import CapacityError, check_quadrangle, precompute
from .dataset import bundled_path, gen_heteroscedastic, load_csv
from .estimator import BinnedConformalRegressor
from .experiments import (
    bimodal_study,
    hetero_coverage_study,
    realdata_run,
    write_results_csv,
    write_summary_json,
)
from .model_select import select_k, write_kcurve_csv

_STUDIES = ("bimodal", "hetero-coverage", "faithful", "mcycle")


def _threads(flag_value):
    if flag_value is not None:
        return max(1, int(flag_value))
    env = os.environ.get("CRPSBIN_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"CRPSBIN_THREADS must be an integer, got {env!r}")
    return os.cpu_count() or 1


def _load_input(data, x_col, y_col, simulate, n, seed):
    if (data is None) == (simulate is None):
        raise ValueError("provide exactly one of --data or --simulate")
    if data is not None:
        path = Path(data)
        if not path.exists():
            try:
                path = Path(bundled_path(str(data)))
            except ValueError:
                raise FileNotFoundError(f"data file not found: {data}")
        if str(path).endswith("faithful.csv"):
            x_col = x_col or "waiting"
            y_col = y_col or "eruptions"
        if str(path).endswith("mcycle.csv"):
            x_col = x_col or "times"
            y_col = y_col or "accel"
        if not (x_col and y_col):
            raise ValueError("--x and --y column names are required with --data")
        return load_csv(path, x_col, y_col), {"data": str(path), "x": x_col, "y": y_col}
    if simulate != "hetero":
        raise ValueError(f"unknown generator {simulate!r}; available: hetero")
    return gen_heteroscedastic(n, seed), {"simulate": simulate, "n": n, "seed": seed}


def _run(ctx, body):
    try:
        body()
    except (ValueError, OSError, CapacityError, KeyError) as exc:
        click.echo(f"error: {exc}", err=True)
        ctx.exit(2)


@click.group()
@click.version_option(version=__version__, prog_name="crpsbin")
@click.option("--seed", default=0, show_default=True, type=int,
              help="Seed for every random draw in the command.")
@click.option("--threads", default=None, type=int,
              help="Worker threads (default: CRPSBIN_THREADS or all cores).")
@click.option("--mem-cap", default=2.0, show_default=True, type=float,
              help="Memory cap for the cost table, GiB.")
@click.pass_context
def main(ctx, seed, threads, mem_cap):
    """Conditional distributions by CRPS-optimal binning of sorted data."""
    ctx.ensure_object(dict)
    ctx.obj["seed"] = seed
    ctx.obj["threads_flag"] = threads
    ctx.obj["mem_cap_bytes"] = int(mem_cap * 1024**3)


def _common_config(ctx, **extra):
    cfg = {
        "tool_version": __version__,
        "seed": ctx.obj["seed"],
        "threads": _threads(ctx.obj["threads_flag"]),
        "mem_cap_bytes": ctx.obj["mem_cap_bytes"],
    }
    cfg.update(extra)
    return cfg


@main.command("select-k")
@click.option("--data", default=None, help="CSV path or bundled name (faithful, mcycle).")
@click.option("--x", "x_col", default=None, help="Covariate column name.")
@click.option("--y", "y_col", default=None, help="Response column name.")
@click.option("--simulate", default=None, help="Generator name (hetero).")
@click.option("--n", default=1000, show_default=True, type=int, help="Generator sample size.")
@click.option("--k-max", default=None, type=int, help="Override the bin-count cap.")
@click.option("--m-min", default=2, show_default=True, type=int)
@click.option("--out", default="kcurve.csv", show_default=True, type=click.Path())
@click.pass_context
def cmd_select_k(ctx, data, x_col, y_col, simulate, n, k_max, m_min, out):
    """Cross-validated bin-count selection; writes the K curve CSV."""

    def body():
        threads = _threads(ctx.obj["threads_flag"])
        ds, src = _load_input(data, x_col, y_col, simulate, n, ctx.obj["seed"])
        kcurve, loocurve = select_k(ds, k_max_override=k_max, m_min=m_min, threads=threads,
                                    mem_cap_bytes=ctx.obj["mem_cap_bytes"])
        cfg = _common_config(ctx, command="select-k", k_max=kcurve.k_max, m_min=m_min, **src)
        write_kcurve_csv(out, kcurve, loocurve, config=cfg)
        click.echo(f"K* = {kcurve.k_star}")
        click.echo(f"curve written to {out}")

    _run(ctx, body)


@main.command("fit")
@click.option("--data", default=None)
@click.option("--x", "x_col", default=None)
@click.option("--y", "y_col", default=None)
@click.option("--simulate", default=None)
@click.option("--n", default=1000, show_default=True, type=int)
@click.option("--k", default=None, type=int, help="Number of bins.")
@click.option("--auto-k", is_flag=True, help="Select the bin count by cross-validation.")
@click.option("--m-min", default=2, show_default=True, type=int)
@click.option("--exact", is_flag=True, help="Exact rational cost precompute (slow).")
@click.option("--out", default="model.json", show_default=True, type=click.Path())
@click.pass_context
def cmd_fit(ctx, data, x_col, y_col, simulate, n, k, auto_k, m_min, exact, out):
    """Fit the binned model and write it as JSON."""

    def body():
        if (k is None) == (not auto_k):
            raise ValueError("provide exactly one of --k or --auto-k")
        threads = _threads(ctx.obj["threads_flag"])
        ds, src = _load_input(data, x_col, y_col, simulate, n, ctx.obj["seed"])
        est = BinnedConformalRegressor(
            n_bins="auto" if auto_k else int(k), m_min=m_min, exact_cost=exact,
            threads=threads, mem_cap_bytes=ctx.obj["mem_cap_bytes"],
        ).fit(ds.x, ds.y)
        doc = est.to_json()
        doc["config"] = _common_config(ctx, command="fit", m_min=m_min, auto_k=auto_k, **src)
        with open(out, "w", encoding="utf-8") as fh:
            json.dump(doc, fh)
        click.echo(f"K = {est.k_}")
        click.echo("x boundaries: " + ", ".join(repr(float(v)) for v in est.x_boundaries_))
        click.echo("bin sizes: " + ", ".join(str(s) for s in est.bin_sizes_))
        click.echo(f"total LOO-CRPS cost = {est.total_cost_!r}")
        click.echo(f"model written to {out}")

    _run(ctx, body)


@main.command("predict")
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--x-star", default=None, help="Comma-separated query covariates.")
@click.option("--x-file", default=None, type=click.Path(), help="File with one query per line.")
@click.option("--epsilon", default=0.1, show_default=True, type=float)
@click.option("--score", default="crps", show_default=True,
              type=click.Choice(["crps", "knn"]))
@click.option("--knn-k", default=1, show_default=True, type=int)
@click.option("--y-observed", default=None,
              help="Comma-separated observed responses (adds p_of_observed).")
@click.option("--out", default="predictions.csv", show_default=True, type=click.Path())
@click.option("--pcurve", default=None, nargs=2, type=(float, click.Path()),
              help="X_STAR OUT.csv: dump the p-value curve at one query point.")
@click.pass_context
def cmd_predict(ctx, model_path, x_star, x_file, epsilon, score, knn_k, y_observed, out, pcurve):
    """Prediction sets at query covariates from a fitted model file."""

    def body():
        if not Path(model_path).exists():
            raise FileNotFoundError(f"model file not found: {model_path}")
        est = BinnedConformalRegressor.from_json(model_path)
        if (x_star is None) == (x_file is None):
            raise ValueError("provide exactly one of --x-star or --x-file")
        if x_star is not None:
            xs = np.array([float(tok) for tok in x_star.split(",") if tok.strip()])
        else:
            xs = np.loadtxt(x_file, ndmin=1)
        sets = est.predict_set(xs, epsilon, score=score, knn_k=knn_k)
        bins = est.bin_index(xs)
        observed = None
        if y_observed is not None:
            observed = np.array([float(tok) for tok in y_observed.split(",") if tok.strip()])
            if observed.size != xs.size:
                raise ValueError("--y-observed must match the number of query points")

        max_ints = max((ps.n_intervals for ps in sets), default=0)
        cfg = _common_config(ctx, command="predict", model=str(model_path),
                             epsilon=epsilon, score=score, knn_k=knn_k)
        with open(out, "w", newline="", encoding="utf-8") as fh:
            fh.write("# " + json.dumps(cfg, sort_keys=True) + "\n")
            writer = csv.writer(fh)
            header = ["x_star", "bin", "whole_line"]
            for t in range(1, max_ints + 1):
                header += [f"lo_{t}", f"hi_{t}"]
            if observed is not None:
                header.append("p_of_observed")
            writer.writerow(header)
            for i, (xq, ps) in enumerate(zip(xs, sets)):
                row = [repr(float(xq)), int(bins[i]), int(ps.whole_line)]
                for lo, hi in ps.intervals:
                    row += [repr(lo), repr(hi)]
                row += [""] * (2 * (max_ints - ps.n_intervals))
                if observed is not None:
                    row.append(repr(float(
                        est.predict_pvalue([xq], [observed[i]], score=score)[0]
                    )))
                writer.writerow(row)
        click.echo(f"predictions written to {out}")

        if pcurve is not None:
            xq, curve_out = pcurve
            b = int(est.bin_index(np.array([xq]))[0])
            ref = est.bins_[b]
            from .conformal import _pvalues

            span = float(ref.atoms[-1] - ref.atoms[0]) or 1.0
            grid = np.linspace(ref.atoms[0] - span, ref.atoms[-1] + span, 2001)
            pv = _pvalues(ref, grid, score, knn_k)
            with open(curve_out, "w", newline="", encoding="utf-8") as fh:
                fh.write("# " + json.dumps({**cfg, "pcurve_x": xq}, sort_keys=True) + "\n")
                writer = csv.writer(fh)
                writer.writerow(["y_h", "p"])
                for yv, p in zip(grid, pv):
                    writer.writerow([repr(float(yv)), repr(float(p))])
            click.echo(f"p-value curve written to {curve_out}")

    _run(ctx, body)


@main.command("reproduce")
@click.argument("study")
@click.option("--r", "-R", "reps", default=None, type=int,
              help="Replications (bimodal/faithful/mcycle) or seeds (hetero-coverage).")
@click.option("--epsilon", default=0.1, show_default=True, type=float)
@click.option("--out-dir", default=".", show_default=True, type=click.Path())
@click.pass_context
def cmd_reproduce(ctx, study, reps, epsilon, out_dir):
    """Run a bundled study and emit results CSV plus a JSON summary.

    STUDY is one of: bimodal, hetero-coverage, faithful, mcycle.
    """

    def body():
        if study not in _STUDIES:
            raise ValueError(f"unknown study {study!r}; available: {', '.join(_STUDIES)}")
        threads = _threads(ctx.obj["threads_flag"])
        seed = ctx.obj["seed"]
        outdir = Path(out_dir)
        outdir.mkdir(parents=True, exist_ok=True)
        if study == "bimodal":
            r = reps if reps is not None else 500
            res = bimodal_study(r=r, epsilon=epsilon, seed=seed)
            reports = [res["crps"], res["knn"]]
            cfg = _common_config(ctx, command="reproduce", study=study, r=r,
                                 epsilon=epsilon, measure_ratio=res["measure_ratio"])
        elif study == "hetero-coverage":
            r = reps if reps is not None else 20
            reports = hetero_coverage_study(n_seeds=r, seed=seed, threads=threads)
            cfg = _common_config(ctx, command="reproduce", study=study, n_seeds=r)
        else:
            from .dataset import load_bundled

            ds = load_bundled(study)
            r = reps if reps is not None else 200
            reports = realdata_run(ds, r=r, epsilon=epsilon, seed=seed, threads=threads)
            cfg = _common_config(ctx, command="reproduce", study=study, r=r,
                                 epsilon=epsilon, n=ds.n)
        csv_path = outdir / f"{study.replace('-', '_')}_results.csv"
        json_path = outdir / f"{study.replace('-', '_')}_summary.json"
        write_results_csv(csv_path, reports, config=cfg)
        write_summary_json(json_path, cfg, reports)
        for rep in reports:
            if np.isnan(rep.coverage):
                click.echo(f"{rep.method:16s} (not reproduced; placeholder row)")
            else:
                click.echo(
                    f"{rep.method:16s} score={rep.score:9s} eps={rep.epsilon:.2f} "
                    f"coverage={100 * rep.coverage:.1f}% measure={rep.mean_measure:.4g}"
                )
        click.echo(f"results written to {csv_path} and {json_path}")

    _run(ctx, body)


@main.command("diagnose")
@click.option("--data", default=None)
@click.option("--x", "x_col", default=None)
@click.option("--y", "y_col", default=None)
@click.option("--simulate", default=None)
@click.option("--n", default=1000, show_default=True, type=int)
@click.option("--quad-exhaustive-limit", default=60, show_default=True, type=int,
              help="Exhaustive quadrangle probe up to this n; sampled above.")
@click.option("--max-reports", default=20, show_default=True, type=int)
@click.option("--out", default="diagnose_kcurve.csv", show_default=True, type=click.Path())
@click.pass_context
def cmd_diagnose(ctx, data, x_col, y_col, simulate, n, quad_exhaustive_limit, max_reports, out):
    """Quadrangle-inequality probe plus the paired LOO/Test curve CSV."""

    def body():
        threads = _threads(ctx.obj["threads_flag"])
        ds, src = _load_input(data, x_col, y_col, simulate, n, ctx.obj["seed"])
        cm = precompute(ds, threads=threads, mem_cap_bytes=ctx.obj["mem_cap_bytes"])
        violations = check_quadrangle(
            cm, max_reports=max_reports, exhaustive_limit=quad_exhaustive_limit,
            seed=ctx.obj["seed"],
        )
        mode = "exhaustive" if ds.n <= quad_exhaustive_limit else "sampled"
        click.echo(f"quadrangle probe ({mode}, n={ds.n}): {len(violations)} violation(s)")
        for a, b, c, d, gap in violations:
            click.echo(f"  ({a},{b},{c},{d}) gap={gap!r}")
        if ds.n >= 20:
            kcurve, loocurve = select_k(ds, threads=threads,
                                        mem_cap_bytes=ctx.obj["mem_cap_bytes"])
            cfg = _common_config(ctx, command="diagnose", **src)
            write_kcurve_csv(out, kcurve, loocurve, config=cfg)
            click.echo(f"K curve written to {out} (K* = {kcurve.k_star})")
        else:
            click.echo("dataset too small for the K-selection curve (n < 20)")

    _run(ctx, body)


if __name__ == "__main__":
    main(prog_name="crpsbin")
