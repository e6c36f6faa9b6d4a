"""
Command-line front end.

Every output starts with a comment line carrying the package version, the
seed and a hash of the full configuration, e.g.::

    # supjump 0.1.0 seed=0 config=3f2a9c...
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .closedform import (
    ModelKind,
    load_params,
    superposed_acf,
    superposed_mean,
    superposed_variance,
)
from .empirical import read_csv, sample_acf, summary, trim
from .exceptions import SupJumpError
from .fit import DEFAULT_LAGS, fit_series
from .measures import discretize
from .riccati import Numerics, solve_riccati, variance_routes, write_trajectory
from .simulate import SimConfig, ensemble_stats, simulate_path

DEFAULT_SEED = 0


def _config_hash(args, extra: str = "") -> str:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out")}
    blob = json.dumps(cfg, sort_keys=True, default=str) + extra
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _header(args, extra: str = "") -> str:
    return f"# supjump {__version__} seed={args.seed} config={_config_hash(args, extra)}"


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return x


def _render(rows, args, extra="") -> str:
    if args.format == "json":
        meta = {"version": __version__, "seed": args.seed, "config": _config_hash(args, extra)}
        return json.dumps({"meta": meta, "rows": rows}, indent=2, default=float) + "\n"
    buf = io.StringIO()
    buf.write(_header(args, extra) + "\n")
    if rows:
        wr = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
        wr.writeheader()
        for row in rows:
            wr.writerow({k: _fmt(v) for k, v in row.items()})
    return buf.getvalue()


def _emit(text: str, out):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)


def _expand_inputs(paths):
    files = []
    for p in map(Path, paths):
        if p.is_dir():
            files.extend(sorted(q for q in p.iterdir() if q.suffix.lower() == ".csv"))
        else:
            files.append(p)
    return files


def _params_text(args) -> str:
    return Path(args.params).read_text(encoding="utf-8") if getattr(args, "params", None) else ""


def _lag_list(args):
    if args.lags is None:
        return None
    out = []
    for tok in str(args.lags).split(","):
        tok = tok.strip()
        if tok:
            out.append(float(tok))
    return out


def _report(failures) -> int:
    for name, err in failures:
        msg = str(err)
        print(f"error: {msg}" if str(name) in msg else f"error: {name}: {msg}", file=sys.stderr)
    return 1 if failures else 0


def cmd_stats(args) -> int:
    rows, failures = [], []
    for f in _expand_inputs(args.inputs):
        try:
            rows.append(summary(trim(read_csv(f))).as_row())
        except (SupJumpError, OSError, ValueError) as exc:
            failures.append((f, exc))
    if rows or not failures:
        _emit(_render(rows, args), args.out)
    return _report(failures)


def cmd_fit(args) -> int:
    lags = _lag_list(args)
    lags = [int(x) for x in lags] if lags else list(DEFAULT_LAGS)
    if len(lags) == 1:
        lags = list(range(1, lags[0] + 1))
    mode, w_value = ("fit", 1.0) if args.w == "fit" else ("fixed", 1.0 if args.w == "fixed" else float(args.w))
    rows, failures = [], []
    for f in _expand_inputs(args.inputs):
        try:
            rows.append(fit_series(read_csv(f), w=mode, w_value=w_value, lags=lags).as_row())
        except (SupJumpError, OSError, ValueError) as exc:
            failures.append((f, exc))
    if rows or not failures:
        _emit(_render(rows, args), args.out)
    return _report(failures)


def cmd_acf(args) -> int:
    lags = _lag_list(args) or [float(k) for k in DEFAULT_LAGS]
    if args.params:
        p = load_params(args.params)
        if p.kind is ModelKind.AG:
            raise ValueError("the AG model has no closed-form ACF; use 'supjump simulate' or 'compare'")
        rho = superposed_acf(p, np.asarray(lags))
        rows = [{"lag": lag, "acf": float(v)} for lag, v in zip(lags, np.atleast_1d(rho))]
        _emit(_render(rows, args, _params_text(args)), args.out)
        return 0
    rows, failures = [], []
    max_lag = int(max(lags))
    for f in _expand_inputs(args.inputs):
        try:
            rho = sample_acf(trim(read_csv(f)), max_lag)
            rows.extend({"label": f.stem, "lag": int(k), "acf": float(rho[int(k)])} for k in lags)
        except (SupJumpError, OSError, ValueError) as exc:
            failures.append((f, exc))
    if rows or not failures:
        _emit(_render(rows, args), args.out)
    return _report(failures)


def _sim_config(args, replicates=None) -> SimConfig:
    d = SimConfig()
    return SimConfig(
        n=args.n or d.n, dt=args.dt or d.dt, burn_in=args.burn_in,
        horizon=args.horizon or d.horizon, sample_interval=args.sample_interval or d.sample_interval,
        replicates=replicates if replicates is not None else (args.replicates or d.replicates),
        seed=args.seed,
    )


def cmd_simulate(args) -> int:
    p = load_params(args.params)
    cfg = _sim_config(args)
    grid = discretize(p.mixture, cfg.n)
    extra = _params_text(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = simulate_path(p, grid, cfg, 0)
    rows = [{"t": float(t), "z": float(z)} for t, z in zip(path.times, path.z)]
    (out / f"path.{args.format}").write_text(_render(rows, args, extra))
    if cfg.replicates >= 2:
        lags = _lag_list(args) or [1.0, 2.0, 5.0, 10.0]
        lags = [x for x in lags if x <= cfg.horizon]
        e = ensemble_stats(p, grid, cfg, lags)
        rows = [
            {"statistic": "mean", "value": e.mean, "se": e.mean_se},
            {"statistic": "variance", "value": e.variance, "se": e.variance_se},
            {"statistic": "skewness", "value": e.skewness, "se": e.skewness_se},
            {"statistic": "jump_rate", "value": e.jump_rate, "se": e.jump_rate_se},
        ] + [{"statistic": f"acf({lag:g})", "value": float(v), "se": float(s)}
             for lag, v, s in zip(e.lags, e.acf, e.acf_se)]
        (out / f"ensemble.{args.format}").write_text(_render(rows, args, extra))
    return 0


def _numerics(args) -> Numerics:
    d = Numerics()
    return Numerics(n=args.n or d.n, dt=args.dt or d.dt)


def cmd_riccati(args) -> int:
    p = load_params(args.params)
    if p.kind is ModelKind.MF:
        p = p.with_kind(ModelKind.AG)
    nm = _numerics(args)
    grid = discretize(p.mixture, nm.n)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sol = solve_riccati(p, grid, args.theta, nm.dt, nm.tol, nm.t_max)
    write_trajectory(sol, out / "trajectory.csv", stride=max(1, len(sol.t) // 2000),
                     header=_header(args, _params_text(args)))
    v = variance_routes(p, grid, nm)
    rows = [{
        "theta": args.theta, "mgf": sol.mgf, "A": sol.A, "A_tail_bound": sol.tail_bound,
        "converged": int(sol.converged), "monotone_decay": int(sol.monotone_decay),
        "mean_lyapunov": p.b * v.solution.I1, "mean_closed_form": superposed_mean(p),
        "variance_identity": v.identity, "variance_lyapunov": v.lyapunov, "variance_route_gap": v.rel_gap,
    }]
    (out / f"summary.{args.format}").write_text(_render(rows, args, _params_text(args)))
    return 0


def cmd_compare(args) -> int:
    p = load_params(args.params)
    ws = [float(x) for x in str(args.w or "0,0.25,0.5,0.75,1").split(",") if x.strip()]
    lags = _lag_list(args) or [1.0, 2.0, 5.0, 10.0]
    nm = _numerics(args)
    reps = args.replicates if args.replicates is not None else 0
    cfg = _sim_config(args, replicates=max(reps, 2))
    grid = discretize(p.mixture, nm.n)
    prev = p.with_kind(ModelKind.PREVIOUS)
    rows = []
    for w in ws:
        mf = p.with_kind(ModelKind.MF, w)
        ag = p.with_kind(ModelKind.AG, w)
        v = variance_routes(ag, grid, nm)
        row = {"w": w, "var_previous": superposed_variance(prev), "var_mf": superposed_variance(mf),
               "var_ag_identity": v.identity, "var_ag_lyapunov": v.lyapunov, "var_ag_gap": v.rel_gap}
        for lag, rho in zip(lags, np.atleast_1d(superposed_acf(mf, np.asarray(lags)))):
            row[f"acf_mf({lag:g})"] = float(rho)
        if reps >= 2:
            for tag, q in (("mf", mf), ("ag", ag)):
                e = ensemble_stats(q, grid, cfg, lags)
                row[f"mc_var_{tag}"] = e.variance
                row[f"mc_var_{tag}_se"] = e.variance_se
                for lag, a, s in zip(e.lags, e.acf, e.acf_se):
                    row[f"mc_acf_{tag}({lag:g})"] = float(a)
                    row[f"mc_acf_{tag}({lag:g})_se"] = float(s)
        rows.append(row)
    _emit(_render(rows, args, _params_text(args)), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="supjump", description=__doc__.splitlines()[1])
    ap.add_argument("--version", action="version", version=f"supjump {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, params=False, inputs=False):
        if inputs:
            sp.add_argument("inputs", nargs="*", help="CSV files or directories of CSV files")
        sp.add_argument("--params", required=params, help="model parameters (JSON)")
        sp.add_argument("--out", help="output file (tables) or directory (simulate, riccati)")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
        sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
        sp.add_argument("--lags", help="comma-separated lags, or a single maximum lag for fit")
        sp.add_argument("--n", type=int, help="grid size")
        sp.add_argument("--dt", type=float, help="time step")
        return sp

    sp = common(sub.add_parser("stats", help="summary statistics of count series"), inputs=True)
    sp.set_defaults(func=cmd_stats)

    sp = common(sub.add_parser("fit", help="fit model parameters to count series"), inputs=True)
    sp.add_argument("--w", default="fixed", help="'fixed' (w = 1), 'fit', or a fixed numeric value")
    sp.set_defaults(func=cmd_fit)

    sp = common(sub.add_parser("acf", help="sample ACF of series, or model ACF with --params"), inputs=True)
    sp.set_defaults(func=cmd_acf)

    for name, func, helptext in (("simulate", cmd_simulate, "Monte Carlo paths and ensemble statistics"),
                                 ("compare", cmd_compare, "MF/AG/previous variance and ACF by w")):
        sp = common(sub.add_parser(name, help=helptext), params=True)
        sp.add_argument("--replicates", type=int)
        sp.add_argument("--horizon", type=float)
        sp.add_argument("--burn-in", type=float, dest="burn_in")
        sp.add_argument("--sample-interval", type=float, dest="sample_interval")
        if name == "compare":
            sp.add_argument("--w", help="comma-separated weights (default 0,0.25,0.5,0.75,1)")
        sp.set_defaults(func=func)

    sp = common(sub.add_parser("riccati", help="Riccati trajectory, MGF, AG mean and variance"), params=True)
    sp.add_argument("--theta", type=float, default=1.0)
    sp.set_defaults(func=cmd_riccati)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command in ("simulate", "riccati") and not args.out:
        ap.error(f"{args.command} needs --out DIRECTORY")
    if args.command in ("stats", "fit") and not args.inputs:
        ap.error(f"{args.command} needs at least one input CSV")
    if args.command == "acf" and not args.inputs and not args.params:
        ap.error("acf needs input CSVs or --params")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except (SupJumpError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
