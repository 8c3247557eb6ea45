"""Command-line front end.

Every subcommand reads one TOML config (see config.py for the schema),
writes CSV artifacts plus a JSON run manifest into the output directory, and
prints a short summary.  CSV bytes are a pure function of config + seed; the
wall-clock timestamp lives only in the manifest.

Exit codes: 0 ok, 2 config error, 3 parameter-domain error, 4 solver
failure, 5 accuracy-gate failure.  Each failure prints a single
machine-parseable line to stderr: "arbbands: <kind>: <message>".
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .bscore import MarketParams, bs_call
from .config import RunConfig, load_config
from .errors import (AccuracyError, ArbBandsError, ConfigError, NoRootError,
                     ParameterError, SolverError)
from .mc import ensemble_stats
from .noise import clt_variance_check, sample_path
from .pde import GridSpec, extract_diagonal, solve_covariance_pde
from .smile import smile_curve
from .variance import variance_u, variance_u_closed_call

_EXIT_CODES: tuple[tuple[type, int], ...] = (
    (ConfigError, 2),
    (NoRootError, 3),
    (ParameterError, 3),
    (SolverError, 4),
    (AccuracyError, 5),
)

_U_SOURCES = ("closed_form", "quadrature", "pde")


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_manifest(outdir: Path, command: str, cfg: RunConfig,
                    outputs: dict[str, str], checks: dict,
                    seed: int | None) -> Path:
    manifest = {
        "command": command,
        "config_path": cfg.path,
        "parameters": cfg.raw,
        "seed": seed,
        "outputs": outputs,
        "checks": checks,
        "versions": {
            "arbbands": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": sys.version.split()[0],
        },
        "timestamp_utc": datetime.now(timezone.utc).isoformat(),
    }
    path = outdir / "run_manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _point_values(tasks, fn, threads: int) -> list:
    if threads > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


def _u_source(cfg: RunConfig, section: str, key: str) -> str:
    src = cfg.string(section, key, "closed_form")
    if src not in _U_SOURCES:
        raise ConfigError(
            f"{section}.{key} must be one of {_U_SOURCES}, got {src!r}"
        )
    return src


def _u_grid_rows(cfg: RunConfig, spots: list[float], taus: list[float],
                 source: str, mp: MarketParams, ap) -> dict[tuple[float, float], float]:
    """Fluctuation variance on spots x taus via the selected route."""
    out: dict[tuple[float, float], float] = {}
    if source == "pde":
        horizon = max(taus)
        probe = MarketParams(spot=mp.spot, strike=mp.strike, rate=mp.rate,
                             volatility=mp.volatility, tau=horizon)
        gs = cfg.grid(probe, tau_max=horizon, default=(401, 800))
        cps = sorted(set(taus))
        surfs = solve_covariance_pde(probe, ap, gs, checkpoints=cps)
        for surf in surfs:
            diag = extract_diagonal(surf)
            ax = diag.axes[0]
            for s in spots:
                lx = math.log(s)
                if not (ax[0] <= lx <= ax[-1]):
                    raise ParameterError(
                        f"spot {s} outside the PDE grid domain"
                    )
                out[(surf.tau, s)] = float(np.interp(lx, ax, diag.values))
        return out
    threads = cfg.threads()
    tasks = [(t, s) for t in taus for s in spots]

    def one(ts):
        t, s = ts
        return variance_u(s, t, mp, ap, source)

    vals = _point_values(tasks, one, threads)
    for (t, s), v in zip(tasks, vals):
        out[(t, s)] = v
    return out


def cmd_price(cfg: RunConfig, outdir: Path):
    mp = cfg.market()
    rec = bs_call(mp)
    _write_csv(outdir / "price.csv",
               ["spot", "strike", "rate", "volatility", "tau",
                "price", "delta", "gamma", "rho"],
               [[mp.spot, mp.strike, mp.rate, mp.volatility, mp.tau,
                 rec.price, rec.delta, rec.gamma, rec.rho]])
    summary = (f"price {rec.price:.6f}  delta {rec.delta:.6f}  "
               f"gamma {rec.gamma:.6f}  rho {rec.rho:.6f}")
    return {"price": "price.csv"}, {}, [summary], None


def cmd_band(cfg: RunConfig, outdir: Path):
    mp = cfg.market()
    ap = cfg.arbitrage()
    spots = cfg.axis("band", "spots")
    taus = cfg.axis("band", "taus")
    source = _u_source(cfg, "band", "u_source")
    u_vals = _u_grid_rows(cfg, spots, taus, source, mp, ap)
    rows = []
    for t in taus:
        for s in spots:
            point = MarketParams(spot=s, strike=mp.strike, rate=mp.rate,
                                 volatility=mp.volatility, tau=t)
            price = bs_call(point).price
            u = u_vals[(t, s)]
            half = ap.band_multiplier * math.sqrt(ap.epsilon * u)
            rows.append([t, s, price, u, price - half, price + half])
    _write_csv(outdir / "band.csv",
               ["tau", "spot", "bs_price", "fluct_var", "lower", "upper"],
               rows)
    summary = (f"band grid {len(taus)}x{len(spots)} via {source}; "
               f"last row upper {rows[-1][5]:.6f}")
    return {"band": "band.csv"}, {}, [summary], None


def cmd_usurface(cfg: RunConfig, outdir: Path):
    mp = cfg.market()
    ap = cfg.arbitrage()
    spots = cfg.axis("usurface", "spots")
    taus = cfg.axis("usurface", "taus")
    source = _u_source(cfg, "usurface", "method")
    u_vals = _u_grid_rows(cfg, spots, taus, source, mp, ap)
    rows = [[t, s, u_vals[(t, s)]] for t in taus for s in spots]
    _write_csv(outdir / "usurface.csv", ["tau", "spot", "fluct_var"], rows)
    return ({"usurface": "usurface.csv"}, {},
            [f"variance surface {len(taus)}x{len(spots)} via {source}"], None)


def cmd_covpde(cfg: RunConfig, outdir: Path):
    mp = cfg.market()
    ap = cfg.arbitrage()
    gs = cfg.grid(mp, tau_max=mp.tau)
    checkpoints = cfg.axis("covpde", "checkpoints")
    surfs = solve_covariance_pde(mp, ap, gs, checkpoints=checkpoints)
    outputs = {}
    diag_rows = []
    for surf in surfs:
        spot_ax = surf.spot_axes[0]
        name = f"rsurface_tau{surf.tau:g}.csv"
        rows = []
        for i, si in enumerate(spot_ax):
            for j, sj in enumerate(spot_ax):
                rows.append([surf.tau, si, sj, surf.values[i, j]])
        _write_csv(outdir / name, ["tau", "spot", "spot2", "cov"], rows)
        outputs[f"surface_tau{surf.tau:g}"] = name
        diag = extract_diagonal(surf)
        for s, v in zip(spot_ax, diag.values):
            diag_rows.append([surf.tau, s, v])
    _write_csv(outdir / "rdiag.csv", ["tau", "spot", "fluct_var"], diag_rows)
    outputs["diagonal"] = "rdiag.csv"
    return (outputs, {},
            [f"covariance solve {gs.n_space}^2 x {gs.n_time} steps, "
             f"{len(surfs)} checkpoints"], None)


def cmd_smile(cfg: RunConfig, outdir: Path):
    mp = cfg.market()
    ap = cfg.arbitrage()
    strikes = cfg.axis("smile", "strikes")
    source = _u_source(cfg, "smile", "u_source")
    points = smile_curve(mp.spot, mp.tau, strikes, mp.rate, mp.volatility,
                         ap, u_source=source, threads=cfg.threads())
    rows = [[p.strike, p.implied_vol, p.effective_price, p.converged]
            for p in points]
    _write_csv(outdir / "smile.csv",
               ["strike", "implied_vol", "effective_price", "converged"],
               rows)
    n_fail = sum(1 for p in points if not p.converged)
    checks = {"all_strikes_converged": n_fail == 0}
    return ({"smile": "smile.csv"}, checks,
            [f"smile over {len(points)} strikes, {n_fail} non-converged"],
            None)


def cmd_mc_validate(cfg: RunConfig, outdir: Path):
    mp = cfg.market()
    nm = cfg.noise()
    seed = cfg.seed()
    epsilons = cfg.axis("mc", "epsilons")
    n_paths = cfg.integer("mc", "n_paths")
    rows = []
    for eps in epsilons:
        st = ensemble_stats(mp, nm, eps, n_paths, seed)
        rows.append([st.epsilon, st.n_paths, st.mean_price,
                     st.var_scaled_residual, st.std_error])
    _write_csv(outdir / "mc_validate.csv",
               ["epsilon", "n_paths", "mean", "var_scaled", "stderr"], rows)
    bs = bs_call(mp).price
    summary = [f"bs_price {bs:.6f}"]
    for row in rows:
        summary.append(
            f"eps {row[0]:g}: mean {row[2]:.6f}  var_scaled {row[3]:.4f} "
            f"+- {row[4]:.4f}"
        )
    return {"mc_validate": "mc_validate.csv"}, {}, summary, seed


def cmd_noise_check(cfg: RunConfig, outdir: Path):
    nm = cfg.noise()
    seed = cfg.seed()
    epsilons = cfg.axis("noise_check", "epsilons")
    tau = cfg.number("noise_check", "tau", 1.0)
    n_paths = cfg.integer("noise_check", "n_paths")
    steps_per_corr = cfg.integer("noise_check", "steps_per_corr", 20)
    rows = []
    results = []
    for eps in epsilons:
        res = clt_variance_check(nm, eps, tau, n_paths, seed,
                                 steps_per_corr=steps_per_corr)
        results.append(res)
        rows.append([res.epsilon, res.tau, res.n_paths, res.mean,
                     res.mean_stderr, res.variance, res.target_variance,
                     res.ratio, res.ratio_ci_low, res.ratio_ci_high])
    _write_csv(outdir / "noise_check.csv",
               ["epsilon", "tau", "n_paths", "mean", "mean_stderr",
                "variance", "target", "ratio", "ci_low", "ci_high"], rows)
    outputs = {"noise_check": "noise_check.csv"}
    smallest = min(results, key=lambda r: r.epsilon)
    checks = {
        "ratio_within_3pct_at_smallest_epsilon":
            abs(smallest.ratio - 1.0) <= 0.03,
        "tolerance_ratio": 0.03,
    }
    if len(results) > 1:
        ordered = sorted(results, key=lambda r: r.epsilon, reverse=True)
        errs = [abs(r.ratio - 1.0) for r in ordered]
        checks["ratio_error_shrinks_with_epsilon"] = errs[-1] < errs[0]
    if cfg.boolean("noise_check", "dump_path", False):
        n_dump = cfg.integer("noise_check", "dump_steps", 1000)
        dt = min(1.0, nm.correlation_time) / steps_per_corr
        path = sample_path(nm, dt, n_dump, seed)
        _write_csv(outdir / "noise_path.csv", ["step", "value"],
                   [[i, v] for i, v in enumerate(path.values)])
        outputs["noise_path"] = "noise_path.csv"
    summary = [
        f"eps {r.epsilon:g}: ratio {r.ratio:.4f} "
        f"[{r.ratio_ci_low:.4f}, {r.ratio_ci_high:.4f}]"
        for r in results
    ]
    return outputs, checks, summary, seed


def cmd_xval(cfg: RunConfig, outdir: Path):
    mp = cfg.market()
    ap = cfg.arbitrage()
    k = mp.strike
    spots = (cfg.axis("xval", "spots") if "spots" in cfg.section("xval")
             else [0.5 * k, 0.75 * k, k, 1.35 * k, 1.75 * k])
    taus = (cfg.axis("xval", "taus") if "taus" in cfg.section("xval")
            else [0.25, 0.5, 1.0])
    rows = []
    checks: dict = {}
    # quadrature vs closed form
    worst_quad = 0.0
    for t in taus:
        for s in spots:
            uc = variance_u_closed_call(s, t, mp, ap)
            uq = variance_u(s, t, mp, ap, "quadrature")
            rel = abs(uq - uc) / max(abs(uc), 1e-300)
            worst_quad = max(worst_quad, rel)
            rows.append(["quad_vs_closed", t, s, uc, uq, rel])
    checks["quad_vs_closed_max_rel"] = worst_quad
    checks["quad_vs_closed_pass"] = worst_quad <= 1e-4
    # PDE diagonal vs closed form
    horizon = max(taus)
    probe = MarketParams(spot=mp.spot, strike=mp.strike, rate=mp.rate,
                         volatility=mp.volatility, tau=horizon)
    # xval pins its own resolution; the [grid] section is not consulted
    n_space = cfg.integer("xval", "n_space", 401)
    n_time = cfg.integer("xval", "n_time", 800)
    gs = GridSpec.for_market(probe, n_space, n_time, tau_max=horizon)
    surfs = solve_covariance_pde(probe, ap, gs, checkpoints=sorted(set(taus)))
    worst_pde = 0.0
    for surf in surfs:
        diag = extract_diagonal(surf)
        ax = diag.axes[0]
        for s in spots:
            uc = variance_u_closed_call(s, surf.tau, mp, ap)
            up = float(np.interp(math.log(s), ax, diag.values))
            rel = abs(up - uc) / max(abs(uc), 1e-300)
            worst_pde = max(worst_pde, rel)
            rows.append(["pde_vs_closed", surf.tau, s, uc, up, rel])
    checks["pde_vs_closed_max_rel"] = worst_pde
    checks["pde_vs_closed_pass"] = worst_pde <= 0.02
    # MC scaled-residual variance vs closed form
    seed = None
    n_paths = cfg.integer("xval", "n_paths", 20000)
    if n_paths > 0:
        nm = cfg.noise()
        seed = cfg.seed()
        eps_mc = cfg.number("xval", "epsilon_mc", 0.01)
        st = ensemble_stats(mp, nm, eps_mc, n_paths, seed)
        uc = variance_u_closed_call(mp.spot, mp.tau, mp, ap)
        rel = abs(st.var_scaled_residual - uc) / max(abs(uc), 1e-300)
        rows.append(["mc_vs_closed", mp.tau, mp.spot, uc,
                     st.var_scaled_residual, rel])
        tol = 0.05 if eps_mc <= 0.01 else 0.15
        checks["mc_vs_closed_rel"] = rel
        checks["mc_vs_closed_tolerance"] = tol
        checks["mc_vs_closed_pass"] = rel <= tol
    _write_csv(outdir / "xval.csv",
               ["check", "tau", "spot", "reference", "computed", "rel_err"],
               rows)
    summary = [f"{name}: {checks[name]}" for name in sorted(checks)]
    return {"xval": "xval.csv"}, checks, summary, seed


_COMMANDS = {
    "price": cmd_price,
    "band": cmd_band,
    "usurface": cmd_usurface,
    "covpde": cmd_covpde,
    "smile": cmd_smile,
    "mc-validate": cmd_mc_validate,
    "noise-check": cmd_noise_check,
    "xval": cmd_xval,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="arbbands",
        description=("Pricing bands and implied-volatility skews for "
                     "European calls under a randomly perturbed short rate"),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML config file")
        p.add_argument("--output-dir", default=None,
                       help="artifact directory (default: run.output_dir "
                            "from the config, else the current directory)")
        p.add_argument("--seed", type=int, default=None,
                       help="override run.seed from the config")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            raw = dict(cfg.raw)
            raw["run"] = dict(raw.get("run", {}), seed=args.seed)
            cfg = RunConfig(raw=raw, path=cfg.path)
        outdir = Path(args.output_dir or cfg.output_dir())
        try:
            outdir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create output dir {outdir}: {exc}")
        outputs, checks, summary, seed = _COMMANDS[args.command](cfg, outdir)
        manifest = _write_manifest(outdir, args.command, cfg, outputs,
                                   checks, seed)
        for line in summary:
            print(line)
        print(f"wrote {', '.join(sorted(outputs.values()))} and "
              f"{manifest.name} to {outdir}")
        return 0
    except ArbBandsError as exc:
        for klass, code in _EXIT_CODES:
            if isinstance(exc, klass):
                print(f"arbbands: {klass.__name__}: {exc}", file=sys.stderr)
                return code
        print(f"arbbands: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
