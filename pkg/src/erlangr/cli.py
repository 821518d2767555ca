"""Command-line interface.

Subcommands: analyze (exact stationary measures), limits (diffusion-limit
constants), dimension (square-root capacity for a delay target), simulate
(discrete-event studies from a JSON config), mol (time-varying staffing
schedule), tables (regenerate reference tables and plot-ready CSVs).

Exit codes: 0 ok, 1 usage/input error, 2 unstable model, 3 infeasible
target, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import importlib.resources
import json
import math
import os
import sys
import warnings
from pathlib import Path
from typing import Optional

import numpy as np

from .blocking import perf_blocking, stationary_blocking
from .dimensioning import dimension_blocking, dimension_holding, holding_approx, solve_alpha
from .errors import (
    DomainError,
    InfeasibleTarget,
    NoConvergence,
    NotStable,
    ScheduleGap,
    SingularSystem,
)
from .model import (
    CapacityPair,
    ModelParams,
    PerformanceReport,
    QedPair,
    derive_loads,
    qed_capacity,
)
from .mol import ArrivalProfile, integrate_offered_load, mol_schedule
from .qbd import build_qbd_blocks, perf_holding, rho_max, solve_rate_matrix, stationary_holding
from .qed import limits_blocking, loss_model_limits
from .sim import SimConfig, simulate, time_varying_simulate

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_UNSTABLE = 2
EXIT_INFEASIBLE = 3
EXIT_NUMERICAL = 4


def _fmt(x: float) -> str:
    return f"{x:.10g}"


def _json_num(x: float):
    return None if (x is None or (isinstance(x, float) and math.isnan(x))) else float(_fmt(x))


def _report_dict(rep: PerformanceReport) -> dict:
    return {
        "p_delay": _json_num(rep.p_delay),
        "p_boundary": _json_num(rep.p_boundary),
        "e_wait": _json_num(rep.e_wait),
        "e_holding_queue": _json_num(rep.e_holding_queue),
        "rho_s": _json_num(rep.rho_s),
        "rho_n": _json_num(rep.rho_n),
    }


def _emit(payload: dict, fmt: str, output: Optional[str]) -> None:
    if fmt == "json":
        text = json.dumps(payload, indent=2, allow_nan=False) + "\n"
    else:
        lines = ["key,value"]

        def flatten(prefix: str, obj) -> None:
            if isinstance(obj, dict):
                for key, val in obj.items():
                    flatten(f"{prefix}{key}." if prefix else f"{key}.", val) if isinstance(
                        val, dict
                    ) else flatten_leaf(f"{prefix}{key}", val)
            else:
                flatten_leaf(prefix.rstrip("."), obj)

        def flatten_leaf(key: str, val) -> None:
            if isinstance(val, float):
                lines.append(f"{key},{_fmt(val)}")
            else:
                lines.append(f"{key},{val}")

        flatten("", payload)
        text = "\n".join(lines) + "\n"
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _params_from_args(args) -> ModelParams:
    return ModelParams(lam=args.lam, mu=args.mu, delta=args.delta, p=args.p)


def _add_param_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--lambda", dest="lam", type=float, required=True, help="arrival rate")
    sub.add_argument("--mu", type=float, required=True, help="service rate")
    sub.add_argument("--delta", type=float, required=True, help="content-phase rate")
    sub.add_argument("--p", type=float, required=True, help="return probability")


def _add_output_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--format", choices=("json", "csv"), default="json")
    sub.add_argument("--output", help="write to this path instead of stdout")


def cmd_analyze(args) -> int:
    params = _params_from_args(args)
    cap = CapacityPair(s=args.s, n=args.n)
    if cap.s > cap.n:
        print(
            f"warning: s={cap.s} exceeds n={cap.n}; the extra servers can never all be busy",
            file=sys.stderr,
        )
    if args.model == "blocking":
        rep = perf_blocking(stationary_blocking(params, cap))
    else:
        try:
            blocks = build_qbd_blocks(params, cap)
            g = solve_rate_matrix(blocks)
            rep = perf_holding(stationary_holding(blocks, g))
        except NotStable as exc:
            print(
                f"not stable: rho={_fmt(exc.rho)} >= rho_max={_fmt(exc.rho_max)}",
                file=sys.stderr,
            )
            return EXIT_UNSTABLE
    payload = {
        "kind": "report",
        "model": args.model,
        "params": {"lambda": params.lam, "mu": params.mu, "delta": params.delta, "p": params.p},
        "s": cap.s,
        "n": cap.n,
        "report": _report_dict(rep),
    }
    _emit(payload, args.format, args.output)
    return EXIT_OK


def cmd_limits(args) -> int:
    if args.loss:
        g, f = loss_model_limits(args.beta, args.gamma)
        _emit(
            {"kind": "loss_limits", "beta": args.beta, "gamma": args.gamma,
             "g_loss": _json_num(g), "f_loss": _json_num(f)},
            args.format, args.output,
        )
        return EXIT_OK
    if args.r is None:
        raise DomainError("--r is required unless --loss is given")
    if args.r >= 1.0:
        raise DomainError("r must lie in (0, 1); for r = 1 use --loss")
    pair = QedPair(beta=args.beta, gamma=args.gamma)
    g_b, f_b, h_b = limits_blocking(args.beta, args.gamma, args.r, args.mu)
    sol = solve_alpha(pair, args.r)
    g_h, h_h = holding_approx(pair, args.r, args.mu)
    payload = {
        "kind": "limits",
        "beta": args.beta, "gamma": args.gamma, "r": args.r, "mu": args.mu,
        "g_blocking": _json_num(g_b), "f_blocking": _json_num(f_b), "h_blocking": _json_num(h_b),
        "g_holding": _json_num(g_h), "h_holding": _json_num(h_h), "alpha": _json_num(sol.alpha),
    }
    _emit(payload, args.format, args.output)
    return EXIT_OK


def cmd_dimension(args) -> int:
    params = _params_from_args(args)
    loads = derive_loads(params)
    pins = {"beta": args.beta, "gamma": args.gamma, "n": args.n}
    given = [k for k, v in pins.items() if v is not None]
    if len(given) != 1:
        raise DomainError("pin exactly one of --beta, --gamma, --n")
    if args.mode == "blocking":
        if args.n is not None:
            raise DomainError("--n pinning is only available in holding mode")
        result = dimension_blocking(
            args.epsilon, loads, beta=args.beta, gamma=args.gamma, mu=params.mu
        )
    else:
        result = dimension_holding(
            args.epsilon, params, beta=args.beta, gamma=args.gamma, n=args.n
        )
    if result.cap.s > result.cap.n:
        print(
            f"warning: s={result.cap.s} exceeds n={result.cap.n}",
            file=sys.stderr,
        )
    payload = {
        "kind": "dimension",
        "mode": args.mode,
        "epsilon": args.epsilon,
        "s": result.cap.s,
        "n": result.cap.n,
        "beta": _json_num(result.pair.beta),
        "gamma": _json_num(result.pair.gamma),
        "star_beta": _json_num(result.star_pair.beta),
        "star_gamma": _json_num(result.star_pair.gamma),
        "alpha": _json_num(result.alpha),
        "predicted": _report_dict(result.predicted),
    }
    _emit(payload, args.format, args.output)
    return EXIT_OK


def _load_profile(spec: object) -> ArrivalProfile:
    if isinstance(spec, dict):
        return ArrivalProfile(
            breakpoints=tuple(spec["breakpoints"]),
            rates=tuple(spec["rates"]),
            period=spec.get("period"),
        )
    name = str(spec)
    path = Path(name)
    if path.exists():
        with path.open() as fp:
            return ArrivalProfile.from_json(fp)
    bundled = importlib.resources.files("erlangr").joinpath(f"data/{name}.json")
    if bundled.is_file():
        with bundled.open() as fp:
            return ArrivalProfile.from_json(fp)
    raise DomainError(f"profile {name!r}: no such file or bundled profile")


def _simresult_payload(res, model: str, seed) -> dict:
    strata = res.visit_strata
    return {
        "kind": "simresult",
        "model": model,
        "backend": res.backend,
        "replications": res.replications,
        "seed": seed,
        "estimates": {
            name: {"mean": _json_num(mean), "half_width": _json_num(hw)}
            for name, (mean, hw) in res.estimates.items()
        },
        "visit_strata": {
            "counts": [float(c) for c in strata.counts],
            "mean_hold": [_json_num(x) for x in strata.mean_hold],
            "mean_needy": [_json_num(x) for x in strata.mean_needy],
            "mean_total": [_json_num(x) for x in strata.mean_total],
        },
    }


def cmd_simulate(args) -> int:
    with open(args.config) as fp:
        conf = json.load(fp)
    params = ModelParams(
        lam=conf["params"]["lam"], mu=conf["params"]["mu"],
        delta=conf["params"]["delta"], p=conf["params"]["p"],
    )
    seed = conf.get("seed")
    env_seed = os.environ.get("ERLANGR_SEED")
    if args.seed is not None:
        seed = args.seed
    if env_seed is not None:
        seed = int(env_seed)
    cfg = SimConfig(
        horizon=conf["horizon"],
        warmup=conf.get("warmup"),
        replications=conf.get("replications", 1),
        seed=seed,
        model=conf["model"],
        record_paths=conf.get("record_paths", False),
    )
    if conf.get("time_varying"):
        profile = _load_profile(conf["profile"])
        pair = QedPair(beta=conf["beta"], gamma=conf["gamma"])
        traj = integrate_offered_load(params=params, profile=profile, horizon=cfg.horizon)
        schedule = mol_schedule(traj, pair, interval=conf.get("interval", 0.5))
        res = time_varying_simulate(profile, schedule, params, cfg)
    else:
        cap = CapacityPair(s=conf["s"], n=conf["n"])
        res = simulate(params, cap, cfg)
    payload = _simresult_payload(res, conf["model"], seed)
    _emit(payload, args.format, args.output)
    base = Path(args.output).with_suffix("") if args.output else None
    if res.time_series is not None and base is not None:
        with open(f"{base}_timeseries.csv", "w") as fp:
            res.export_time_series_csv(fp)
    if res.event_log is not None and base is not None:
        with open(f"{base}_events.csv", "w") as fp:
            res.export_event_log_csv(fp)
    return EXIT_OK


def cmd_mol(args) -> int:
    params = _params_from_args(args)
    profile = _load_profile(args.profile)
    traj = integrate_offered_load(profile, params, horizon=args.horizon, step=args.step)
    schedule = mol_schedule(traj, QedPair(beta=args.beta, gamma=args.gamma), interval=args.interval)
    if args.output:
        with open(args.output, "w") as fp:
            schedule.export_csv(fp)
    else:
        schedule.export_csv(sys.stdout)
    return EXIT_OK


def _tables_limits(outdir: Path) -> None:
    cases = {1: 0.10, 2: 0.25, 3: 0.50}
    with (outdir / "limit_tables.csv").open("w") as fp:
        fp.write("case,r,beta,gamma,g_blocking,f_blocking,h_blocking,g_holding,h_holding\n")
        for case, r in cases.items():
            for beta in (1.0, 2.0):
                for gamma in (1.0, 2.0):
                    g, f, h = limits_blocking(beta, gamma, r)
                    g_h, h_h = holding_approx(QedPair(beta=beta, gamma=gamma), r)
                    fp.write(
                        f"{case},{r},{beta},{gamma},{_fmt(g)},{_fmt(f)},{_fmt(h)},"
                        f"{_fmt(g_h)},{_fmt(h_h)}\n"
                    )


def _tables_convergence(outdir: Path) -> None:
    cases = {1: 0.10, 2: 0.25, 3: 0.50}
    with (outdir / "exact_convergence.csv").open("w") as fp:
        fp.write("case,r,beta,gamma,r1,s,n,p_delay,scaled_block,scaled_wait,g,f,h\n")
        for case, r in cases.items():
            beta = gamma = 1.0
            g, f, h = limits_blocking(beta, gamma, r)
            for r1 in (10.0, 25.0, 50.0, 100.0, 250.0):
                mu, p = 1.0, 0.75
                delta = r * p * mu / (1.0 - r)
                lam = r1 * (1.0 - p) * mu
                params = ModelParams(lam=lam, mu=mu, delta=delta, p=p)
                cap = qed_capacity(r1, r, QedPair(beta=beta, gamma=gamma))
                rep = perf_blocking(stationary_blocking(params, cap))
                sq = math.sqrt(r1)
                fp.write(
                    f"{case},{r},{beta},{gamma},{r1},{cap.s},{cap.n},{_fmt(rep.p_delay)},"
                    f"{_fmt(rep.p_boundary * sq)},{_fmt(rep.e_wait * sq)},"
                    f"{_fmt(g)},{_fmt(f)},{_fmt(h)}\n"
                )


def _tables_rho_max(outdir: Path) -> None:
    params = ModelParams(lam=2.0, mu=1.0, delta=0.25, p=0.75)
    with (outdir / "fig_rho_max.csv").open("w") as fp:
        fp.write("n,s,rho_max,r_max\n")
        for n in (20, 40, 80):
            for s in range(1, n + 1):
                rm, r_max = rho_max(params, CapacityPair(s=s, n=n))
                fp.write(f"{n},{s},{_fmt(rm)},{_fmt(r_max)}\n")


def _tables_sample_path(outdir: Path) -> None:
    params = ModelParams(lam=2.0, mu=1.0, delta=0.25, p=0.75)
    cap = CapacityPair(s=11, n=37)
    cfg = SimConfig(horizon=500.0, warmup=0.0, replications=1, seed=11, model="holding",
                    record_paths=True)
    res = simulate(params, cap, cfg)
    with (outdir / "fig_sample_path.csv").open("w") as fp:
        res.export_time_series_csv(fp)


def _tables_ordering(outdir: Path) -> None:
    from .sim import ordering_experiment

    params = ModelParams(lam=5.0, mu=1.0, delta=0.2, p=0.8)
    loads = derive_loads(params)
    cap = qed_capacity(loads.r1, loads.r, QedPair(beta=0.5, gamma=0.5))
    cfg = SimConfig(horizon=4000.0, warmup=400.0, replications=4, seed=17)
    report = ordering_experiment(params, cap, cfg)
    with (outdir / "fig_ordering.csv").open("w") as fp:
        fp.write("model,k,survival_census,survival_q1\n")
        for model in ("blocking", "holding", "closed_ward"):
            sc = report.survival_census[model]
            sq = report.survival_q1[model]
            for k in range(len(sc)):
                fp.write(f"{model},{k},{_fmt(float(sc[k]))},{_fmt(float(sq[k]))}\n")


def _tables_dimensioning(outdir: Path) -> None:
    params = ModelParams(lam=0.32, mu=4.0, delta=0.4, p=0.975)
    loads = derive_loads(params)
    with (outdir / "fig_dimensioning.csv").open("w") as fp:
        fp.write("epsilon,mode,s,n,beta,gamma\n")
        for eps in (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8):
            res_b = dimension_blocking(eps, loads, gamma=1.0, mu=params.mu)
            res_h = dimension_holding(eps, params, gamma=1.0)
            for mode, res in (("blocking", res_b), ("holding", res_h)):
                fp.write(
                    f"{eps},{mode},{res.cap.s},{res.cap.n},"
                    f"{_fmt(res.pair.beta)},{_fmt(res.pair.gamma)}\n"
                )


def _tables_visit_strata(outdir: Path) -> None:
    params = ModelParams(lam=2.0, mu=1.0, delta=0.25, p=0.75)
    with (outdir / "fig_visit_strata.csv").open("w") as fp:
        fp.write("n,visits,count,mean_hold,mean_needy,mean_total\n")
        for n in (34, 40, 46, 52, 58):
            cfg = SimConfig(horizon=30000.0, warmup=3000.0, replications=4, seed=23,
                            model="holding", n_strata=12)
            res = simulate(params, CapacityPair(s=9, n=n), cfg)
            st = res.visit_strata
            for k in range(1, 13):
                if st.counts[k] > 0:
                    fp.write(
                        f"{n},{k},{int(st.counts[k])},{_fmt(float(st.mean_hold[k]))},"
                        f"{_fmt(float(st.mean_needy[k]))},{_fmt(float(st.mean_total[k]))}\n"
                    )


def _tables_mol(outdir: Path) -> None:
    params = ModelParams(lam=1.0, mu=6.67, delta=2.18, p=0.76)
    profile = _load_profile("ed_day_profile")
    traj = integrate_offered_load(profile, params, horizon=24.0)
    schedule = mol_schedule(traj, QedPair(beta=0.5, gamma=0.5), interval=0.5)
    with (outdir / "fig_mol_loads.csv").open("w") as fp:
        fp.write("t,lambda,r1,r2,total\n")
        for t, r1, r2 in zip(traj.grid[::50], traj.r1_t[::50], traj.r2_t[::50]):
            fp.write(f"{_fmt(float(t))},{_fmt(profile.rate(float(t)))},"
                     f"{_fmt(float(r1))},{_fmt(float(r2))},{_fmt(float(r1 + r2))}\n")
    with (outdir / "fig_mol_schedule.csv").open("w") as fp:
        schedule.export_csv(fp)
    cfg = SimConfig(horizon=24.0, warmup=0.0, replications=200, seed=29, model="holding")
    res = time_varying_simulate(profile, schedule, params, cfg)
    with (outdir / "fig_mol_stabilization.csv").open("w") as fp:
        res.export_time_series_csv(fp)


def cmd_tables(args) -> int:
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    _tables_limits(outdir)
    _tables_convergence(outdir)
    _tables_rho_max(outdir)
    _tables_dimensioning(outdir)
    if not args.no_sim:
        _tables_sample_path(outdir)
        _tables_ordering(outdir)
        _tables_visit_strata(outdir)
        _tables_mol(outdir)
    print(f"tables written to {outdir}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="erlangr",
        description="Finite-capacity many-server queues with returning customers",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_an = sub.add_parser("analyze", help="exact stationary performance measures")
    p_an.add_argument("--model", choices=("blocking", "holding"), required=True)
    _add_param_flags(p_an)
    p_an.add_argument("--s", type=int, required=True)
    p_an.add_argument("--n", type=int, required=True)
    _add_output_flags(p_an)
    p_an.set_defaults(func=cmd_analyze)

    p_li = sub.add_parser("limits", help="diffusion-limit constants")
    p_li.add_argument("--beta", type=float, required=True)
    p_li.add_argument("--gamma", type=float, required=True)
    p_li.add_argument("--r", type=float)
    p_li.add_argument("--mu", type=float, default=1.0)
    p_li.add_argument("--loss", action="store_true", help="pure loss regime (r = 1)")
    _add_output_flags(p_li)
    p_li.set_defaults(func=cmd_limits)

    p_di = sub.add_parser("dimension", help="capacity for a delay-probability target")
    p_di.add_argument("--epsilon", type=float, required=True)
    p_di.add_argument("--mode", choices=("blocking", "holding"), default="blocking")
    _add_param_flags(p_di)
    p_di.add_argument("--beta", type=float, help="pin the staffing hedge")
    p_di.add_argument("--gamma", type=float, help="pin the bed hedge")
    p_di.add_argument("--n", type=int, help="pin the bed count (holding mode)")
    _add_output_flags(p_di)
    p_di.set_defaults(func=cmd_dimension)

    p_si = sub.add_parser("simulate", help="run a simulation study from a JSON config")
    p_si.add_argument("--config", required=True)
    p_si.add_argument("--seed", type=int, help="override the config seed")
    _add_output_flags(p_si)
    p_si.set_defaults(func=cmd_simulate)

    p_mo = sub.add_parser("mol", help="time-varying staffing schedule")
    p_mo.add_argument("--profile", required=True,
                      help="profile JSON path or bundled name (e.g. ed_day_profile)")
    _add_param_flags(p_mo)
    p_mo.add_argument("--beta", type=float, required=True)
    p_mo.add_argument("--gamma", type=float, required=True)
    p_mo.add_argument("--interval", type=float, default=0.5)
    p_mo.add_argument("--horizon", type=float, default=24.0)
    p_mo.add_argument("--step", type=float, default=0.01)
    p_mo.add_argument("--output")
    p_mo.set_defaults(func=cmd_mol)

    p_ta = sub.add_parser("tables", help="regenerate reference tables and figure CSVs")
    p_ta.add_argument("--outdir", required=True)
    p_ta.add_argument("--no-sim", action="store_true",
                      help="skip the simulation-based CSVs (faster)")
    p_ta.set_defaults(func=cmd_tables)
    return parser


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except NotStable as exc:
        print(f"not stable: rho={_fmt(exc.rho)} >= rho_max={_fmt(exc.rho_max)}", file=sys.stderr)
        return EXIT_UNSTABLE
    except InfeasibleTarget as exc:
        print(f"infeasible target: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (NoConvergence, SingularSystem) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DomainError, ScheduleGap, FileNotFoundError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
