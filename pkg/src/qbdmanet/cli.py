"""Command line: analyze, simulate, validate, sweep, oracle.

Exit codes: 0 success, 1 a validation/oracle/shape check failed, 2 bad
configuration or usage (including an unstable load).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .metrics import summarize
from .params import (MOBILITY_MODELS, OUTPUT_DIR_ENV, Config, ConfigError, ParameterError,
                     RunSettings, build_params, load_config)
from .probabilities import StabilityError, compute_table
from .qbd import capacity, expected_delay
from .oracles import slot_oracle
from .runner import simulate

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class UsageError(Exception):
    pass


# -- argument helpers -----------------------------------------------------------

def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _grid(text: str) -> list[float]:
    """``lo:hi:points[:lin]`` (geometric by default) or a comma list."""
    if ":" not in text:
        return _floats(text)
    parts = text.split(":")
    if len(parts) not in (3, 4):
        raise UsageError(f"bad grid {text!r}; expected lo:hi:points[:lin|geom]")
    lo, hi, pts = float(parts[0]), float(parts[1]), int(parts[2])
    if pts < 1:
        return []
    geometric = len(parts) == 3 or parts[3] == "geom"
    if len(parts) == 4 and parts[3] not in ("lin", "geom"):
        raise UsageError(f"bad grid spacing {parts[3]!r}")
    return ex.q_grid(lo, hi, pts, geometric).tolist()


def _add_network_args(p: argparse.ArgumentParser, load: bool = True):
    p.add_argument("--config", type=Path, help="JSON config file; flags below override it")
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--q", type=float)
    p.add_argument("--delta", type=float)
    if load:
        g = p.add_mutually_exclusive_group()
        g.add_argument("--lambda", dest="lam", type=float, help="per-node arrival rate")
        g.add_argument("--rho", type=float, help="load as a fraction of capacity")


def _add_run_args(p: argparse.ArgumentParser):
    p.add_argument("--mobility", choices=MOBILITY_MODELS)
    p.add_argument("--slots", type=int)
    p.add_argument("--warmup", type=int)
    p.add_argument("--replications", type=int)
    p.add_argument("--seed", type=int, help="overrides the config seed")
    p.add_argument("--out", type=Path, help=f"output directory (default ${OUTPUT_DIR_ENV} or ./results)")


def _config(args, need_load: bool) -> Config:
    base = load_config(args.config) if args.config else None
    def pick(flag, fallback):
        return flag if flag is not None else fallback
    bp = base.params if base else None
    n = pick(args.n, bp.n if bp else None)
    m = pick(args.m, bp.m if bp else None)
    q = pick(args.q, bp.q if bp else None)
    if n is None or m is None or q is None:
        raise ConfigError("n, m and q are required (via --config or --n/--m/--q)")
    delta = pick(args.delta, bp.delta if bp else 1.0)
    lam, rho = (bp.lam, base.rho) if base else (None, None)
    if getattr(args, "lam", None) is not None:
        lam, rho = args.lam, None
    if getattr(args, "rho", None) is not None:
        lam, rho = None, args.rho
    try:
        params = build_params(n, m, q, delta, lam)
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc
    settings = base.settings if base else RunSettings()
    over = {}
    for flag, key in (("mobility", "mobility"), ("slots", "slots"), ("warmup", "warmup_slots"),
                      ("replications", "replications"), ("seed", "seed")):
        if getattr(args, flag, None) is not None:
            over[key] = getattr(args, flag)
    if getattr(args, "out", None) is not None:
        over["output_dir"] = str(args.out)
    if over:
        settings = RunSettings(**{**settings.__dict__, **over})
    cfg = Config(params, settings, rho)
    if need_load and lam is None and rho is None:
        raise ConfigError("an arrival rate is required (--lambda or --rho)")
    return cfg


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, default=_json_default))


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def _clean(x):
    return None if isinstance(x, float) and math.isnan(x) else x


# -- subcommands ----------------------------------------------------------------

def cmd_analyze(args) -> int:
    cfg = _config(args, need_load=False)
    params = cfg.params
    if params.lam is None and cfg.rho is None:
        mu, mu_s, mu_d = capacity(params)
        record = {"params": {"n": params.n, "m": params.m, "q": params.q, "delta": params.delta,
                             "alpha": params.alpha},
                  "mu": mu, "mu_s": mu_s, "mu_d": mu_d}
    else:
        record = expected_delay(cfg.resolved_params()).to_record()
        if args.table:
            compute_table(cfg.resolved_params()).to_csv(args.table)
    _emit(record)
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _config(args, need_load=True)
    params, st = cfg.resolved_params(), cfg.settings
    out = st.resolved_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    runs = []
    children = np.random.SeedSequence(st.seed).spawn(st.replications)
    for k, child in enumerate(children):
        trace = simulate(params, st.mobility, st.slots, st.warmup_slots, child, engine=args.engine)
        trace.write_csv(out / f"packets_rep{k:02d}.csv")
        runs.append(trace.metrics())
    s = summarize(runs)
    record = {"params": {"n": params.n, "m": params.m, "q": params.q, "delta": params.delta,
                         "lambda": params.lam},
              "mobility": st.mobility, "seed": st.seed, **s.to_record(),
              "replication_means": s.replication_means}
    (out / "summary.json").write_text(json.dumps(record, indent=2, default=_json_default) + "\n")
    _emit(record)
    if not s.ci_available:
        print("note: fewer than 2 replications, no confidence interval", file=sys.stderr)
    return EXIT_OK


def _fig7_rows(rho: float = 0.5, n_values=(80, 300, 500), m: int = 16, points: int = 20):
    qs = ex.q_grid(points=points)
    curve = ex.delay_vs_q(n_values, m, rho, qs)
    verdicts = []
    for n in n_values:
        d = [r["expected_delay_slots"] for r in curve if r["n"] == n]
        ok = ex.single_turn(d, "valley")
        k = int(np.argmin(d))
        verdicts.append({"scenario": f"fig7-sweep:n={n},m={m},rho={rho:g},q*={qs[k]:.4g}",
                         "theory_delay": d[k], "sim_delay": "", "ci95": "", "rel_err": "",
                         "pass": str(ok).lower()})
    return curve, verdicts


def cmd_validate(args) -> int:
    out = Path(args.out) if args.out else RunSettings().resolved_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    failed = False
    for name in args.campaign:
        if name == "fig7-sweep":
            curve, rows = _fig7_rows()
            ex.write_rows(curve, out / "fig7_sweep_curve.csv")
            ex.write_rows(rows, out / "validate_fig7-sweep.csv")
            for r in rows:
                print(f"{r['scenario']}: min E(Te)={r['theory_delay']:.1f} u-shaped={r['pass']}")
            failed |= any(r["pass"] != "true" for r in rows)
            continue
        scenarios = ex.CAMPAIGNS[name]()

        def show(row):
            verdict = {True: "PASS", False: "FAIL", None: "----"}[row.passed]
            print(f"{verdict} {row.scenario}: theory={row.theory_delay:.1f} "
                  f"sim={row.sim_delay:.1f}±{row.ci95:.1f} rel={row.rel_err:.3%}", flush=True)

        rows = ex.validate(scenarios, args.slots, args.warmup, args.replications, args.seed,
                           args.workers, progress=show)
        ex.write_rows(rows, out / f"validate_{name}.csv")
        failed |= any(r.passed is False for r in rows)
    return EXIT_FAIL if failed else EXIT_OK


def cmd_sweep(args) -> int:
    kind = args.kind
    ns = _ints(args.n) if args.n else []
    qs = _grid(args.q) if args.q else []
    rhos = _grid(args.rho) if args.rho else []
    loads = _floats(args.loads) if args.loads else []
    need = {"capacity-vs-q": (ns, qs), "delay-vs-q": (ns, qs), "delay-vs-rho": (ns, rhos),
            "throughput-vs-lambda": (ns, loads)}[kind]
    if not all(need):
        raise UsageError(f"sweep {kind}: empty parameter grid")
    if kind == "capacity-vs-q":
        rows = ex.capacity_vs_q(ns, args.m, qs, args.delta)
        key, shape = "mu", "peak"
    elif kind == "delay-vs-q":
        rows = ex.delay_vs_q(ns, args.m, args.rho_fixed, qs, args.delta)
        key, shape = "expected_delay_slots", "valley"
    elif kind == "delay-vs-rho":
        if args.q_fixed is None:
            raise UsageError("delay-vs-rho needs --q-fixed")
        rows = [r for n in ns for r in ex.delay_vs_rho(n, args.m, args.q_fixed, rhos, args.delta)]
        key, shape = "expected_delay_slots", None
    else:
        if args.q_fixed is None:
            raise UsageError("throughput-vs-lambda needs --q-fixed")
        rows = [r for n in ns for r in ex.throughput_vs_lambda(
            build_params(n, args.m, args.q_fixed, args.delta), loads, args.slots, args.warmup,
            args.replications, args.seed)]
        key, shape = "throughput", None
    dest = args.out or RunSettings().resolved_output_dir() / f"sweep_{kind}.csv"
    Path(dest).parent.mkdir(parents=True, exist_ok=True)
    ex.write_rows(rows, dest)
    print(f"wrote {len(rows)} rows to {dest}")
    if args.check_shape:
        if shape is None:
            raise UsageError(f"--check-shape is not defined for {kind}")
        bad = [n for n in ns if not ex.single_turn([r[key] for r in rows if r["n"] == n], shape)]
        for n in ns:
            print(f"n={n}: {'ok' if n not in bad else 'FAIL'} ({shape})")
        return EXIT_FAIL if bad else EXIT_OK
    return EXIT_OK


def cmd_oracle(args) -> int:
    cfg = _config(args, need_load=True)
    params = cfg.resolved_params()
    seed = args.seed if args.seed is not None else cfg.settings.seed
    checks = slot_oracle(params, args.trials, seed)
    bad = 0
    for c in checks:
        mark = "ok  " if c.passed else "FAIL"
        bad += not c.passed
        print(f"{mark} {c.label():<12} analytic={c.analytic:.6g} empirical={c.empirical:.6g} z={c.z:+.2f}")
    print(f"{len(checks) - bad}/{len(checks)} within 3 standard errors")
    return EXIT_FAIL if bad else EXIT_OK


# -- entry point ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qbdmanet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="capacity and expected delay from the QBD model")
    _add_network_args(p)
    p.add_argument("--table", type=Path, help="also write the per-j probability table as CSV")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="replicated simulation; packet CSVs plus summary.json")
    _add_network_args(p)
    _add_run_args(p)
    p.add_argument("--engine", choices=("fast", "reference"), default="fast")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("validate", help="theory vs simulation campaigns")
    p.add_argument("--campaign", nargs="+", default=["fig4-mini"],
                   choices=[*ex.CAMPAIGNS, "fig7-sweep"])
    p.add_argument("--slots", type=int, default=ex.DESK_SLOTS)
    p.add_argument("--warmup", type=int, default=ex.DESK_WARMUP)
    p.add_argument("--replications", type=int, default=ex.DESK_REPLICATIONS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("sweep", help="parameter grids written as CSV")
    p.add_argument("--kind", required=True,
                   choices=["capacity-vs-q", "delay-vs-q", "delay-vs-rho", "throughput-vs-lambda"])
    p.add_argument("--n", help="comma list of node counts")
    p.add_argument("--m", type=int, default=16)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--q", help="q grid: comma list or lo:hi:points[:lin]")
    p.add_argument("--q-fixed", type=float)
    p.add_argument("--rho", help="rho grid: comma list or lo:hi:points[:lin]")
    p.add_argument("--rho-fixed", type=float, default=0.5)
    p.add_argument("--loads", help="lambda/mu multiples for throughput-vs-lambda")
    p.add_argument("--slots", type=int, default=ex.DESK_SLOTS)
    p.add_argument("--warmup", type=int, default=ex.DESK_WARMUP)
    p.add_argument("--replications", type=int, default=ex.DESK_REPLICATIONS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--check-shape", action="store_true",
                   help="exit 1 unless each curve turns exactly once")
    p.add_argument("--out", type=Path, help="CSV path")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("oracle", help="Monte-Carlo single-slot check of the closed forms")
    _add_network_args(p)
    p.add_argument("--trials", type=int, default=1_000_000)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"qbdmanet {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, ParameterError, StabilityError) as exc:
        print(f"qbdmanet {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
