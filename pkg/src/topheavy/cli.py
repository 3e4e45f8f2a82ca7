"""Command line entry point: ``topheavy {optimize,fit,predict,simulate,bounds,validate}``.

Every subcommand accepts ``--config FILE.json``; keys are the long flag names
with dashes replaced by underscores, and explicit flags win over the file.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import baseball, contest_sim, gaussian_model, hockey, projections
from .exceptions import InputError

log = logging.getLogger("topheavy")

EXIT_OK, EXIT_INVALID, EXIT_INPUT = 0, 1, 2


def _write_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _csv_text(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerows(rows)
    return buf.getvalue()


def _sport(name):
    if name == "hockey":
        return hockey
    if name == "baseball":
        return baseball
    raise InputError(f"unknown sport {name!r}", "sport")


def _read_slate(args):
    path = Path(args.slate)
    if not path.is_file():
        raise InputError(f"slate file not found: {path}", "slate")
    return _sport(args.sport).read_slate(path)


def _build(sport, slate, stacking, gamma, M, time_budget, backend):
    if sport == "hockey":
        return hockey.build_hockey_portfolio(slate, stacking, gamma, M, time_budget, backend)
    return baseball.build_baseball_portfolio(slate, gamma, M, time_budget, backend)


def overlap_matrix(lineups) -> list[list[int]]:
    sets = [set(lu) for lu in lineups]
    return [[len(a & b) for b in sets] for a in sets]


# ---------------------------------------------------------------------------

def cmd_optimize(args) -> int:
    slate = _read_slate(args)
    mod = _sport(args.sport)
    gamma = mod.DEFAULT_GAMMA if args.gamma is None else args.gamma
    port = _build(args.sport, slate, args.stacking, gamma, args.lineups, args.time_budget, args.backend)
    buf = io.StringIO()
    mod.export_lineups(slate, port.lineups, buf)
    _write_text(args.out, buf.getvalue())
    manifest = {
        "sport": args.sport,
        "slate": str(args.slate),
        "stacking": args.stacking if args.sport == "hockey" else "pitcher+consecutive",
        "gamma": gamma,
        "requested": args.lineups,
        "produced": len(port),
        "lineups": [{"players": list(lu), "objective": obj, "status": st}
                    for lu, obj, st in zip(port.lineups, port.objectives, port.statuses)],
        "overlap": overlap_matrix(port.lineups),
        "notes": port.notes,
    }
    _write_text(args.manifest, json.dumps(manifest, indent=2) + "\n")
    for note in port.notes:
        log.warning(note)
    if not port.lineups:
        log.error("no feasible lineup: the first program is infeasible")
        return EXIT_INPUT
    print(f"wrote {len(port)} lineups to {args.out}")
    return EXIT_OK


def cmd_fit(args) -> int:
    records = projections.read_records(args.training)
    if args.positions:
        keep = {p.strip().upper() for p in args.positions.split(",")}
        records = [r for r in records if r.position in keep]
    feats = tuple(f.strip() for f in args.features.split(","))
    model = projections.LinearProjection(feats).fit_records(records)
    _write_text(args.out, json.dumps(model.to_json(), indent=2) + "\n")
    print(f"fit {len(records)} records, R^2={model.r2_:.4f}")
    return EXIT_OK


def _load_model(spec: str, default: str):
    if spec in ("default", "", None):
        return projections.default_model(default)
    if spec in projections.DEFAULTS:
        return projections.default_model(spec)
    if not Path(spec).is_file():
        raise InputError(f"model file not found: {spec}", "model")
    return projections.LinearProjection.from_json(spec)


def cmd_predict(args) -> int:
    records = projections.read_records(args.records)
    skater = _load_model(args.skater_model, "skater-default")
    goalie = _load_model(args.goalie_model, "goalie-default")
    pred = projections.project(records, skater, goalie)
    path = Path(args.slate)
    if not path.is_file():
        raise InputError(f"slate file not found: {path}", "slate")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fields = list(reader.fieldnames or [])
        rows = list(reader)
    if "player_id" not in fields:
        raise InputError("slate has no player_id column", "slate")
    if "proj_mean" not in fields:
        fields.append("proj_mean")
    missing = 0
    for r in rows:
        v = pred.get(r["player_id"].strip())
        if v is None:
            missing += 1
            r["proj_mean"] = ""
        else:
            r["proj_mean"] = repr(round(v, 6))
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    _write_text(args.out, buf.getvalue())
    if missing:
        log.warning("%d slate players had no projection record", missing)
    print(f"projected {len(rows) - missing} players into {args.out}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.draws < 1:
        raise InputError("draws must be positive", "draws")
    slate = _read_slate(args)
    mod = _sport(args.sport)
    gamma = mod.DEFAULT_GAMMA if args.gamma is None else args.gamma
    names = [s.strip() for s in args.strategies.split(",") if s.strip()]
    if not names:
        raise InputError("no strategies given", "strategies")
    strategies = {}
    for name in names:
        if args.sport == "hockey":
            port = hockey.build_hockey_portfolio(slate, name, gamma, args.lineups, args.time_budget, args.backend)
        elif name in ("stacked", "default"):
            port = baseball.build_baseball_portfolio(slate, gamma, args.lineups, args.time_budget, args.backend)
        else:
            raise InputError(f"baseball strategies are 'stacked' only, got {name!r}", "strategies")
        if not port.lineups:
            raise InputError(f"strategy {name!r} produced no lineups", "strategies")
        strategies[name] = port.lineups
    spec = contest_sim.CorrelationSpec(args.rho_line, args.rho_team, args.rho_goalie, args.stdev_scale)
    payoff = contest_sim.PayoffTable.read_csv(args.payoff, args.entry_fee) if args.payoff else None
    comp = contest_sim.compare_strategies(slate, strategies, spec, args.draws, payoff, args.seed,
                                          population_size=args.population)
    _write_text(args.out_json, comp.to_json())
    if args.out_csv:
        _write_text(args.out_csv, comp.to_csv())
    for name, s in comp.strategies.items():
        lo, hi = s["p_beat_field_max_ci95"]
        print(f"{name}: P(beat field max)={s['p_beat_field_max']:.4f} [{lo:.4f}, {hi:.4f}] "
              f"mean profit margin={s['mean_profit_margin']:+.3f}")
    return EXIT_OK


def _float_list(text, field):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InputError(f"not a list of numbers: {text!r}", field) from None
    if not vals:
        raise InputError("empty grid", field)
    return vals


def cmd_bounds(args) -> int:
    zs = _float_list(args.z, "z")
    rows = [("z", "lower", "exact", "upper")]
    for b in gaussian_model.bounds_table(zs):
        rows.append((repr(b.z), repr(b.lower), repr(b.exact), repr(b.upper)))
    _write_text(args.out, _csv_text(rows))
    if args.pairs_out:
        rhos = _float_list(args.rho, "rho")
        prow = [("rho", "z", "chernoff", "exact", "floored")]
        for rho in rhos:
            for z in zs:
                jt = gaussian_model.joint_tail(0.0, 0.0, 1.0, 1.0, rho, z)
                exact = gaussian_model.bivariate_tail(z, z, rho)
                prow.append((repr(rho), repr(z), repr(jt.bound), repr(exact), int(jt.floored)))
        _write_text(args.pairs_out, _csv_text(prow))
    print(f"wrote {len(zs)} rows to {args.out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    slate = _read_slate(args)
    mod = _sport(args.sport)
    gamma = mod.DEFAULT_GAMMA if args.gamma is None else args.gamma
    if not Path(args.lineups).is_file():
        raise InputError(f"lineup file not found: {args.lineups}", "lineups")
    with open(args.lineups, newline="", encoding="utf-8") as fh:
        lineups = hockey.read_lineups(fh)
    bad = 0
    for i, lu in enumerate(lineups):
        if args.sport == "hockey":
            errs = hockey.check_lineup(slate, lu, args.stacking, lineups[:i], gamma)
        else:
            errs = baseball.check_lineup(slate, lu, True, lineups[:i], gamma)
        for e in errs:
            print(f"lineup {i + 1}: {e}")
        bad += bool(errs)
    print(f"{len(lineups) - bad}/{len(lineups)} lineups valid")
    return EXIT_OK if bad == 0 else EXIT_INVALID


# ---------------------------------------------------------------------------

def _common(p, slate=True):
    p.add_argument("--config", help="JSON file of defaults for this command")
    if slate:
        p.add_argument("--sport", choices=("hockey", "baseball"), default="hockey")
        p.add_argument("--slate", help="slate CSV")


def _solver_flags(p):
    p.add_argument("--stacking", default="type4", help="hockey stacking type: none, type1..type5")
    p.add_argument("--gamma", type=int, default=None, help="max players shared by two lineups")
    p.add_argument("-M", "--lineups", type=int, default=100, help="number of lineups")
    p.add_argument("--time-budget", type=float, default=60.0, help="seconds per lineup")
    p.add_argument("--backend", choices=("builtin", "highs"), default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="topheavy", description=__doc__.splitlines()[0])
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize", help="build a lineup portfolio")
    _common(p)
    _solver_flags(p)
    p.add_argument("--seed", type=int, default=0, help="recorded for reproducibility")
    p.add_argument("--out", default="lineups.csv")
    p.add_argument("--manifest", default="manifest.json")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("fit", help="fit a projection regression")
    _common(p, slate=False)
    p.add_argument("--training", required=False, help="CSV player_id,position,f1,f2,win_prob,actual_points")
    p.add_argument("--features", default="f1,f2")
    p.add_argument("--positions", default="", help="comma list of positions to keep, e.g. G")
    p.add_argument("--out", default="model.json")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="write projected means into a slate")
    _common(p, slate=False)
    p.add_argument("--records", help="CSV player_id,position,f1,f2,win_prob")
    p.add_argument("--slate", help="slate CSV to augment")
    p.add_argument("--skater-model", default="default")
    p.add_argument("--goalie-model", default="default")
    p.add_argument("--out", default="slate_projected.csv")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("simulate", help="compare strategies in simulated contests")
    _common(p)
    _solver_flags(p)
    p.add_argument("--strategies", default="none,type4")
    p.add_argument("--draws", type=int, default=10_000)
    p.add_argument("--population", type=int, default=1000)
    p.add_argument("--payoff", help="CSV rank_from,rank_to,payout (default: synthetic top-heavy)")
    p.add_argument("--entry-fee", type=float, default=1.0)
    p.add_argument("--rho-line", type=float, default=0.15)
    p.add_argument("--rho-team", type=float, default=0.05)
    p.add_argument("--rho-goalie", type=float, default=-0.10)
    p.add_argument("--stdev-scale", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-json", default="report.json")
    p.add_argument("--out-csv", default=None)
    p.set_defaults(func=cmd_simulate, lineups=20)

    p = sub.add_parser("bounds", help="tabulate Gaussian tail bounds")
    _common(p, slate=False)
    p.add_argument("--z", default="0.1,0.5,1,2,3,5")
    p.add_argument("--rho", default="-0.5,0,0.5,0.9")
    p.add_argument("--out", default="bounds.csv")
    p.add_argument("--pairs-out", default=None)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("validate", help="check lineups against the rules")
    _common(p)
    p.add_argument("--lineups", help="lineup CSV in upload shape")
    p.add_argument("--stacking", default="none")
    p.add_argument("--gamma", type=int, default=None)
    p.set_defaults(func=cmd_validate)
    return parser


def _apply_config(parser, argv):
    """Parse once to find the subcommand and config, then reparse with file defaults."""
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    path = Path(args.config)
    if not path.is_file():
        raise InputError(f"config file not found: {path}", "config")
    with open(path) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise InputError("config must be a JSON object", "config")
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    subparser = sub.choices[args.command]
    known = {a.dest for a in subparser._actions}
    unknown = sorted(set(cfg) - known)
    if unknown:
        raise InputError(f"unknown keys {unknown}", "config")
    subparser.set_defaults(**cfg)
    return parser.parse_args(argv)


_REQUIRED = {
    "optimize": ("slate",), "simulate": ("slate",), "validate": ("slate", "lineups"),
    "fit": ("training",), "predict": ("records", "slate"),
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                            format="%(levelname)s %(message)s")
        for name in _REQUIRED.get(args.command, ()):
            if not getattr(args, name, None):
                raise InputError("required (flag or config)", f"--{name.replace('_', '-')}")
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
