"""bellman-verify: evaluate B, run verification suites, simulate dyadic martingales, summarize reports.

Exit codes: 0 success, 2 usage or configuration error, 3 a check failed.
Settings come from flags and from an optional key=value file (``--config``);
flags win over the file, the file wins over built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .errors import BellmanError, DomainError, ParameterError
from .report import VerificationReport, csv_text, dump_csv, to_json

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 2, 3

REPORT_COLUMNS = ["check", "c", "passed", "total_points", "worst_violation", "tolerance"]


class UsageError(Exception):
    pass


def _floats(text: str) -> tuple:
    try:
        return tuple(float(a) for a in str(text).split(",") if a.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _names(text: str) -> tuple:
    return tuple(a.strip() for a in str(text).split(",") if a.strip())


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off", ""):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _common(p: argparse.ArgumentParser, fmt=True):
    p.add_argument("--config", help="key=value file; flags override its entries")
    p.add_argument("--out", help="output directory (default: stdout)")
    if fmt:
        p.add_argument("--format", choices=("json", "csv"), help="report format (default json)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bellman-verify", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="value, region, gradient and Hessian of B at one point")
    for name in ("x", "y", "w", "v"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--c", type=float, help="weight parameter c > 1")
    _common(p, fmt=False)

    p = sub.add_parser("verify", help="run named verification suites")
    p.add_argument("--suite", type=_names, help="comma-separated suite names, or 'all'")
    p.add_argument("--c", type=_floats, help="comma-separated c values")
    p.add_argument("--grid", type=int, help="points per grid axis")
    p.add_argument("--tol", type=float, help="override the suite tolerance")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, help="worker processes (env BELLMAN_VERIFY_WORKERS)")
    p.add_argument("--exact-rational", dest="exact_rational", action="store_const", const=True,
                   help="include exact Sylvester certificates in the report")
    p.add_argument("--dump", action="store_const", const=True, help="write per-point CSV dumps to --out")
    p.add_argument("--timing", action="store_const", const=True, help="include wall times (output no longer reproducible)")
    _common(p)

    p = sub.add_parser("simulate", help="exact checks on an ensemble of random dyadic trees")
    p.add_argument("--trees", type=int)
    p.add_argument("--depth", type=int)
    p.add_argument("--min-depth", dest="min_depth", type=int)
    p.add_argument("--char", type=float, help="target weight characteristic")
    p.add_argument("--vary-char", dest="vary_char", action="store_const", const=True,
                   help="draw each target log-uniformly from [1, --char]")
    p.add_argument("--leaf-law", dest="leaf_law", choices=("mixed", "two-point", "power", "lognormal"))
    p.add_argument("--h-law", dest="h_law", choices=("mixed", "constant", "alternating", "adversarial", "random"))
    p.add_argument("--c", type=float, help="parameter of B in the node check (default: the tree characteristic)")
    p.add_argument("--tol", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--sweep", type=_floats, help="comma-separated targets for a characteristic sweep table")
    p.add_argument("--tree-csv", dest="tree_csv", help="write the first tree of the ensemble as CSV here")
    p.add_argument("--timing", action="store_const", const=True)
    _common(p)

    p = sub.add_parser("report", help="summarize JSON reports written by verify or simulate")
    p.add_argument("paths", nargs="+")
    _common(p)
    return parser


DEFAULTS = {
    "eval": {},
    "verify": {"suite": None, "c": (2.0,), "grid": None, "tol": None, "seed": 0, "workers": None,
               "exact_rational": False, "dump": False, "timing": False, "format": "json"},
    "simulate": {"trees": 100, "depth": 8, "min_depth": None, "char": 4.0, "vary_char": False, "leaf_law": "mixed",
                 "h_law": "mixed", "c": None, "tol": 1e-9, "seed": 0, "workers": None, "sweep": None,
                 "tree_csv": None, "timing": False, "format": "json"},
    "report": {"format": "json"},
}


def read_config_file(path: str) -> dict:
    """Plain key=value lines; '#' starts a comment; keys may use dashes or underscores."""
    out = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from None
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key=value")
        key, value = (a.strip() for a in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


def resolve_config(parser, args) -> dict:
    """Merge defaults, the config file and explicit flags (in increasing priority)."""
    command = args.command
    sub = parser._subparsers._group_actions[0].choices[command]
    types = {a.dest: a.type for a in sub._actions}
    consts = {a.dest for a in sub._actions if a.const is True}
    cfg = dict(DEFAULTS[command])
    if args.config:
        for key, value in read_config_file(args.config).items():
            if key not in types or key in ("config", "help"):
                raise UsageError(f"unknown config key {key!r} for '{command}'")
            try:
                if key in consts:
                    cfg[key] = _bool(value)
                elif types[key] is not None:
                    cfg[key] = types[key](value)
                else:
                    cfg[key] = value
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise UsageError(f"config key {key!r}: {exc}") from None
    for key, value in vars(args).items():
        if value is not None and key not in ("command", "config"):
            cfg[key] = value
    return cfg


def _emit(text: str, out_dir: str | None, name: str):
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, name), "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _hash_config(cfg: dict) -> dict:
    """Entries that determine the results (output location and parallelism do not)."""
    return {k: v for k, v in cfg.items() if k not in ("out", "workers", "format", "timing", "dump", "tree_csv")}


def _reports_csv(reports, cfg) -> str:
    rows = [[r.check, "" if r.c is None else r.c, r.passed, r.total_points, r.worst_violation, r.tolerance]
            for r in _flatten(reports)]
    return csv_text(REPORT_COLUMNS, rows, _hash_config(cfg))


def _flatten(reports):
    for r in reports:
        yield r
        yield from _flatten(r.subchecks)


# --- commands ---------------------------------------------------------------------


def cmd_eval(cfg: dict) -> int:
    from .core import BellmanPoint, eval_B
    from .kernels import DomainParams

    missing = [k for k in ("x", "y", "w", "v", "c") if cfg.get(k) is None]
    if missing:
        raise UsageError(f"missing {', '.join('--' + k for k in missing)}")
    params = DomainParams(cfg["c"])
    p = BellmanPoint(cfg["x"], cfg["y"], cfg["w"], cfg["v"])
    ev = eval_B(p, params)
    payload = {
        "point": {"x": p.x, "y": p.y, "w": p.w, "v": p.v, "c": params.c},
        "value": ev.value,
        "region": ev.region.name,
        "piece": ev.piece,
        "on_boundary": ev.on_boundary,
        "degenerate": ev.degenerate,
        "gradient": ev.gradient.tolist(),
        "hessian_eigenvalues": np.linalg.eigvalsh(ev.hessian).tolist(),
    }
    _emit(json.dumps(payload, indent=2, sort_keys=True) + "\n", cfg.get("out"), "eval.json")
    return EXIT_OK


def _strip_certificates(report: VerificationReport):
    report.details = {k: v for k, v in report.details.items() if k != "certificates"}
    for s in report.subchecks:
        _strip_certificates(s)


def cmd_verify(cfg: dict) -> int:
    from .checks import SUITES, run_suite

    names = cfg["suite"]
    if not names:
        raise UsageError("--suite is required")
    if names == ("all",):
        names = tuple(SUITES)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise UsageError(f"unknown suite(s) {', '.join(unknown)}; available: {', '.join(SUITES)}")
    c_values = tuple(cfg["c"])
    if not c_values or any(not c > 1 for c in c_values):
        raise UsageError("every --c value must exceed 1")
    if cfg["grid"] is not None and cfg["grid"] < 2:
        raise UsageError("--grid must be at least 2")
    if cfg["dump"] and not cfg.get("out"):
        raise UsageError("--dump needs --out")
    reports = []
    for name in names:
        r = run_suite(name, c_values, cfg["grid"], cfg["tol"], cfg["workers"], cfg["seed"], dump=cfg["dump"])
        if not cfg["exact_rational"]:
            _strip_certificates(r)
        reports.append(r)
        print(r.line(), file=sys.stderr)
        if cfg["dump"]:
            _emit(dump_csv(r, _hash_config(cfg)), cfg["out"], f"{name}.csv")
    if cfg["format"] == "csv":
        _emit(_reports_csv(reports, cfg), cfg.get("out"), "report.csv")
    else:
        _emit(to_json(reports, _hash_config(cfg), timing=cfg["timing"]), cfg.get("out"), "report.json")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def cmd_simulate(cfg: dict) -> int:
    from .martingale import SimConfig, ensemble_tree, run_ensemble, sweep_characteristic
    from .report import _clean

    sim = SimConfig(
        depth=cfg["depth"], seed=cfg["seed"], c_target=cfg["char"], leaf_law=cfg["leaf_law"], h_law=cfg["h_law"],
        n_trees=cfg["trees"], min_depth=cfg["min_depth"], vary_char=cfg["vary_char"], c_bellman=cfg["c"],
        tol=cfg["tol"],
    )
    if sim.c_bellman is not None and not sim.c_bellman > 1:
        raise UsageError("--c must exceed 1")
    result = run_ensemble(sim, cfg["workers"])
    sweep = sweep_characteristic(sim, cfg["sweep"], cfg["workers"]) if cfg["sweep"] else None
    hashed = _hash_config(cfg)
    if cfg["format"] == "csv":
        _emit(result.to_csv(hashed), cfg.get("out"), "simulation.csv")
        if sweep is not None:
            rows = ([r["target"], r["characteristic"], r["best_raw_ratio"], r["n_trees"]] for r in sweep)
            _emit(csv_text(["target", "characteristic", "best_raw_ratio", "n_trees"], rows, hashed),
                  cfg.get("out"), "sweep.csv")
    else:
        payload = json.loads(to_json(result.reports, hashed, timing=cfg["timing"]))
        payload["trees"] = _clean(result.rows)
        if sweep is not None:
            payload["sweep"] = _clean(sweep)
        _emit(json.dumps(payload, indent=2, sort_keys=True) + "\n", cfg.get("out"), "simulation.json")
    if cfg["tree_csv"] and sim.n_trees:
        with open(cfg["tree_csv"], "w") as fh:
            fh.write(ensemble_tree(sim, 0).to_csv(hashed))
    for r in result.reports:
        print(r.line(), file=sys.stderr)
    return EXIT_OK if result.passed else EXIT_FAIL


def cmd_report(cfg: dict) -> int:
    rows, all_passed = [], True
    for path in cfg["paths"]:
        try:
            with open(path) as fh:
                payload = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read report {path}: {exc}") from None
        if "reports" not in payload:
            raise UsageError(f"{path} is not a bellman-verify report")
        all_passed &= bool(payload.get("passed", False))
        for r in payload["reports"]:
            rows.append({"source": path, **{k: r.get(k) for k in REPORT_COLUMNS}})
    if cfg["format"] == "csv":
        cols = ["source"] + REPORT_COLUMNS
        text = csv_text(cols, ([row[c] if row[c] is not None else "" for c in cols] for row in rows),
                        {"paths": list(cfg["paths"])})
    else:
        text = json.dumps({"passed": all_passed, "reports": rows}, indent=2, sort_keys=True) + "\n"
    _emit(text, cfg.get("out"), f"summary.{cfg['format']}")
    for row in rows:
        status = "PASS" if row["passed"] else "FAIL"
        print(f"{status} {row['check']} ({row['source']})", file=sys.stderr)
    return EXIT_OK if all_passed else EXIT_FAIL


COMMANDS = {"eval": cmd_eval, "verify": cmd_verify, "simulate": cmd_simulate, "report": cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(parser, args)
        return COMMANDS[args.command](cfg)
    except (UsageError, DomainError, ParameterError) as exc:
        print(f"bellman-verify: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BellmanError as exc:
        print(f"bellman-verify: error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
