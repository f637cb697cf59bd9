"""Command-line front end.

Subcommands: solve, continue, verify, spectrum, sweep, oracle.  Values come
from built-in defaults, then an optional JSON ``--config`` file, then flags
given on the command line.  Every run writes its outputs to ``--out`` and
every JSON output embeds the resolved config and the package version.  CSV
files stay pure tables; their config lives in a ``<name>.meta.json`` sidecar.

Exit codes: 0 success, 1 invalid order or config, 2 non-convergence,
3 weight not admissible, 4 grid policy exhausted, 5 a check failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional

import numpy as np

from . import __version__
from .continuation import ProbeInconclusive, continue_lambda, continue_sigma
from .fixedpoint import (
    GridPolicyExhausted,
    InvariantViolation,
    NonConvergenceError,
    ShootingParams,
    SolveOptions,
    initial_grid,
    picard_solve,
    solution_from_profile,
)
from .grid import EvenProfile, HalfGrid
from .params import UnsupportedOrderError, make_order
from .spectral import SpectralReport, spectral_report
from .verify import VerificationReport, verify_solution
from .weight import AssumptionViolation, Weight, validate_assumption_a

log = logging.getLogger("fracgelfand")

EXIT_OK, EXIT_CONFIG, EXIT_NONCONV, EXIT_ASSUMPTION, EXIT_GRID, EXIT_CHECK = range(6)

DEFAULTS: Dict[str, object] = {
    "s": 0.75,
    "lambda": 1.0,
    "sigma": 0.0,
    "weight": "const",
    "c": 1.0,
    "a": 1.0,
    "beta": 1.0,
    "m": 1.0,
    "n": 2048,
    "L": "auto",
    "tol": 1e-10,
    "max_iter": 300,
    "anderson": 5,
    "out": "out",
    "seed": 0,
    "workers": 1,
    # continue
    "lambda_to": None,
    "sigma_min": 1e-4,
    # verify
    "profile": None,
    "spectral": True,
    "laplace_samples": 20,
    # sweep
    "s_list": None,
    "lambda_list": None,
    "sigma_list": None,
    "via_continuation": False,
}

ORACLE_DEFAULTS = {"s": 1.0, "lambda": 1.0, "sigma": 0.0, "weight": "const", "c": 1.0, "n": 2048, "L": 30.0}


class ConfigError(ValueError):
    pass


# -- config ----------------------------------------------------------------


def _length(text):
    if isinstance(text, str) and text.strip().lower() == "auto":
        return "auto"
    try:
        val = float(text)
    except (TypeError, ValueError):
        raise argparse.ArgumentTypeError(f"expected a number or 'auto', got {text!r}")
    return val


def _float_list(text):
    if isinstance(text, (list, tuple)):
        return [float(t) for t in text]
    parts = [t for t in str(text).split(",") if t.strip()]
    try:
        return [float(t) for t in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    S = argparse.SUPPRESS
    g = common.add_argument_group("problem")
    g.add_argument("--s", type=float, default=S, help="fractional order in (1/2, 1]")
    g.add_argument("--lambda", dest="lambda", type=float, default=S, help="shooting value v(0) / sqrt(K(0))")
    g.add_argument("--sigma", type=float, default=S, help="Gaussian homotopy parameter")
    g.add_argument("--weight", choices=("const", "poly", "stretched_exp"), default=S)
    g.add_argument("--c", type=float, default=S, help="constant weight level")
    g.add_argument("--a", type=float, default=S, help="polynomial weight exponent")
    g.add_argument("--beta", type=float, default=S, help="stretched exponential rate")
    g.add_argument("--m", type=float, default=S, help="stretched exponential half-exponent")
    g = common.add_argument_group("numerics")
    g.add_argument("--n", type=int, default=S, help="cells on the half line")
    g.add_argument("--L", type=_length, default=S, help="half-length or 'auto'")
    g.add_argument("--tol", type=float, default=S)
    g.add_argument("--max-iter", dest="max_iter", type=int, default=S)
    g.add_argument("--anderson", type=int, default=S, help="Anderson depth (0 disables)")
    g = common.add_argument_group("run")
    g.add_argument("--out", default=S, help="output directory")
    g.add_argument("--seed", type=int, default=S)
    g.add_argument("--workers", type=int, default=S)
    g.add_argument("--config", default=None, help="JSON file of defaults; flags override it")
    g.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="fracgelfand", description="Fractional Gelfand solver and verifier.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="solve one fixed point")
    p = sub.add_parser("continue", parents=[common], help="follow a branch in sigma (to 0) or lambda")
    p.add_argument("--lambda-to", dest="lambda_to", type=float, default=S, help="continue in lambda to this value")
    p.add_argument("--sigma-min", dest="sigma_min", type=float, default=S)
    p = sub.add_parser("verify", parents=[common], help="identity and spectral checks on a solution")
    p.add_argument("--profile", default=S, help="directory holding profile.csv and diagnostics.json")
    p.add_argument("--no-spectral", dest="spectral", action="store_false", default=S)
    p.add_argument("--laplace-samples", dest="laplace_samples", type=int, default=S)
    sub.add_parser("spectrum", parents=[common], help="Morse index and kernel checks")
    p = sub.add_parser("sweep", parents=[common], help="grid of (s, lambda, sigma) points")
    p.add_argument("--s-list", dest="s_list", type=_float_list, default=S)
    p.add_argument("--lambda-list", dest="lambda_list", type=_float_list, default=S)
    p.add_argument("--sigma-list", dest="sigma_list", type=_float_list, default=S)
    p.add_argument("--via-continuation", dest="via_continuation", action="store_true", default=S,
                   help="reach sigma = 0 rows by continuation from sigma = 1")
    sub.add_parser("oracle", parents=[common], help="compare s = 1 against the closed form")
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    """Defaults < config file < explicit flags; unknown config keys are rejected."""
    cfg = dict(DEFAULTS)
    if args.command == "oracle":
        cfg.update(ORACLE_DEFAULTS)
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}")
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        data = {k.replace("-", "_") if k != "lambda" else k: v for k, v in data.items()}
        unknown = sorted(set(data) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        cfg.update(data)
    flags = {k: v for k, v in vars(args).items() if k in DEFAULTS}
    cfg.update(flags)
    if isinstance(cfg["L"], str) or cfg["L"] is None:
        cfg["L"] = _length(cfg["L"] or "auto")
    for key in ("s_list", "lambda_list", "sigma_list"):
        if cfg[key] is not None:
            cfg[key] = _float_list(cfg[key])
    return cfg


def make_weight(cfg: dict) -> Weight:
    kind = cfg["weight"]
    if kind in ("const", "constant"):
        return Weight("constant", c=cfg["c"])
    if kind in ("poly", "polynomial"):
        return Weight("polynomial", a=cfg["a"])
    if kind in ("stretched_exp", "stretched"):
        return Weight("stretched_exp", beta=cfg["beta"], m=cfg["m"])
    raise ConfigError(f"unknown weight {kind!r}")


def make_options(cfg: dict) -> SolveOptions:
    try:
        return SolveOptions(
            tol=float(cfg["tol"]),
            max_iter=int(cfg["max_iter"]),
            anderson_depth=int(cfg["anderson"]),
            L=cfg["L"],
            n=int(cfg["n"]),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc))


def make_params(cfg: dict, s=None, lam=None, sigma=None) -> ShootingParams:
    order = make_order(float(cfg["s"] if s is None else s))
    try:
        return ShootingParams(
            float(cfg["lambda"] if lam is None else lam),
            float(cfg["sigma"] if sigma is None else sigma),
            make_weight(cfg),
            order,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc))


def check_admissible(p: ShootingParams, o: SolveOptions) -> None:
    report = validate_assumption_a(p.weight, initial_grid(p, o))
    if not report.ok:
        raise AssumptionViolation(report)


# -- output ----------------------------------------------------------------


def _clean(obj):
    """JSON-safe copy: non-finite floats become strings, numpy scalars become Python."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def _meta(cfg: dict, command: str) -> dict:
    return {"command": command, "config": cfg, "version": __version__}


def write_json(path: str, payload: dict, cfg: dict, command: str) -> None:
    body = dict(payload)
    body.update(_meta(cfg, command))
    with open(path, "w") as fh:
        json.dump(_clean(body), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_csv(path: str, text: str, cfg: dict, command: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(text)
    stem = os.path.splitext(path)[0]
    write_json(stem + ".meta.json", {"table": os.path.basename(path)}, cfg, command)


# -- commands --------------------------------------------------------------


def cmd_solve(cfg: dict) -> int:
    p, o = make_params(cfg), make_options(cfg)
    check_admissible(p, o)
    sol = picard_solve(p, o)
    write_csv(os.path.join(cfg["out"], "profile.csv"), sol.to_csv(), cfg, "solve")
    write_json(os.path.join(cfg["out"], "diagnostics.json"), sol.diagnostics(), cfg, "solve")
    log.info("mass %.10g after %d iterations, residual %.2e", sol.mass, sol.iterations, sol.residual)
    return EXIT_OK


def cmd_continue(cfg: dict) -> int:
    p, o = make_params(cfg), make_options(cfg)
    check_admissible(p, o)
    if cfg["lambda_to"] is not None:
        path = continue_lambda(p, float(cfg["lambda_to"]), o)
    else:
        if not p.sigma > 0:
            raise ConfigError("sigma continuation needs --sigma > 0 (or give --lambda-to)")
        path = continue_sigma(p, o, sigma_min=float(cfg["sigma_min"]))
    write_csv(os.path.join(cfg["out"], "branch.csv"), path.to_csv(), cfg, "continue")
    write_json(os.path.join(cfg["out"], "branch_summary.json"), path.summary(), cfg, "continue")
    return EXIT_OK


def load_profile(directory: str, o: SolveOptions):
    """Read profile.csv and diagnostics.json written by ``solve``."""
    with open(os.path.join(directory, "diagnostics.json")) as fh:
        diag = json.load(fh)
    grid = HalfGrid.from_dict(diag["grid"])
    with open(os.path.join(directory, "profile.csv")) as fh:
        rows = list(csv.DictReader(fh))
    if len(rows) != grid.n + 1:
        raise ConfigError(f"profile has {len(rows)} rows, grid expects {grid.n + 1}")
    x = np.array([float(r["x"]) for r in rows])
    if not np.allclose(x, grid.nodes, rtol=1e-12, atol=0):
        raise ConfigError("profile nodes do not match the stored grid")
    v = np.array([float(r["v"]) for r in rows])
    u = np.array([float(r["u"]) for r in rows])
    pr = diag["params"]
    p = ShootingParams(float(pr["lambda"]), float(pr["sigma"]), Weight.from_dict(pr["weight"]), make_order(float(pr["s"])))
    return p, EvenProfile(grid, v), u


def _monotone(u: np.ndarray, v: np.ndarray) -> Optional[str]:
    if not np.all(v > 0):
        return "v is not strictly positive"
    if np.any(np.diff(u) >= 0) or np.any(np.diff(v) > 1e-12 * v[0]):
        i = int(np.argmax(np.diff(u)))
        return f"profile is not decreasing after node {i}"
    return None


def cmd_verify(cfg: dict, spectral_only: bool = False) -> int:
    o = make_options(cfg)
    if cfg["profile"]:
        p, v, u = load_profile(cfg["profile"], o)
        bad = _monotone(u, v.samples)
        sol = None if bad else solution_from_profile(p, v, o)
    else:
        p = make_params(cfg)
        check_admissible(p, o)
        sol, bad = picard_solve(p, o), None

    ok = True
    out = cfg["out"]
    if not spectral_only:
        if bad:
            vrep = VerificationReport(monotone_ok=False)
            vrep.failed["monotone_ok"] = bad
            vrep.skipped.update({k: "profile failed monotonicity" for k in ("pohozaev_residual_rel", "laplace_min")})
        else:
            vrep = verify_solution(sol, laplace_samples=int(cfg["laplace_samples"]), seed=int(cfg["seed"]))
        write_json(os.path.join(out, "verification.json"), vrep.to_dict(), cfg, "verify")
        ok &= vrep.ok
        for name, why in vrep.failed.items():
            log.error("check failed: %s (%s)", name, why)

    if cfg["spectral"] and not bad:
        srep = spectral_report(sol)
    else:
        srep = SpectralReport()
        why = "disabled" if not cfg["spectral"] else "profile failed monotonicity"
        srep.skipped.update({k: why for k in srep.__dataclass_fields__ if k not in ("skipped", "failed")})
    write_json(os.path.join(out, "spectral.json"), srep.to_dict(), cfg, "spectrum" if spectral_only else "verify")
    ok &= srep.ok
    for name, why in srep.failed.items():
        log.error("check failed: %s (%s)", name, why)
    return EXIT_OK if ok else EXIT_CHECK


def _sweep_row(cfg: dict, o: SolveOptions, key):
    s, lam, sigma = key
    p = make_params(cfg, s, lam, sigma)
    if cfg["via_continuation"] and sigma == 0:
        sol = continue_sigma(ShootingParams(lam, 1.0, p.weight, p.order), o, sigma_min=float(cfg["sigma_min"])).final.solution
    else:
        sol = picard_solve(p, o)
    from .spectral import morse_form_for, morse_index
    from .verify import pohozaev_residual

    V = EvenProfile(sol.grid, sol.v.samples**2, density=True)
    idx, _ = morse_index(V, morse_form_for(sol))
    decay = sol.decay_fit[1] if sol.decay_fit else float("nan")
    return [s, lam, sigma, sol.mass, idx, pohozaev_residual(sol), decay]


def cmd_sweep(cfg: dict) -> int:
    s_list = cfg["s_list"] if cfg["s_list"] is not None else [cfg["s"]]
    l_list = cfg["lambda_list"] if cfg["lambda_list"] is not None else [cfg["lambda"]]
    g_list = cfg["sigma_list"] if cfg["sigma_list"] is not None else [cfg["sigma"]]
    keys = sorted(set(itertools.product(s_list, l_list, g_list)))
    if not keys:
        raise ConfigError("empty sweep schedule")
    o = make_options(cfg)
    for key in keys:
        p = make_params(cfg, *key)
        check_admissible(p, o)

    def run(key):
        try:
            return key, _sweep_row(cfg, o, key), None
        except (NonConvergenceError, GridPolicyExhausted, InvariantViolation) as exc:
            return key, [*key, *([float("nan")] * 4)], f"{type(exc).__name__}: {exc}"

    workers = max(1, int(cfg["workers"]))
    with ThreadPoolExecutor(max_workers=workers) as ex:
        results = sorted(ex.map(run, keys), key=lambda r: r[0])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["s", "lambda", "sigma", "mass", "morse_index", "pohozaev", "decay_p"])
    errors = {}
    for key, row, err in results:
        w.writerow([repr(float(t)) if isinstance(t, float) else t for t in row])
        if err:
            errors[",".join(repr(k) for k in key)] = err
    write_csv(os.path.join(cfg["out"], "sweep.csv"), buf.getvalue(), cfg, "sweep")
    write_json(os.path.join(cfg["out"], "sweep_errors.json"), {"errors": errors}, cfg, "sweep")
    return EXIT_OK if not errors else EXIT_NONCONV


ORACLE_TOL = {"sup_error": 5e-5, "u0_error": 1e-6, "mass_error": 1e-5}


def cmd_oracle(cfg: dict) -> int:
    p, o = make_params(cfg), make_options(cfg)
    if p.order.s != 1.0 or p.sigma != 0 or not p.weight.is_constant or p.weight.c != 1.0 or p.lam != 1.0:
        raise ConfigError("the closed form holds for s = 1, lambda = 1, sigma = 0, K = 1 only")
    sol = picard_solve(p, o)
    x = sol.grid.nodes
    exact = 1.0 / np.cosh(x / math.sqrt(2.0))
    res = {
        "sup_error": float(np.max(np.abs(sol.v.samples - exact))),
        "u0_error": abs(float(sol.u.samples[0])),
        "mass_error": abs(sol.mass - 2.0 * math.sqrt(2.0)),
        "mass": sol.mass,
    }
    failed = {k: res[k] for k, tol in ORACLE_TOL.items() if not res[k] <= tol}
    res["failed"] = failed
    res["ok"] = not failed
    write_csv(os.path.join(cfg["out"], "profile.csv"), sol.to_csv(), cfg, "oracle")
    write_json(os.path.join(cfg["out"], "diagnostics.json"), sol.diagnostics(), cfg, "oracle")
    write_json(os.path.join(cfg["out"], "oracle.json"), res, cfg, "oracle")
    return EXIT_OK if not failed else EXIT_CHECK


COMMANDS = {
    "solve": cmd_solve,
    "continue": cmd_continue,
    "verify": cmd_verify,
    "spectrum": lambda cfg: cmd_verify(cfg, spectral_only=True),
    "sweep": cmd_sweep,
    "oracle": cmd_oracle,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
        os.makedirs(cfg["out"], exist_ok=True)
        return COMMANDS[args.command](cfg)
    except (UnsupportedOrderError, ConfigError, argparse.ArgumentTypeError, OSError, KeyError) as exc:
        log.error("invalid configuration: %s", exc)
        return EXIT_CONFIG
    except AssumptionViolation as exc:
        log.error("%s", exc)
        return EXIT_ASSUMPTION
    except (NonConvergenceError, InvariantViolation, ProbeInconclusive) as exc:
        log.error("no convergence: %s", exc)
        return EXIT_NONCONV
    except GridPolicyExhausted as exc:
        log.error("grid policy exhausted: %s", exc)
        return EXIT_GRID


if __name__ == "__main__":
    sys.exit(main())
