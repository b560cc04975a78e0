"""Command-line front end: one JSON config file per run, one JSON report out.

Exit status: 0 success, 1 config error, 2 hypothesis refusal, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (DegenerateEndpointError, GapViolationError, HypothesisViolation, NumericalFailure,
                     ThresholdOnSpectrumError, ValidationError)
from .fourier import TruncationSpec, grid, mode_table, synthesize
from .index import relative_morse_index, spectral_flow
from .operators import TruncatedOperator, gap_report, wave_eigenvalue
from .wave import (CONDITIONS, WaveProblem, check_hypotheses, example_nonlinearity, solve_wave)

SCHEMA = "relmorse.report/v1"
COMMANDS = ("spectrum", "index", "flow", "solve", "check")
INDEX_FIELDS = ("g1", "g2", "ginf", "g3")


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------ serialization

def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, Fraction):
        return str(obj)
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return "%.17g" % x


def dumps(obj, indent: int = 2) -> str:
    """JSON with sorted keys and floats written with 17 significant digits."""
    def enc(o, level):
        pad = " " * (indent * (level + 1))
        end = " " * (indent * level)
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [f"{pad}{json.dumps(k)}: {enc(o[k], level + 1)}" for k in sorted(o)]
            return "{\n" + ",\n".join(items) + "\n" + end + "}"
        if isinstance(o, list):
            if not o:
                return "[]"
            if all(not isinstance(v, (dict, list)) for v in o):
                return "[" + ", ".join(enc(v, level + 1) for v in o) + "]"
            return "[\n" + ",\n".join(pad + enc(v, level + 1) for v in o) + "\n" + end + "]"
        if isinstance(o, bool) or o is None:
            return json.dumps(o)
        if isinstance(o, float):
            return _float(o)
        return json.dumps(o)
    return enc(_plain(obj), 0) + "\n"


# ------------------------------------------------------------ config

def load_config(path: Path) -> tuple[dict, str]:
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg, hashlib.sha256(raw).hexdigest()


def _spec(problem: dict) -> TruncationSpec:
    try:
        return TruncationSpec(int(problem["p"]), int(problem["q"]), int(problem["J"]), int(problem["K"]),
                              problem.get("Nx"), problem.get("Nt"))
    except KeyError as exc:
        raise ConfigError(f"problem section is missing {exc}") from exc


def _wave_problem(cfg: dict) -> WaveProblem:
    problem = cfg.get("problem")
    if not isinstance(problem, dict):
        raise ConfigError("config needs a 'problem' section")
    spec = _spec(problem)
    nl_cfg = problem.get("nonlinearity")
    if not isinstance(nl_cfg, dict) or "name" not in nl_cfg:
        raise ConfigError("problem.nonlinearity must be an object with a 'name'")
    params = dict(nl_cfg.get("params", {}))
    if "b" in problem and nl_cfg["name"] != "ex_thm43":
        params.setdefault("b", problem["b"])
    nl = example_nonlinearity(nl_cfg["name"], params, spec.p, spec.q)
    return WaveProblem.build(spec, nl, problem.get("l"))


def _abstract(cfg: dict) -> tuple[TruncatedOperator, TruncatedOperator]:
    ab = cfg["abstract"]
    try:
        return TruncatedOperator.abstract(ab["A"]), TruncatedOperator.abstract(ab["B"])
    except KeyError as exc:
        raise ConfigError(f"abstract section is missing {exc}") from exc


# ------------------------------------------------------------ commands

def cmd_spectrum(cfg: dict) -> dict:
    problem = cfg.get("problem") or {}
    spec = _spec(problem)
    b = problem.get("b")
    if b is None:
        b = _wave_problem(cfg).nonlinearity.b
    b = float(b)
    table = []
    for m in mode_table(spec):
        lam = wave_eigenvalue(m.j, m.k, spec.p, spec.q)
        table.append({"j": m.j, "k": m.k, "phase": m.phase, "exact": lam, "value": float(lam)})
    A = TruncatedOperator(spec, np.diag([r["value"] - b for r in table]))
    return {"b": b, "eigenvalues": table,
            "gap_report": gap_report(A, -abs(b), abs(b)).to_dict()}


def _index_fields(wp: WaveProblem) -> list[str]:
    names = [n for n in INDEX_FIELDS if n in wp.nonlinearity.fields]
    if any(c.startswith("f4") for c in wp.nonlinearity.conditions):
        names.append("g0")
    return names


def cmd_index(cfg: dict) -> dict:
    tol = float(cfg.get("kernel_tol", 1e-8))
    if "abstract" in cfg:
        A, B = _abstract(cfg)
        return {"mode": "abstract", "pair": relative_morse_index(A, B, tol).to_dict()}
    wp = _wave_problem(cfg)
    return {"mode": "wave", "pairs": {n: wp.index_pair(n, tol).to_dict() for n in _index_fields(wp)}}


def cmd_flow(cfg: dict) -> dict:
    fc = cfg.get("flow", {})
    t0, t1, steps = float(fc.get("t0", 0.0)), float(fc.get("t1", 1.0)), int(fc.get("steps", 16))
    if "abstract" in cfg:
        A, B = _abstract(cfg)
        mode = "abstract"
    else:
        wp = _wave_problem(cfg)
        name = fc.get("field") or _index_fields(wp)[0]
        A, B = wp.A, wp.multiplication(name)
        mode = f"wave:{name}"
    res = spectral_flow(A, B, t0, t1, steps)
    return {"mode": mode, "flow": res.to_dict(),
            "index": relative_morse_index(A, B).to_dict() if (t0, t1) == (0.0, 1.0) else None}


def cmd_check(cfg: dict, seed: int) -> dict:
    wp = _wave_problem(cfg)
    which = cfg.get("conditions")
    if which is not None and any(c not in CONDITIONS for c in which):
        raise ConfigError(f"conditions must be drawn from {CONDITIONS}")
    reports = check_hypotheses(wp, which, seed, int(cfg.get("sample_count", 20_000)))
    return {"hypotheses": [r.to_dict() for r in reports], "all_hold": all(r.holds for r in reports)}


def cmd_solve(cfg: dict, seed: int, force: bool) -> tuple[dict, WaveProblem, list[np.ndarray]]:
    wp = _wave_problem(cfg)
    kw = {}
    if "eps_sequence" in cfg:
        kw["eps_sequence"] = [float(e) for e in cfg["eps_sequence"]]
    if "lambda_steps" in cfg:
        kw["lambda_grid"] = list(np.linspace(0.0, 1.0, int(cfg["lambda_steps"])))
    res = solve_wave(wp, cfg.get("method", "reduce_direct"), int(cfg.get("budget", 4000)), seed,
                     force, cfg.get("strategy"), **kw)
    return res.to_dict(), wp, [s.z for s in res.solutions]


def write_csv(path: Path, spec: TruncationSpec, coeffs: np.ndarray):
    x, t = grid(spec)
    U = synthesize(spec, coeffs)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "t", "u"])
        for i, xi in enumerate(x):
            for j, tj in enumerate(t):
                w.writerow([_float(float(xi)), _float(float(tj)), _float(float(U[i, j]))])


def run(cfg: dict, config_hash: str, output: Path, seed: int, force: bool) -> int:
    command = cfg.get("command")
    if command not in COMMANDS:
        raise ConfigError(f"command must be one of {COMMANDS}, got {command!r}")
    report = {"schema": SCHEMA, "version": __version__, "command": command,
              "config_sha256": config_hash, "seed": seed,
              "truncation": _spec(cfg["problem"]).to_dict() if "problem" in cfg else None}
    output.mkdir(parents=True, exist_ok=True)
    status = 0
    fields = None
    try:
        if command == "spectrum":
            report["result"] = cmd_spectrum(cfg)
        elif command == "index":
            report["result"] = cmd_index(cfg)
        elif command == "flow":
            report["result"] = cmd_flow(cfg)
        elif command == "check":
            report["result"] = cmd_check(cfg, seed)
        else:
            report["result"], wp, fields = cmd_solve(cfg, seed, force)
    except HypothesisViolation as exc:
        report["refusal"] = {"condition": exc.condition, "message": str(exc), "evidence": exc.evidence}
        print(f"refused: {exc}", file=sys.stderr)
        status = 2
    except NumericalFailure as exc:
        report["failure"] = {"type": type(exc).__name__, "message": str(exc)}
        print(f"numerical failure: {exc}", file=sys.stderr)
        status = 3
    report["status"] = status
    (output / "report.json").write_text(dumps(report))
    if fields and cfg.get("csv", True):
        for i, z in enumerate(fields):
            write_csv(output / f"solution_{i}.csv", wp.spec, z)
    return status


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="relmorse", description=__doc__.splitlines()[0])
    ap.add_argument("command", nargs="?", choices=COMMANDS, help="overrides the config's command")
    ap.add_argument("--config", required=True, type=Path, help="JSON run configuration")
    ap.add_argument("--output", type=Path, default=Path("out"), help="report directory")
    ap.add_argument("--seed", type=int, default=None, help="overrides the config's seed")
    ap.add_argument("--force", action="store_true", help="solve even if a hypothesis check fails")
    ap.add_argument("--method", choices=("reduce_direct", "homotopy", "regularized"))
    ap.add_argument("--strategy", choices=("maximize", "multistart_newton"))
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg, digest = load_config(args.config)
        for key in ("command", "method", "strategy"):
            if getattr(args, key) is not None:
                cfg[key] = getattr(args, key)
        seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        return run(cfg, digest, args.output, seed, args.force)
    except (ConfigError, ValidationError, ThresholdOnSpectrumError, GapViolationError,
            DegenerateEndpointError, KeyError, TypeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
