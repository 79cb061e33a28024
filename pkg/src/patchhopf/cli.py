"""``patch-hopf``: config-driven front end writing CSV tables.

One JSON config describes one experiment: ``{"command": ..., "model": {...}, "params": {...}}``.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .ddesim import ConstantHistory, Converged, Periodic, detect_asymptotics, integrate
from .equilibrium import solve_equilibrium
from .errors import PatchHopfError
from .hopf import HopfAt, Inconclusive, StableAllDelays, classify, hopf_curve, tau_expansion, topology_data
from .model import DispersionMatrix, Logistic, ModelConfig, validate_dispersion, validate_growth_law
from .spectral import find_dstar, spectral_bound

COMMANDS = ("validate", "analyze", "hopf-curve", "simulate", "topology")
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

TOP_KEYS = {"command", "model", "params"}
MODEL_KEYS = {"A", "law"}
LAW_KEYS = {"hutchinson": {"name", "m"}, "logistic": {"name", "m", "a_hat", "b_hat"}}
PARAM_KEYS = {
    "validate": set(),
    "analyze": {"d", "regime"},
    "hopf-curve": {"d_grid", "n_points", "d_min_frac", "d_max_frac"},
    "simulate": {"runs", "history_scale", "transient_fraction"},
    "topology": {"matrices", "d", "claim"},
}
RUN_KEYS = {"d", "tau", "t_end", "step", "label"}


class ConfigError(ValueError):
    """Malformed or unknown configuration content."""


@dataclass(frozen=True)
class RunConfig:
    command: str
    model: ModelConfig | None
    law: Logistic
    params: dict


def _reject_unknown(block: dict, allowed: set, where: str):
    extra = sorted(set(block) - allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(extra)}")


def _vector(x, what: str, n: int | None = None) -> np.ndarray:
    try:
        v = np.array(x, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{what} must be numeric") from exc
    if v.ndim != 1 or (n is not None and len(v) != n) or not np.all(np.isfinite(v)):
        raise ConfigError(f"{what} must be a finite vector" + (f" of length {n}" if n else ""))
    return v


def _matrix(x, what: str) -> np.ndarray:
    try:
        M = np.array(x, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{what} must be a numeric matrix") from exc
    if M.ndim != 2 or M.shape[0] != M.shape[1] or not np.all(np.isfinite(M)):
        raise ConfigError(f"{what} must be a finite square matrix")
    return M


def _parse_law(block) -> Logistic:
    if not isinstance(block, dict) or "name" not in block:
        raise ConfigError("model.law must be an object with a 'name'")
    name = block["name"]
    if name not in LAW_KEYS:
        raise ConfigError(f"unknown growth law {name!r}; expected one of {sorted(LAW_KEYS)}")
    _reject_unknown(block, LAW_KEYS[name], "model.law")
    m = _vector(block.get("m"), "model.law.m")
    if name == "hutchinson":
        return Logistic.hutchinson(m)
    a = _vector(block.get("a_hat", [0.0] * len(m)), "model.law.a_hat", len(m))
    b = _vector(block.get("b_hat", [1.0] * len(m)), "model.law.b_hat", len(m))
    return Logistic(m, a, b)


def parse_config(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    _reject_unknown(data, TOP_KEYS, "config")
    command = data.get("command")
    if command not in COMMANDS:
        raise ConfigError(f"command must be one of {COMMANDS}")
    model_block = data.get("model")
    if not isinstance(model_block, dict):
        raise ConfigError("missing 'model' block")
    _reject_unknown(model_block, MODEL_KEYS, "model")
    law = _parse_law(model_block.get("law"))
    params = data.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("'params' must be an object")
    _reject_unknown(params, PARAM_KEYS[command], "params")
    model = None
    if "A" in model_block:
        A = _matrix(model_block["A"], "model.A")
        if A.shape[0] != law.n:
            raise ConfigError(f"model.A has {A.shape[0]} patches but the law has {law.n}")
        if A.shape[0] < 2:
            raise ConfigError("at least two patches are required")
        model = ModelConfig(DispersionMatrix(A), law)
    elif command != "topology":
        raise ConfigError("model.A is required")
    return RunConfig(command, model, law, params)


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    return parse_config(data)


def fmt(x) -> str:
    """Full-precision decimal; non-finite values become error tokens."""
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "error:undefined"
    if math.isinf(x):
        return "error:infinite"
    return format(x, ".17g")


def show(x) -> str:
    """Shortest round-trip decimal for console messages; CSV cells use :func:`fmt`."""
    if isinstance(x, (float, np.floating)) and math.isfinite(x):
        return repr(float(x))
    return fmt(x)


def error_token(exc: BaseException) -> str:
    name = type(exc).__name__.removesuffix("Error").removesuffix("Warning")
    return "error:" + re.sub(r"(?<!^)(?=[A-Z])", "_", name).lower()


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(c) for c in row])


def _pool_map(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))  # map preserves input order


def _require_valid(cfg: RunConfig, out=sys.stdout) -> bool:
    rep = cfg.model.validate()
    if not rep.valid:
        print("INVALID: " + rep.summary(), file=out)
    return rep.valid


# -- commands -----------------------------------------------------------------


def cmd_validate(cfg: RunConfig, out_dir: str, threads: int = 1) -> int:
    r1 = validate_dispersion(cfg.model.A)
    r2 = validate_growth_law(cfg.law)
    for label, rep in (("dispersion matrix", r1), ("growth law", r2)):
        status = "ok" if rep.valid else "violated"
        print(f"{label}: {status}")
        for clause, msg in zip(rep.violations, rep.messages):
            print(f"  - {clause}: {msg}")
    ok = r1.valid and r2.valid
    write_csv(os.path.join(out_dir, "validate.csv"), ["check", "clause", "status"],
              [(lbl, c, "violated") for lbl, rep in (("dispersion", r1), ("growth_law", r2)) for c in rep.violations]
              or [("all", "none", "ok")])
    return EXIT_OK if ok else EXIT_FAIL


def _analysis_row(model, P, d, regime_choice):
    n = model.n
    s = spectral_bound(model.A, model.m, d)
    if d >= P.d_star:
        return [d, s, *([0.0] * n), "supercritical", "extinction", *(["error:undefined"] * 5)]
    try:
        u = solve_equilibrium(model, d, perron=P).u
    except PatchHopfError as exc:
        return [d, s, *([error_token(exc)] * n), "error:undefined", error_token(exc), *([error_token(exc)] * 5)]
    regime = regime_choice
    if regime == "auto":
        regime = "small_d" if d < 0.5 * P.d_star else "near_dstar"
    try:
        v = classify(model, d, regime, perron=P)
    except PatchHopfError as exc:
        return [d, s, *u, regime, error_token(exc), *([error_token(exc)] * 5)]
    if isinstance(v, HopfAt):
        pt = v.point
        return [d, s, *u, regime, "HopfAt", pt.tau0, pt.nu, pt.theta, pt.transversality, abs(pt.S[0])]
    if isinstance(v, StableAllDelays):
        return [d, s, *u, regime, "StableAllDelays", *(["error:no_threshold"] * 5)]
    return [d, s, *u, regime, "Inconclusive", *(["error:inconclusive"] * 5)]


def cmd_analyze(cfg: RunConfig, out_dir: str, threads: int = 1) -> int:
    if not _require_valid(cfg):
        return EXIT_FAIL
    model = cfg.model
    d_list = _vector(cfg.params.get("d", []), "params.d")
    if len(d_list) == 0 or np.any(d_list < 0):
        raise ConfigError("params.d must be a nonempty list of nonnegative rates")
    regime = cfg.params.get("regime", "auto")
    if regime not in ("auto", "small_d", "near_dstar"):
        raise ConfigError("params.regime must be auto, small_d or near_dstar")
    P = find_dstar(model.A, model.m)
    rows = _pool_map(lambda d: _analysis_row(model, P, float(d), regime), d_list, threads)
    header = ["d", "s_of_d", *[f"u_{j + 1}" for j in range(model.n)], "regime", "verdict",
              "tau0", "nu", "theta", "transversality", "S_abs"]
    write_csv(os.path.join(out_dir, "analysis.csv"), header, rows)
    print(f"d_star = {show(P.d_star)}")
    for r in rows:
        print(f"d = {show(r[0])}: {r[model.n + 3]} tau0 = {show(r[model.n + 4])}")
    failed = [r for r in rows if str(r[model.n + 3]).startswith("error:")]
    if failed:
        print(f"warning: {len(failed)} of {len(rows)} rows failed")
    return EXIT_FAIL if len(failed) == len(rows) else EXIT_OK


def cmd_hopf_curve(cfg: RunConfig, out_dir: str, threads: int = 1) -> int:
    if not _require_valid(cfg):
        return EXIT_FAIL
    model = cfg.model
    P = find_dstar(model.A, model.m)
    p = cfg.params
    if "d_grid" in p:
        grid = _vector(p["d_grid"], "params.d_grid")
    else:
        num = int(p.get("n_points", 40))
        lo, hi = float(p.get("d_min_frac", 1e-3)), float(p.get("d_max_frac", 0.99))
        if not 0 < lo < hi < 1 or num < 2:
            raise ConfigError("need 0 < d_min_frac < d_max_frac < 1 and n_points >= 2")
        grid = P.d_star * np.linspace(lo, hi, num)
    try:
        curve = hopf_curve(model, grid, perron=P)
    except PatchHopfError as exc:
        print(f"hopf curve failed: {exc}")
        return EXIT_FAIL
    rows = []
    for (d, tau0, nu, theta, branch), regime in zip(curve.rows(), curve.regime):
        label = branch if regime != "intermediate" or branch == "none" else f"intermediate:{branch}"
        if branch == "none":
            rows.append([d, "error:no_branch", "error:no_branch", "error:no_branch", "none"])
        else:
            rows.append([d, tau0, nu, theta, label])
    write_csv(os.path.join(out_dir, "hopf_curve.csv"), ["d", "tau0", "nu", "theta", "branch"], rows)

    hutch = cfg.law.is_hutchinson
    if hutch:
        try:
            t = topology_data(model.A, model.m)
        except PatchHopfError as exc:
            t = None
            print(f"T(A): {error_token(exc)}")
    else:
        t = None
        print("T(A): not defined for this growth law (needs a_hat = 0, b_hat = 1)")
    if t is not None:
        exp_rows = [[d, tau_expansion(model.A, model.m, d)] for d in grid]
        print(f"T(A) = {show(t.T)}")
        print(f"pi/(2 m_qhat) = {show(t.tau_limit)}  (q_hat = {t.q_hat + 1})")
    else:
        exp_rows = [[d, "error:unsupported_law"] for d in grid]
    write_csv(os.path.join(out_dir, "expansion.csv"), ["d", "tau_expansion"], exp_rows)
    print(f"d_star = {show(P.d_star)}; intermediate rates are continuation results only")
    for f in curve.flags:
        print(f"note: {f}")
    return EXIT_OK


def _simulate_one(model, run, scale, frac, out_dir, idx):
    _reject_unknown(run, RUN_KEYS, f"params.runs[{idx}]")
    d, tau, t_end = float(run["d"]), float(run["tau"]), float(run["t_end"])
    label = str(run.get("label", f"run{idx + 1:03d}"))
    if not re.fullmatch(r"[A-Za-z0-9_.-]+", label):
        raise ConfigError(f"run label {label!r} must be a plain file-name token")
    fname = f"trajectory_{label}.csv"
    try:
        u = solve_equilibrium(model, d).u
        traj = integrate(model, d, tau, ConstantHistory(scale * u), t_end, run.get("step"))
    except PatchHopfError as exc:
        tok = error_token(exc)
        return [label, d, tau, t_end, tok, tok, tok, "error:no_file"]
    traj.to_csv(os.path.join(out_dir, fname))
    v = detect_asymptotics(traj, u, frac)
    if isinstance(v, Periodic):
        return [label, d, tau, t_end, "Periodic", v.period, float(np.max(v.amplitude)), fname]
    if isinstance(v, Converged):
        return [label, d, tau, t_end, "Converged", "error:not_periodic", float(np.max(np.abs(traj.states[-1] - u))), fname]
    return [label, d, tau, t_end, "Undetermined", "error:undetermined", "error:undetermined", fname]


def cmd_simulate(cfg: RunConfig, out_dir: str, threads: int = 1) -> int:
    if not _require_valid(cfg):
        return EXIT_FAIL
    runs = cfg.params.get("runs")
    if not isinstance(runs, list) or not runs:
        raise ConfigError("params.runs must be a nonempty list")
    for i, r in enumerate(runs):
        if not isinstance(r, dict) or not {"d", "tau", "t_end"} <= set(r):
            raise ConfigError(f"params.runs[{i}] needs d, tau and t_end")
    scale = float(cfg.params.get("history_scale", 1.01))
    frac = float(cfg.params.get("transient_fraction", 0.5))
    rows = _pool_map(lambda ir: _simulate_one(cfg.model, ir[1], scale, frac, out_dir, ir[0]),
                     list(enumerate(runs)), threads)
    write_csv(os.path.join(out_dir, "verdicts.csv"),
              ["label", "d", "tau", "t_end", "verdict", "period", "amplitude_or_distance", "file"], rows)
    for r in rows:
        print(f"{r[0]}: d = {show(r[1])}, tau = {show(r[2])} -> {r[4]}")
    return EXIT_OK


def _topology_row(law, entry, d):
    name = entry["name"]
    A = _matrix(entry["A"], f"matrix {name}")
    model = ModelConfig(DispersionMatrix(A), law)
    try:
        t = topology_data(A, law.m)
        row = [name, t.T, t.q_hat + 1, t.tau_limit, "+" if t.T > 0 else "-" if t.T < 0 else "0"]
    except PatchHopfError as exc:
        row = [name, *([error_token(exc)] * 4)]
    if d is not None:
        try:
            v = classify(model, d, "small_d")
            row.append(v.tau0 if isinstance(v, HopfAt) else f"error:{v.label.lower()}")
        except PatchHopfError as exc:
            row.append(error_token(exc))
    return row


def cmd_topology(cfg: RunConfig, out_dir: str, threads: int = 1) -> int:
    p = cfg.params
    mats = p.get("matrices")
    if not isinstance(mats, list) or not mats:
        raise ConfigError("params.matrices must be a nonempty list of {name, A}")
    names = []
    for i, e in enumerate(mats):
        if not isinstance(e, dict):
            raise ConfigError(f"params.matrices[{i}] must be an object")
        _reject_unknown(e, {"name", "A"}, f"params.matrices[{i}]")
        names.append(str(e.get("name", f"M{i + 1}")))
        e.setdefault("name", names[-1])
    if not cfg.law.is_hutchinson:
        raise ConfigError("topology needs the hutchinson law")
    d = p.get("d")
    d = None if d is None else float(d)
    invalid = [e["name"] for e in mats if not validate_dispersion(_matrix(e["A"], e["name"])).valid]
    if invalid:
        print(f"INVALID dispersion matrices: {', '.join(invalid)}")
        return EXIT_FAIL
    rows = _pool_map(lambda e: _topology_row(cfg.law, e, d), mats, threads)
    header = ["name", "T_of_A", "q_hat", "tau_limit", "predicted_slope_sign"]
    if d is not None:
        header.append("tau_numeric")
    write_csv(os.path.join(out_dir, "topology.csv"), header, rows)
    for r in rows:
        extra = f", tau(d={show(d)}) = {show(r[5])}" if d is not None else ""
        print(f"{r[0]}: T = {show(r[1])}, q_hat = {r[2]}, slope {r[4]}{extra}")
    claim = p.get("claim")
    if claim is not None:
        print(_claim_report(claim, rows, d))
    return EXIT_OK


def _claim_report(claim, rows, d) -> str:
    """Compare a stated ordering ``T(greater) > T(lesser)`` with the computed values."""
    if not isinstance(claim, dict) or set(claim) - {"greater", "lesser", "source"} or not {"greater", "lesser"} <= set(claim):
        raise ConfigError("params.claim must be {greater, lesser[, source]}")
    by_name = {r[0]: r for r in rows}
    g, s = claim["greater"], claim["lesser"]
    if g not in by_name or s not in by_name:
        raise ConfigError("params.claim names must refer to listed matrices")
    src = claim.get("source", "claim")
    rg, rs = by_name[g], by_name[s]
    lines = [f"{src}: T({g}) > T({s}), hence tau({g}) > tau({s}) for small d",
             f"computed: T({g}) = {show(rg[1])}, T({s}) = {show(rs[1])}"]
    try:
        holds = float(rg[1]) > float(rs[1])
        lines.append(f"ordering of T as stated: {'supported' if holds else 'NOT supported'}")
    except ValueError:
        lines.append("ordering of T: undetermined")
    if d is not None:
        lines.append(f"computed at d = {show(d)}: tau({g}) = {show(rg[5])}, tau({s}) = {show(rs[5])}")
        try:
            lines.append(f"ordering of tau as stated: {'supported' if float(rg[5]) > float(rs[5]) else 'NOT supported'}")
        except ValueError:
            lines.append("ordering of tau: undetermined")
    return "\n".join(lines)


HANDLERS = {
    "validate": cmd_validate,
    "analyze": cmd_analyze,
    "hopf-curve": cmd_hopf_curve,
    "simulate": cmd_simulate,
    "topology": cmd_topology,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="patch-hopf", description="Delay-induced Hopf analysis of patch models.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="JSON experiment file")
    ap.add_argument("--out", required=True, help="output directory (created if missing)")
    ap.add_argument("--threads", type=int, default=1, help="worker threads for grid rows")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = load_config(args.config)
        if cfg.command != args.command:
            raise ConfigError(f"config is for command {cfg.command!r}, not {args.command!r}")
        os.makedirs(args.out, exist_ok=True)
        return HANDLERS[args.command](cfg, args.out, args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
