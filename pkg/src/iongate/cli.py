"""Command-line entry point.

    iongate SUBCOMMAND [CONFIG] [flags] --out DIR

CONFIG is an optional JSON file (see ``CONFIG_SCHEMA``); flags override its
values.  Every run writes its artifacts plus ``manifest.json`` into DIR.
Durations are in units of 1/omega throughout.

Exit codes: 0 ok, 1 verification failed, 2 config error, 3 infeasible.
Set ``IONGATE_THREADS`` to cap the BLAS thread pool.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import io
from .chain import ChainError, TrapSetup, chain_modes
from .error_model import ErrorModelError, alpha_over_d, error_report
from .ising import common_mode_design, coupling_target, graph_state_target, wrap_coupling
from .kernel import GATE_PHASE, accumulated_coupling, closure_norm, closure_residual
from .kicks import KickSolveError, loglog_slope, scaling_scan, solve_protocol1, solve_protocol2
from .optimizer import InfeasibleError, intensity_scan, kappa_scan, optimal_force
from .oracle import SPIN_CAP, oracle_coupling
from .profiles import DissipationModel, profile_from_dict, sample_profile

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 1, 2, 3
VERIFY_J_TOL = 1e-6
VERIFY_CLOSURE_TOL = 1e-8
ORACLE_MAX_IONS = 10
DEFAULT_GATE_T = 3 * np.pi          # 1.5 trap periods

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["schema_version"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": io.SCHEMA_VERSION},
        "trap": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "n_ions": {"type": "integer", "minimum": 1},
                "trap_kind": {"enum": ["CommonHarmonic", "Microtraps"]},
                "microtrap_centers": {"type": "array", "items": _num},
                "coulomb_length_ratio": _pos,
            },
        },
        "gate": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "T": _pos, "objective": {"enum": ["norm", "smooth", "smoothness"]},
                "n_modes": {"type": "integer", "minimum": 3}, "kappa_weight": _nonneg,
                "gamma": _nonneg, "nbar": _nonneg,
            },
        },
        "kick": {
            "type": "object", "additionalProperties": False,
            "properties": {"protocol": {"enum": [1, 2]}, "T": _pos, "gamma": _pos, "momentum": _pos},
        },
        "entangler": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "target": {"oneOf": [{"enum": ["ghz", "cluster"]},
                                     {"type": "array", "items": {"type": "array", "items": _num}}]},
                "n": {"type": "integer", "minimum": 2}, "T": _pos, "seed": {"type": "integer", "minimum": 0},
                "n_modes": {"type": "integer", "minimum": 3}, "starts": {"type": "integer", "minimum": 1},
                "max_iter": {"type": "integer", "minimum": 1},
            },
        },
        "error": {
            "type": "object", "additionalProperties": False,
            "properties": {"gamma": _nonneg, "nbar": _nonneg, "alpha_over_d": _pos, "T": _pos},
        },
        "scan": {
            "type": "object", "additionalProperties": False,
            "properties": {"kind": {"enum": ["intensity", "pulse", "kappa"]},
                           "T": {"type": "array", "items": _pos, "minItems": 2},
                           "gamma": _nonneg, "momentum": _pos},
        },
    },
}


class ConfigError(ValueError):
    pass


class Infeasible(RuntimeError):
    pass


# ---------------------------------------------------------------- config


def load_config(path) -> dict:
    if path is None:
        return {"schema_version": io.SCHEMA_VERSION}
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON ({exc.msg} at line {exc.lineno})") from exc
    validate_config(cfg)
    return cfg


def validate_config(cfg) -> None:
    errors = sorted(jsonschema.Draft202012Validator(CONFIG_SCHEMA).iter_errors(cfg), key=lambda e: list(e.path))
    if errors:
        e = errors[0]
        pointer = "/" + "/".join(str(p) for p in e.absolute_path)
        raise ConfigError(f"config error at {pointer}: {e.message}")


def _pick(flag, section: dict, key: str, default=None):
    if flag is not None:
        return flag
    return section.get(key, default)


def trap_from_config(cfg: dict, n_override=None) -> TrapSetup:
    t = dict(cfg.get("trap", {}))
    if n_override is not None:
        t["n_ions"] = n_override
    try:
        return TrapSetup(int(t.get("n_ions", 2)), t.get("trap_kind", "CommonHarmonic"),
                         tuple(t.get("microtrap_centers", ())), float(t.get("coulomb_length_ratio", 100.0)))
    except ChainError as exc:
        raise ConfigError(f"config error at /trap: {exc}") from exc


def _trap_dict(setup: TrapSetup) -> dict:
    return {"n_ions": setup.n_ions, "trap_kind": setup.trap_kind.value,
            "microtrap_centers": list(setup.microtrap_centers),
            "coulomb_length_ratio": setup.coulomb_length_ratio}


def _pair_target(n: int) -> np.ndarray:
    J = np.zeros((n, n))
    J[0, 1] = J[1, 0] = GATE_PHASE
    return J


# ---------------------------------------------------------------- subcommands


def _write_profile_csv(out: Path, name: str, profile) -> Path:
    t, F = sample_profile(profile)
    header = ["t"] + [f"F{i}" for i in range(F.shape[0])]
    return io.write_csv(out / name, header, [[ti, *Fi] for ti, Fi in zip(t, F.T)])


def cmd_modes(args, cfg, out):
    setup = trap_from_config(cfg, args.n)
    modes = chain_modes(setup)
    files = [io.write_json(out / "modes.json", {"schema_version": io.SCHEMA_VERSION, "trap": _trap_dict(setup),
                                                "modes": modes})]
    files.append(io.write_csv(out / "frequencies.csv", ["k", "omega", "alpha"],
                              [[k, w, a] for k, (w, a) in enumerate(zip(modes.frequencies, modes.lengths))]))
    return files, {"trap": _trap_dict(setup)}, None, EXIT_OK


def cmd_design_gate(args, cfg, out):
    g = cfg.get("gate", {})
    setup = trap_from_config(cfg)
    modes = chain_modes(setup)
    T = float(_pick(args.T, g, "T", DEFAULT_GATE_T))
    obj = _pick(args.objective, g, "objective", "norm")
    nm = int(_pick(args.nm, g, "n_modes", 4))
    weight = _pick(args.kappa_weight, g, "kappa_weight", None)
    penalty = None
    if weight is not None:
        gamma = float(_pick(args.gamma, g, "gamma", 0.01))
        nbar = float(_pick(args.nbar, g, "nbar", 0.0))
        penalty = (DissipationModel.uniform(modes.n_modes, gamma, nbar), float(weight))
    inputs = {"trap": _trap_dict(setup), "T": T, "objective": obj, "n_modes": nm, "kappa_weight": weight}
    try:
        design = optimal_force(T, modes, nm, obj, kappa_penalty=penalty)
    except InfeasibleError as exc:
        raise Infeasible(str(exc)) from exc
    doc = {"schema_version": io.SCHEMA_VERSION, "kind": "gate", "trap": _trap_dict(setup),
           "target": _pair_target(setup.n_ions), "design": design}
    files = [io.write_json(out / "design.json", doc), _write_profile_csv(out, "force.csv", design.profile)]
    return files, inputs, None, EXIT_OK


def cmd_kick_solve(args, cfg, out):
    k = cfg.get("kick", {})
    protocol = int(_pick(args.protocol, k, "protocol", 1))
    setup = trap_from_config(cfg)
    if setup.n_ions != 2:
        raise ConfigError("config error at /trap/n_ions: kick protocols need two ions")
    modes = chain_modes(setup)
    inputs = {"trap": _trap_dict(setup), "protocol": protocol}
    try:
        if protocol == 1:
            gamma = float(_pick(args.gamma, k, "gamma", 0.9))
            momentum = float(_pick(args.momentum, k, "momentum", 0.5))
            inputs.update(gamma=gamma, momentum=momentum)
            sol = solve_protocol1(gamma, momentum, modes)
        else:
            T = _pick(args.T, k, "T")
            if T is None:
                raise ConfigError("config error at /kick/T: protocol 2 needs a duration")
            momentum = float(_pick(args.momentum, k, "momentum", 0.01))
            inputs.update(T=float(T), momentum=momentum)
            sol = solve_protocol2(float(T), momentum, modes)
    except KickSolveError as exc:
        raise Infeasible(str(exc)) from exc
    except ValueError as exc:
        raise ConfigError(f"config error at /kick: {exc}") from exc
    doc = {"schema_version": io.SCHEMA_VERSION, "kind": "kicks", "trap": _trap_dict(setup),
           "target": _pair_target(2), "solution": sol, "profile": sol.train}
    return [io.write_json(out / "kicks.json", doc)], inputs, None, EXIT_OK


def _entangler_target(choice, n):
    if isinstance(choice, str) and choice in ("ghz", "cluster"):
        if n is None:
            raise ConfigError("config error at /entangler/n: named targets need an ion count")
        return graph_state_target(choice, n)
    if isinstance(choice, str):
        try:
            choice = io.read_json(choice)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"config error at /entangler/target: cannot read adjacency file ({exc})") from exc
    try:
        return graph_state_target(choice)
    except ValueError as exc:
        raise ConfigError(f"config error at /entangler/target: {exc}") from exc


def cmd_design_entangler(args, cfg, out):
    e = cfg.get("entangler", {})
    choice = _pick(args.target, e, "target", "ghz")
    n = _pick(args.n, e, "n", None)
    A = _entangler_target(choice, n)
    setup = trap_from_config(cfg, len(A))
    modes = chain_modes(setup)
    T = float(_pick(args.T, e, "T", 1.1))
    seed = int(_pick(args.seed, e, "seed", 0))
    nm = _pick(args.nm, e, "n_modes", None)
    starts = int(e.get("starts", 8))
    max_iter = int(e.get("max_iter", 500))
    inputs = {"trap": _trap_dict(setup), "target": choice, "adjacency": A, "T": T, "seed": seed,
              "n_modes": nm, "starts": starts, "max_iter": max_iter}
    try:
        design = common_mode_design(coupling_target(A), T, modes, nm, seed=seed, starts=starts, max_iter=max_iter)
    except InfeasibleError as exc:
        raise Infeasible(str(exc)) from exc
    doc = {"schema_version": io.SCHEMA_VERSION, "kind": "entangler", "trap": _trap_dict(setup),
           "target": design.target, "design": design, "profile": design.profile}
    files = [io.write_json(out / "entangler.json", doc), _write_profile_csv(out, "force.csv", design.profile)]
    code = EXIT_OK if design.converged else EXIT_INFEASIBLE
    if code:
        print(f"not converged: residual {design.residual:.3e}, fidelity {design.fidelity_estimate:.6f}",
              file=sys.stderr)
    return files, inputs, seed, code


def _design_profile(doc: dict):
    if "profile" in doc:
        return profile_from_dict(doc["profile"])
    return profile_from_dict(doc["design"]["profile"])


def verify_design(doc: dict) -> dict:
    """Replay a stored design; the oracle is used up to ``ORACLE_MAX_IONS`` ions."""
    setup = TrapSetup(**{k: (tuple(v) if k == "microtrap_centers" else v) for k, v in doc["trap"].items()})
    modes = chain_modes(setup)
    profile = _design_profile(doc)
    target = np.asarray(doc["target"], dtype=float)
    off = 1 - np.eye(len(target))
    J = accumulated_coupling(profile, modes)
    report = {"kind": doc.get("kind"), "n_ions": setup.n_ions,
              "analytic_J_error": float(np.max(np.abs(wrap_coupling((J - target) * off)))),
              "analytic_closure": float(closure_norm(closure_residual(profile, modes)))}
    if setup.n_ions <= min(ORACLE_MAX_IONS, SPIN_CAP):
        fit, finals = oracle_coupling(profile, modes)
        report["oracle_J_error"] = float(np.max(np.abs(wrap_coupling((fit.J - target) * off))))
        report["oracle_closure"] = float(np.max(np.abs(finals)))
        report["oracle_fit_residual"] = float(fit.residual)
        J_err, clo = report["oracle_J_error"], report["oracle_closure"]
    else:
        report["oracle"] = f"skipped above {ORACLE_MAX_IONS} ions"
        J_err, clo = report["analytic_J_error"], report["analytic_closure"]
    report["J_tolerance"] = VERIFY_J_TOL
    report["closure_tolerance"] = VERIFY_CLOSURE_TOL
    report["passed"] = bool(J_err <= VERIFY_J_TOL and clo <= VERIFY_CLOSURE_TOL)
    return report


def cmd_verify(args, cfg, out):
    if args.design is None:
        raise ConfigError("verify needs --design PATH")
    try:
        doc = io.read_json(args.design)
        report = verify_design(doc)
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"cannot replay design file: {exc}") from exc
    report = {"schema_version": io.SCHEMA_VERSION, "design": str(args.design), **report}
    print("PASS" if report["passed"] else "FAIL")
    return ([io.write_json(out / "verify.json", report)], {"design": str(args.design)}, None,
            EXIT_OK if report["passed"] else EXIT_VERIFY)


def cmd_error_report(args, cfg, out):
    e = cfg.get("error", {})
    setup = trap_from_config(cfg)
    modes = chain_modes(setup)
    gamma = float(_pick(args.gamma, e, "gamma", 0.0))
    nbar = float(_pick(args.nbar, e, "nbar", 0.0))
    ad = _pick(args.alpha_over_d, e, "alpha_over_d", None)
    ad = alpha_over_d(setup.coulomb_length_ratio) if ad is None else float(ad)
    if args.design is not None:
        doc = io.read_json(args.design)
        profile = _design_profile(doc)
        target = np.asarray(doc["target"], dtype=float)
        T = profile.T
    else:
        T = float(_pick(args.T, e, "T", DEFAULT_GATE_T))
        try:
            profile = optimal_force(T, modes).profile
        except InfeasibleError as exc:
            raise Infeasible(str(exc)) from exc
        target = _pair_target(setup.n_ions)
    diss = DissipationModel.uniform(modes.n_modes, gamma, nbar)
    try:
        rep = error_report(profile, modes, target, diss, nbar, ad)
    except ErrorModelError as exc:
        raise ConfigError(f"config error at /error: {exc}") from exc
    inputs = {"trap": _trap_dict(setup), "gamma": gamma, "nbar": nbar, "alpha_over_d": ad, "T": T,
              "design": None if args.design is None else str(args.design)}
    doc = {"schema_version": io.SCHEMA_VERSION, "report": rep}
    return [io.write_json(out / "error_report.json", doc)], inputs, None, EXIT_OK


def _parse_T_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"--T-list must be comma-separated numbers: {exc}") from exc


def cmd_scan(args, cfg, out):
    s = cfg.get("scan", {})
    kind = _pick(args.kind, s, "kind", "intensity")
    Ts = _parse_T_list(args.T_list) if args.T_list else s.get("T")
    if Ts is None:
        Ts = list(np.geomspace(0.5, 3.0, 11) * 2 * np.pi) if kind != "kappa" else \
            list(np.geomspace(0.05, 0.5, 8) * 2 * np.pi)
    if len(Ts) < 2 or min(Ts) <= 0:
        raise ConfigError("config error at /scan/T: need at least two positive durations")
    setup = trap_from_config(cfg)
    modes = chain_modes(setup)
    inputs = {"trap": _trap_dict(setup), "kind": kind, "T": Ts}
    try:
        if kind == "intensity":
            rows = intensity_scan(Ts, modes)
            table = [[r.T, r.l1, r.l2, r.mu] for r in rows]
            header, slope = ["T", "l1", "l2", "mu"], loglog_slope([r.T for r in rows], [r.l1 for r in rows])
        elif kind == "pulse":
            momentum = float(_pick(args.momentum, s, "momentum", 0.01))
            inputs["momentum"] = momentum
            rows = scaling_scan(Ts, momentum, modes)
            blank = float("nan")
            table = [[r.T, *(list(r.taus) or [blank] * 3), r.n if r.n else "", r.pulse_pairs or "", r.error or ""]
                     for r in rows]
            ok = [r for r in rows if r.pulse_pairs]
            header = ["T", "tau1", "tau2", "tau3", "n", "N_p", "error"]
            slope = loglog_slope([r.T for r in ok], [r.pulse_pairs for r in ok]) if len(ok) > 1 else float("nan")
        else:
            gamma = float(_pick(args.gamma, s, "gamma", 0.01))
            inputs["gamma"] = gamma
            rows = kappa_scan(Ts, modes, DissipationModel.uniform(modes.n_modes, gamma, 0.0))
            table = [[r.T, r.kappa, r.l1] for r in rows]
            header, slope = ["T", "kappa", "l1"], loglog_slope([r.T for r in rows], [r.kappa for r in rows])
    except InfeasibleError as exc:
        raise Infeasible(str(exc)) from exc
    files = [io.write_csv(out / f"scan_{kind}.csv", header, table),
             io.write_json(out / f"scan_{kind}.json", {"schema_version": io.SCHEMA_VERSION, "kind": kind,
                                                         "loglog_slope": slope})]
    print(f"log-log slope {slope:.4f}")
    return files, inputs, None, EXIT_OK


COMMANDS = {
    "modes": cmd_modes,
    "design-gate": cmd_design_gate,
    "kick-solve": cmd_kick_solve,
    "design-entangler": cmd_design_entangler,
    "verify": cmd_verify,
    "error-report": cmd_error_report,
    "scan": cmd_scan,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="iongate", description="Design and verify ion-chain phase gates.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("config", nargs="?", help="JSON config file")
        sp.add_argument("--out", default="out", help="artifact directory")
    sub.choices["modes"].add_argument("--n", type=int)
    g = sub.choices["design-gate"]
    g.add_argument("--T", type=float)
    g.add_argument("--objective", choices=["norm", "smooth", "smoothness"])
    g.add_argument("--nm", type=int)
    g.add_argument("--kappa-weight", type=float)
    g.add_argument("--gamma", type=float)
    g.add_argument("--nbar", type=float)
    k = sub.choices["kick-solve"]
    k.add_argument("--protocol", type=int, choices=[1, 2])
    k.add_argument("--T", type=float)
    k.add_argument("--gamma", type=float)
    k.add_argument("--momentum", type=float)
    e = sub.choices["design-entangler"]
    e.add_argument("--target", help="ghz, cluster, or a JSON adjacency file")
    e.add_argument("--n", type=int)
    e.add_argument("--T", type=float)
    e.add_argument("--seed", type=int)
    e.add_argument("--nm", type=int)
    sub.choices["verify"].add_argument("--design")
    r = sub.choices["error-report"]
    r.add_argument("--design")
    r.add_argument("--T", type=float)
    r.add_argument("--gamma", type=float)
    r.add_argument("--nbar", type=float)
    r.add_argument("--alpha-over-d", type=float)
    s = sub.choices["scan"]
    s.add_argument("--kind", choices=["intensity", "pulse", "kappa"])
    s.add_argument("--T-list")
    s.add_argument("--gamma", type=float)
    s.add_argument("--momentum", type=float)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        cfg = load_config(args.config)
        files, inputs, seed, code = COMMANDS[args.command](args, cfg, out)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    io.write_json(out / "manifest.json", io.manifest(args.command, {"config": args.config, **inputs}, seed,
                                                      [f.name for f in files]))
    return code


if __name__ == "__main__":
    sys.exit(main())
