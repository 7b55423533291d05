"""Command-line front end.

    ivrobust <command> --problem FILE [flags] [key=value ...]

Exit status: 0 completed, 1 certificate refuted, 2 usage or parse error.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from typing import Optional

import numpy as np

from . import __version__
from .classify import FLAG_NAMES, classify_point, lemma32_check
from .convexity import NOTIONS, certify
from .harness import CHECKS, run_harness, run_saddle_solution_suite
from .kkt import check_kkt_pair
from .model import Grid, Problem, Tolerances, load_problem, objective_violations, omega_mask, theta
from .penalty import PenaltyOptions, solve_penalty
from .report import Report
from .saddle import saddle_implies_solution
from .wolfe import DualPoint, dual_classify, dual_objective, in_Omega_D, make_config, sample_dual

OK, REFUTED_EXIT, USAGE = 0, 1, 2

KEYS = {
    "validate": (),
    "classify": ("z",),
    "kkt": ("z", "lambda"),
    "solve-penalty": (),
    "convexity": ("notion", "z"),
    "dual-objective": ("y", "lambda"),
    "dual-classify": ("z", "lambda", "y", "mu", "samples", "lam-max", "lam-steps"),
    "saddle": ("x", "lambda", "lam-max", "lam-steps"),
    "harness": (),
}
REQUIRED = {
    "classify": ("z",),
    "kkt": ("z", "lambda"),
    "convexity": ("notion", "z"),
    "dual-objective": ("y", "lambda"),
    "dual-classify": ("z", "lambda"),
    "saddle": ("x", "lambda"),
}


class UsageError(Exception):
    pass


def parse_number(text: str) -> float:
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"not a number: {text!r}") from None


def parse_vector(text: str) -> np.ndarray:
    text = text.strip().strip("()")
    if not text:
        return np.zeros(0)
    return np.array([parse_number(t) for t in text.split(",")])


def parse_grid(text: str, n: int) -> Grid:
    parts = [t for t in text.split(",") if t.strip()]
    if len(parts) % 3:
        raise UsageError("--grid takes lo,hi,steps triples")
    triples = [parts[k:k + 3] for k in range(0, len(parts), 3)]
    if len(triples) == 1:
        triples = triples * n
    if len(triples) != n:
        raise UsageError(f"--grid has {len(triples)} axes, problem has n={n}")
    try:
        counts = [int(c) for _, _, c in triples]
        return Grid([parse_number(a) for a, _, _ in triples], [parse_number(b) for _, b, _ in triples], counts)
    except ValueError as err:
        raise UsageError(f"--grid: {err}") from None


def parse_pairs(tokens: list, command: str) -> dict:
    allowed = KEYS[command]
    out = {}
    for tok in tokens:
        if "=" not in tok:
            raise UsageError(f"expected key=value, got {tok!r}")
        k, v = tok.split("=", 1)
        if k not in allowed:
            raise UsageError(f"unknown key {k!r} for {command}; allowed: {', '.join(allowed) or 'none'}")
        out[k] = v
    for k in REQUIRED.get(command, ()):
        if k not in out:
            raise UsageError(f"{command} needs {k}=...")
    return out


def _point(prob: Problem, text: str, name: str, length: Optional[int] = None) -> np.ndarray:
    v = parse_vector(text)
    want = prob.n if length is None else length
    if v.shape[0] != want:
        raise UsageError(f"{name} has length {v.shape[0]}, expected {want}")
    return v


def _multipliers(prob: Problem, text: str, name: str = "lambda") -> np.ndarray:
    lam = _point(prob, text, name, prob.p)
    if np.any(lam < 0):
        raise UsageError(f"{name} must be nonnegative")
    return lam


def _grid(prob: Problem, args) -> Grid:
    if args.grid:
        return parse_grid(args.grid, prob.n)
    if prob.grid is None:
        raise UsageError("the problem declares no [grid]; pass --grid")
    return prob.grid


def _header(rep: Report, command: str, prob: Problem) -> Report:
    rep.add("command", command)
    rep.add("problem", prob.name or "unnamed")
    return rep


def cmd_validate(prob, kv, args, tols):
    rep = _header(Report("problem check"), "validate", prob)
    rep.add("n", prob.n).add("m", prob.m).add("p", prob.p)
    for i, e in enumerate(prob.precision.eps):
        rep.add(f"epsilon_{i + 1}", e)
    rep.add("theta", theta(prob.precision)).add("sqrt_theta", prob.sqrt_theta)
    for j, c in enumerate(prob.constraints):
        rep.add(f"constraint_{j + 1}_samples", len(c.uncertainty.points))
    rep.add("set_rows", prob.S.A.shape[0])
    bad = 0
    if prob.grid is not None or args.grid:
        grid = _grid(prob, args)
        X = grid.points()
        XS = X[prob.S.contains(X, tols.feas)]
        rep.add("grid", grid.describe()).add("grid_points", len(X)).add("grid_points_in_S", len(XS))
        rep.add("grid_points_in_omega", int(np.count_nonzero(omega_mask(prob, XS, tols.feas))))
        viol = objective_violations(prob, XS)
        bad = sum(len(pts) for _, pts in viol)
        for i, pts in viol:
            rep.add(f"objective_{i + 1}_lower_above_upper_at", pts[0])
    rep.add("objective_bound_violations", bad)
    rep.add("verdict", "ok" if bad == 0 else "invalid")
    return rep, OK if bad == 0 else REFUTED_EXIT


def cmd_classify(prob, kv, args, tols):
    z = _point(prob, kv["z"], "z")
    grid = _grid(prob, args)
    c = classify_point(prob, z, grid, tols)
    rep = _header(Report("solution classification"), "classify", prob)
    rep.add("z", z).add("grid", grid.describe()).add("in_omega", c.in_omega).add("in_omega_e", c.in_omega_e)
    rep.add("grid_points_in_omega", c.grid_points_in_omega)
    for name in FLAG_NAMES:
        f = c[name]
        rep.add(name, f.verdict)
        if not f.holds:
            rep.add(f"{name}.reason", f.reason)
            if f.witness is not None:
                rep.add(f"{name}.witness", f.witness)
    lem = lemma32_check(prob, z, grid, tols, classification=c)
    for key, (_, _, ok) in lem.implications.items():
        rep.add(f"theta_implies_eps.{key}", "ok" if ok else "violated")
    return rep, OK


def _kkt_lines(rep: Report, cert):
    rep.add("verdict", cert.verdict)
    rep.add("inclusion_residual", cert.inclusion_residual).add("allowance", cert.allowance)
    rep.add("exact_surrogate", cert.exact_surrogate)
    for s in cert.sign_report:
        k = s.j + 1
        rep.add(f"g_{k}", s.g).add(f"lambda_{k}", s.lam).add(f"branch_{k}", s.branch).add(f"sign_ok_{k}", s.ok)
    if cert.reason:
        rep.add("reason", cert.reason)


def cmd_kkt(prob, kv, args, tols):
    z = _point(prob, kv["z"], "z")
    lam = _multipliers(prob, kv["lambda"])
    cert = check_kkt_pair(prob, z, lam, tols)
    rep = _header(Report("KKT certificate"), "kkt", prob)
    rep.add("z", z).add("lambda", lam)
    _kkt_lines(rep, cert)
    return rep, OK if cert.verdict else REFUTED_EXIT


def cmd_solve_penalty(prob, kv, args, tols):
    opts = PenaltyOptions(r0=args.r0, shrink=args.shrink, max_outer=args.max_outer, starts=args.starts,
                          inner_iters=args.inner_iters, seed=args.seed)
    run = solve_penalty(prob, opts, tols)
    rep = _header(Report("penalty solve"), "solve-penalty", prob)
    rep.add("seed", args.seed).add("success", run.success).add("z", run.z).add("lambda", run.lam).add("r", run.r)
    rep.add("outer_rounds", len(run.history)).add("bounded_below", run.bounded_below)
    rep.add("in_omega_e", run.in_omega_e)
    for k, step in enumerate(run.history, start=1):
        rep.add(f"round_{k}.r", step.r).add(f"round_{k}.z", step.z).add(f"round_{k}.gplus", step.gplus)
    for name, ok in run.conditions.items():
        rep.add(f"condition.{name}", ok)
    if run.kkt is not None:
        rep.add("kkt_verdict", run.kkt.verdict).add("inclusion_residual", run.kkt.inclusion_residual)
    if run.message:
        rep.add("message", run.message)
    return rep, OK if run.success else REFUTED_EXIT


def cmd_convexity(prob, kv, args, tols):
    notion = kv["notion"]
    if notion not in NOTIONS:
        raise UsageError(f"unknown notion {notion!r}; expected one of {', '.join(NOTIONS)}")
    z = _point(prob, kv["z"], "z")
    grid = _grid(prob, args)
    v = certify(prob, notion, z, grid.points(), tols)
    rep = _header(Report("generalized convexity"), "convexity", prob)
    rep.add("notion", notion).add("z", z).add("grid", grid.describe())
    rep.add("status", v.status).add("samples", v.samples).add("systems", v.systems)
    if not v.certified:
        rep.add("failing_x", v.failing_x).add("failing_row", v.failing_row).add("violation", v.violation)
        for k, vec in v.failing_selection.items():
            rep.add(f"selection.{k}", vec)
    return rep, OK if v.certified else REFUTED_EXIT


def cmd_dual_objective(prob, kv, args, tols):
    y = _point(prob, kv["y"], "y")
    lam = _multipliers(prob, kv["lambda"])
    rep = _header(Report("dual objective"), "dual-objective", prob)
    rep.add("y", y).add("lambda", lam)
    for i, iv in enumerate(dual_objective(prob, y, lam)):
        rep.add(f"L_{i + 1}", iv)
    return rep, OK


def _parse_samples(prob: Problem, text: str) -> list:
    out = []
    for item in (t for t in text.split(";") if t.strip()):
        if ":" not in item:
            raise UsageError("samples take y:lambda items separated by ';'")
        y, lam = item.split(":", 1)
        out.append(DualPoint(_point(prob, y, "sample y"), _multipliers(prob, lam, "sample lambda")))
    return out


def cmd_dual_classify(prob, kv, args, tols):
    z = _point(prob, kv["z"], "z")
    lam = _multipliers(prob, kv["lambda"])
    try:
        cfg = make_config(prob, z, lam, cap_mode=args.cap_mode == "on", tols=tols)
    except ValueError as err:
        raise UsageError(str(err)) from None
    cand = DualPoint(_point(prob, kv.get("y", kv["z"]), "y"), _multipliers(prob, kv.get("mu", kv["lambda"]), "mu"))
    lam_max = parse_number(kv["lam-max"]) if "lam-max" in kv else 2.0 * max(1.0, float(np.max(lam, initial=0.0)))
    steps = int(parse_number(kv.get("lam-steps", "9")))
    if steps < 1 or lam_max < 0:
        raise UsageError("lam-steps must be positive and lam-max nonnegative")
    grid = _grid(prob, args)
    extra = _parse_samples(prob, kv.get("samples", ""))
    samples = [s for s in extra if in_Omega_D(prob, cfg, s.y, s.lam, tols).member]
    samples += sample_dual(prob, cfg, grid, lam_max, steps, tols)
    mem = in_Omega_D(prob, cfg, cand.y, cand.lam, tols)
    v = dual_classify(prob, cfg, cand, samples, tols, assume_members=True)
    rep = _header(Report("dual classification"), "dual-classify", prob)
    rep.add("anchor_z", z).add("anchor_lambda", lam).add("cap_mode", args.cap_mode)
    rep.add("capped", [j + 1 for j in cfg.capped] or "none")
    rep.add("y", cand.y).add("mu", cand.lam).add("member", mem.member)
    rep.add("inclusion_residual", mem.inclusion_residual)
    rep.add("grid", grid.describe()).add("lam_max", lam_max).add("lam_steps", steps)
    rep.add("samples_feasible", len(samples)).add("verdict", v.verdict)
    if v.witness is not None:
        rep.add("witness_y", v.witness.y).add("witness_lambda", v.witness.lam)
    if v.reason:
        rep.add("reason", v.reason)
    return rep, OK if v.holds else REFUTED_EXIT


def cmd_saddle(prob, kv, args, tols):
    x = _point(prob, kv["x"], "x")
    lam = _multipliers(prob, kv["lambda"])
    grid = _grid(prob, args)
    lam_grid = None
    if "lam-max" in kv or "lam-steps" in kv:
        lam_max = parse_number(kv.get("lam-max", str(4.0 * max(1.0, float(np.max(lam, initial=0.0))))))
        steps = int(parse_number(kv.get("lam-steps", "17")))
        if steps < 2 or lam_max <= 0:
            raise UsageError("lam-steps must be at least 2 and lam-max positive")
        axes = [np.linspace(0.0, lam_max, steps)] * prob.p
        lam_grid = np.array(np.meshgrid(*axes, indexing="ij")).reshape(prob.p, -1).T if prob.p else None
        if lam_grid is not None:
            lam_grid = np.vstack([lam_grid, lam + np.eye(prob.p)])
    sol = saddle_implies_solution(prob, x, lam, grid, lam_grid, tols)
    sad = sol.saddle
    rep = _header(Report("saddle point"), "saddle", prob)
    rep.add("x", x).add("lambda", lam).add("grid", grid.describe())
    rep.add("lambda_grid_size", sad.lam_grid_size).add("lambda_grid_lo", sad.lam_bounds[0])
    rep.add("lambda_grid_hi", sad.lam_bounds[1]).add("x_grid_size", sad.x_grid_size)
    rep.add("cond_i", sad.cond_i)
    if sad.witness_lambda is not None:
        rep.add("cond_i.witness_lambda", sad.witness_lambda)
    rep.add("cond_ii", sad.cond_ii)
    if sad.witness_x is not None:
        rep.add("cond_ii.witness_x", sad.witness_x)
    rep.add("saddle", "holds-on-grid" if sad.holds else "refuted")
    rep.add("monotone_g_hypothesis", sol.hypothesis_holds)
    if sol.claim_checked:
        rep.add("almost_eps_quasi", sol.almost_eps_quasi).add("in_omega_e", sol.in_omega_e)
    rep.add("saddle_to_solution", "vacuous" if not sol.claim_checked else
            "consistent" if sol.consistent else "violated")
    return rep, OK if sad.holds else REFUTED_EXIT


def cmd_harness(prob, kv, args, tols):
    rep = Report("theorem property suites")
    rep.add("command", "harness").add("seed", args.seed).add("instances", args.instances)
    h = run_harness(args.instances, args.seed, tols)
    rep.add("kkt_pairs_found", sum(r.kkt_found for r in h.results))
    for name in CHECKS:
        passed, violated, vacuous = h.counts(name)
        rep.add(f"{name}.passed", passed).add(f"{name}.violated", violated).add(f"{name}.vacuous", vacuous)
    suite = run_saddle_solution_suite(args.saddle_instances, args.seed, tols)
    bad = [s for s in suite if not s.consistent]
    rep.add("saddle_to_solution.checked", sum(s.saddle and s.hypothesis for s in suite))
    rep.add("saddle_to_solution.violated", len(bad))
    for k, (idx, check, detail) in enumerate(h.violations, start=1):
        rep.add(f"violation_{k}", f"instance {idx} {check}: {detail}")
    for s in bad:
        rep.add(f"saddle_to_solution.violation_{s.index}", s.candidate)
    ok = h.ok and not bad
    rep.add("verdict", "ok" if ok else "violated")
    return rep, OK if ok else REFUTED_EXIT


COMMANDS = {
    "validate": cmd_validate,
    "classify": cmd_classify,
    "kkt": cmd_kkt,
    "solve-penalty": cmd_solve_penalty,
    "convexity": cmd_convexity,
    "dual-objective": cmd_dual_objective,
    "dual-classify": cmd_dual_classify,
    "saddle": cmd_saddle,
    "harness": cmd_harness,
}


def _positive(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--problem", metavar="FILE", help="problem file (TOML)")
    common.add_argument("--grid", metavar="LO,HI,STEPS[,...]",
                        help="search grid: one lo,hi,points triple per axis (a single triple is reused)")
    common.add_argument("--tol-incl", type=_positive, default=1e-9)
    common.add_argument("--tol-feas", type=_positive, default=1e-9)
    common.add_argument("--tol-active", type=_positive, default=1e-9)
    common.add_argument("--cap-mode", choices=("on", "off"), default="on")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--format", choices=("text", "kv"), default="text")

    parser = argparse.ArgumentParser(prog="ivrobust", description="Certify approximate Pareto solutions of "
                                     "robust interval-valued multiobjective problems.",
                                     epilog="Candidate points go after the command as key=value, e.g. z=1,2 lambda=1/4.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "solve-penalty":
            p.add_argument("--r0", type=_positive, default=1.0)
            p.add_argument("--shrink", type=float, default=0.1)
            p.add_argument("--max-outer", type=int, default=8)
            p.add_argument("--starts", type=int, default=16)
            p.add_argument("--inner-iters", type=int, default=50_000)
        if name == "harness":
            p.add_argument("--instances", type=int, default=100)
            p.add_argument("--saddle-instances", type=int, default=30)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args, extra = parser.parse_known_args(argv)
        flags = [t for t in extra if t.startswith("-")]
        if flags:
            parser.error(f"unrecognized arguments: {' '.join(flags)}")
    except SystemExit as e:
        return int(e.code) if e.code is not None else OK
    args.params = extra
    try:
        kv = parse_pairs(args.params, args.command)
        tols = Tolerances(feas=args.tol_feas, active=args.tol_active, incl=args.tol_incl)
        if args.command == "harness":
            if args.instances < 1 or args.saddle_instances < 0:
                raise UsageError("--instances must be positive")
            prob = None
        else:
            if not args.problem:
                raise UsageError(f"{args.command} needs --problem FILE")
            prob = load_problem(args.problem)
        rep, code = COMMANDS[args.command](prob, kv, args, tols)
    except (UsageError, ValueError, OSError) as err:
        print(f"ivrobust: error: {err}", file=sys.stderr)
        return USAGE
    sys.stdout.write(rep.render(args.format))
    return code


if __name__ == "__main__":
    sys.exit(main())
