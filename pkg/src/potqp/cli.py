"""Command line entry point: ``potqp {solve,verify,feasible} PROBLEM.json``.

Exit codes
----------
0  success (all requested checks passed)
1  a verification check failed
2  problem file could not be parsed or validated
3  infeasible constraints (a certificate summary is printed)
4  a solver did not converge
"""
from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import cutting_plane as cp
from .energy_qp import minimize_energy, sweep_mass
from .family import exp_curve_feasible, evaluate_on_grid, monomial_moment_feasible
from .kernel import EnergyMatrix, assemble_energy_matrix
from .measure import DiscreteMeasure, read_measure_csv, write_measure_csv
from .polytope import (EQ, GEQ, Certificate, FeasiblePolytope, InfeasibleError, build,
                       check_feasible, feasibility_margin)
from .problem import Problem, ProblemError, load_problem, uniform_grid
from .saddle import write_sequence_csv
from .verify import equality_chain_report, frostman_check, two_set_swap_check

EXIT_OK, EXIT_CHECK_FAILED, EXIT_PARSE, EXIT_INFEASIBLE, EXIT_NONCONVERGED = 0, 1, 2, 3, 4


class _Exit(Exception):
    def __init__(self, code: int, message: str = ""):
        super().__init__(message)
        self.code = code


def _cert_summary(cert) -> str:
    if isinstance(cert, dict):
        if not cert:
            return "no certificate"
        c, first = next(iter(sorted(cert.items())))
        return f"{len(cert)} masses infeasible; at c={c!r}: " + _cert_summary(first)
    if not isinstance(cert, Certificate):
        return "no certificate"
    y = np.array2string(np.asarray(cert.y), precision=6, max_line_width=120)
    return f"Farkas y = {y}, y.c - max_j y.F_j = {cert.gap:.6g}"


def _polytope(prob: Problem, cons=None) -> FeasiblePolytope:
    cons = cons if cons is not None else prob.constraints
    if cons is None:
        return FeasiblePolytope.simplex(prob.grid)
    sense = EQ if cons["sense"] == "eq" else GEQ
    rows = len(cons["targets"])
    return build(prob.grid, cons["family"], cons["targets"], [sense] * rows)


def _feasible_or_exit(p: FeasiblePolytope, what: str):
    res = check_feasible(p)
    if not res:
        raise _Exit(EXIT_INFEASIBLE, f"infeasible {what}: {_cert_summary(res.certificate)}")


def _energy_matrix(prob: Problem) -> EnergyMatrix:
    return assemble_energy_matrix(prob.kernel, prob.grid)


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text)
    return path


# -- solve ---------------------------------------------------------------

def _solve_qp(prob: Problem, out: Path, args) -> tuple[str, int]:
    p = _polytope(prob)
    _feasible_or_exit(p, "constraints")
    K = _energy_matrix(prob)
    tol = prob.solver.get("tol", 1e-8)
    max_iter = prob.solver.get("max_iter")
    rep = minimize_energy(K, p, tol=tol, max_iter=int(max_iter) if max_iter else None)
    write_measure_csv(out / "measure.csv", DiscreteMeasure.on_grid(prob.grid, rep.weights))
    head = f"mode = {prob.mode}\nN = {p.n}\nconstraints = {p.n_rows - 1}\n"
    return head + rep.to_text(), EXIT_OK if rep.converged else EXIT_NONCONVERGED


def _solve_cutting_plane(prob: Problem, out: Path, args) -> tuple[str, int]:
    cfg = prob.cutting_plane
    run = cp.run_equality if prob.mode == "cutting_plane_eq" else cp.run_inequality
    kw = {"refine": cfg["refine"]}
    if cfg["z_init"] is not None:
        kw["z_init"] = cfg["z_init"]
    res = run(prob.kernel, prob.grid, cfg["Phi"], cfg["g"], cfg["Z"],
              tol_psi=prob.solver.get("tol_psi", 1e-6),
              max_outer=int(prob.solver.get("max_iter", 50)),
              inner_tol=prob.solver.get("inner_tol", prob.solver.get("tol", 1e-8)), **kw)
    tr = res.trace
    tr.to_csv(out / "trace.csv")
    lines = [f"mode = {prob.mode}", f"status = {tr.status}", f"outer_iterations = {len(tr.records)}",
             f"n_constraints = {len(tr.z_set)}"]
    if tr.records:
        last = tr.records[-1]
        lines += [f"energy = {last.energy!r}", f"psi_min = {last.psi_min!r}",
                  f"psi_max = {last.psi_max!r}", f"psi_supnorm = {last.psi_supnorm!r}",
                  f"energy_monotone = {tr.monotone()}", f"sensitivity_l1 = {tr.sensitivity!r}"]
    if tr.message:
        lines.append(f"message = {tr.message}")
    if res.measure is not None:
        write_measure_csv(out / "measure.csv", res.measure)
    text = "\n".join(lines) + "\n"
    if tr.status == cp.INNER_INFEASIBLE:
        raise _Exit(EXIT_INFEASIBLE, text + "inner problem infeasible")
    code = EXIT_NONCONVERGED if tr.status == cp.MAX_ITER else EXIT_OK
    return text, code


def _solve_mass_sweep(prob: Problem, out: Path, args) -> tuple[str, int]:
    cfg = prob.mass_sweep
    f = assemble_energy_matrix(cfg["f_kernel"], prob.grid)
    rows, targets, sense = None, None, GEQ
    if prob.constraints is not None:
        fam = prob.constraints["family"]
        F = evaluate_on_grid(fam, prob.grid)
        rows = F[1:] if fam.normalized else F
        targets = prob.constraints["targets"]
        sense = EQ if prob.constraints["sense"] == "eq" else GEQ
    try:
        sw = sweep_mass(f, cfg["h"], rows, targets, cfg["c_range"], cfg["steps"],
                        grid=prob.grid, sense=sense, golden_iters=cfg["golden_iters"],
                        tol=prob.solver.get("tol", 1e-10))
    except InfeasibleError as exc:
        raise _Exit(EXIT_INFEASIBLE, f"{exc}: {_cert_summary(exc.certificate)}") from None
    nu = DiscreteMeasure.on_grid(prob.grid, sw.c * sw.report.weights, is_probability=False)
    write_measure_csv(out / "measure.csv", nu)
    lines = [f"mode = {prob.mode}", f"best_mass = {sw.c!r}", f"objective = {sw.objective!r}",
             f"evaluations = {len(sw.evaluations)}",
             "sweep = " + "; ".join(f"{c:.12g}:{v:.12g}" for c, v in sw.evaluations)]
    text = "\n".join(lines) + "\n" + sw.report.to_text()
    return text, EXIT_OK if sw.report.converged else EXIT_NONCONVERGED


def cmd_solve(prob: Problem, out: Path, args) -> int:
    if prob.mode in ("equilibrium", "constrained"):
        text, code = _solve_qp(prob, out, args)
    elif prob.mode.startswith("cutting_plane"):
        text, code = _solve_cutting_plane(prob, out, args)
    else:
        text, code = _solve_mass_sweep(prob, out, args)
    _write(out, "report.txt", text)
    print(text, end="")
    return code


# -- verify --------------------------------------------------------------

def _check_chain(prob: Problem, out: Path):
    p = _polytope(prob)
    _feasible_or_exit(p, "constraints")
    mode = prob.verify.get("qbar_mode", "auto")
    rep = equality_chain_report(_energy_matrix(prob), p, int(prob.verify.get("m_max", 6)),
                                mode=None if mode == "auto" else mode, seed=prob.seed,
                                tol=prob.solver.get("tol", 1e-9),
                                budget=int(prob.verify.get("budget", 5000)))
    write_sequence_csv(out / "qbar.csv", rep.sequence)
    return rep.to_text(), rep.one_sided_ok


def _check_frostman(prob: Problem, out: Path):
    if "measure_csv" in prob.verify:
        try:
            mu = read_measure_csv(prob.verify["measure_csv"])
        except (OSError, ValueError) as exc:
            raise _Exit(EXIT_PARSE, f"$.verify.measure_csv: {exc}") from None
    else:
        p = _polytope(prob)
        _feasible_or_exit(p, "constraints")
        rep = minimize_energy(_energy_matrix(prob), p, tol=prob.solver.get("tol", 1e-8))
        mu = DiscreteMeasure.on_grid(prob.grid, rep.weights)
        write_measure_csv(out / "measure.csv", mu)
    probes = prob.grid
    if prob.verify.get("probe_n") and prob.kernel.kind != "table":
        box = np.column_stack([prob.grid.min(axis=0), prob.grid.max(axis=0)])
        probes = uniform_grid(box, int(prob.verify["probe_n"]))
    r = frostman_check(prob.kernel, mu, probes)
    return r.to_text(), r.passed


def _check_swap(prob: Problem, out: Path):
    sides = []
    for key in ("side_a", "side_b"):
        if key not in prob.verify:
            raise _Exit(EXIT_PARSE, f"$.verify.{key}: missing required key for --swap")
        p = _polytope(prob, prob.verify[key])
        _feasible_or_exit(p, key.replace("_", " "))
        sides.append(p)
    r = two_set_swap_check(prob.kernel, sides[0], sides[1], tol=prob.solver.get("tol", 1e-9))
    return r.to_text(), r.one_sided_ok


_CHECKS = {"chain": _check_chain, "frostman": _check_frostman, "swap": _check_swap}


def cmd_verify(prob: Problem, out: Path, args) -> int:
    selected = [k for k in ("chain", "frostman", "swap") if getattr(args, k)]
    if not selected:
        selected = ["chain"]
    out.mkdir(parents=True, exist_ok=True)
    with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
        futures = [pool.submit(_CHECKS[k], prob, out) for k in selected]
        # Results are gathered in selection order, so output never depends on timing.
        results = [f.result() for f in futures]
    text = "".join(f"[{k}]\n{t}\n" for k, (t, _) in zip(selected, results))
    _write(out, "verify_report.txt", text)
    print(text, end="")
    return EXIT_OK if all(ok for _, ok in results) else EXIT_CHECK_FAILED


# -- feasible ------------------------------------------------------------

def cmd_feasible(prob: Problem, out: Path, args) -> int:
    cons = prob.constraints
    if cons is None:
        raise _Exit(EXIT_PARSE, "$.constraints: missing required key for 'feasible'")
    fam = cons["family"]
    c = np.concatenate([[1.0], cons["targets"]])
    in_unit = prob.dim == 1 and prob.grid.min() >= 0.0 and prob.grid.max() <= 1.0
    lines = []
    if fam.kind == "monomial" and cons["sense"] == "eq" and in_unit:
        r = monomial_moment_feasible(c)
        lines += ["test = Hausdorff differences (-1)^r D^r c_k >= 0 on [0, 1]",
                  f"verdict = {'feasible' if r else 'infeasible'}", f"margin = {r.margin!r}"]
        if r.violation is not None:
            lines.append(f"first_violation (r, k) = {r.violation}")
        ok = r.feasible
    elif (fam.kind == "exp" and cons["sense"] == "eq" and in_unit
          and fam.params["lambdas"][0] == 0 and np.all(np.diff(c) <= 0) and c[-1] > 0):
        grid_u = max(1000, prob.grid.shape[0])
        r = exp_curve_feasible(c, fam.params["lambdas"], grid_u)
        lines += [f"test = convex hull of the exponential moment curve ({grid_u} samples)",
                  f"verdict = {'feasible' if r else 'infeasible'}", f"margin = {r.margin!r}"]
        ok = r.feasible
    else:
        p = _polytope(prob)
        res = check_feasible(p)
        margin, _ = feasibility_margin(p)
        lines += ["test = phase-1 LP on the grid", f"verdict = {'feasible' if res else 'infeasible'}",
                  f"margin = {margin!r}"]
        if not res:
            lines.append(f"certificate = {_cert_summary(res.certificate)}")
        ok = res.feasible
    text = "\n".join(lines) + "\n"
    _write(out, "feasibility_report.txt", text)
    print(text, end="")
    return EXIT_OK if ok else EXIT_INFEASIBLE


# -- entry ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="potqp", description="Constrained energy problems on grids.")
    sub = ap.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("problem", help="problem file (JSON)")
    common.add_argument("--mode", help="solve: run mode override; verify: qbar search mode "
                                       "(auto, exact, heuristic)")
    common.add_argument("--tol", type=float)
    common.add_argument("--tol-psi", type=float)
    common.add_argument("--max-iter", type=int)
    common.add_argument("--grid-n", type=int, help="points per axis of the X grid")
    common.add_argument("--z-grid-n", type=int, help="points per axis of the Z grid")
    common.add_argument("--m-max", type=int)
    common.add_argument("--seed", type=int, help="seed for every random choice (default 0)")
    common.add_argument("--threads", type=int, default=1,
                        help="worker threads for independent sub-solves")
    common.add_argument("--out-dir", default=".", help="directory for CSV and report files")
    sub.add_parser("solve", parents=[common], help="solve the problem's mode")
    v = sub.add_parser("verify", parents=[common], help="run verification checks")
    v.add_argument("--chain", action="store_true", help="energy / inf-sup / sup-inf ladder")
    v.add_argument("--frostman", action="store_true", help="maximum principle check")
    v.add_argument("--swap", action="store_true", help="two-set minimax swap")
    sub.add_parser("feasible", parents=[common], help="decide feasibility of the constraints")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {"grid_n": args.grid_n, "z_grid_n": args.z_grid_n, "tol": args.tol,
                 "tol_psi": args.tol_psi, "max_iter": args.max_iter, "m_max": args.m_max,
                 "seed": args.seed}
    if args.mode is not None:
        overrides["qbar_mode" if args.command == "verify" else "mode"] = args.mode
    out = Path(args.out_dir)
    try:
        prob = load_problem(args.problem, overrides)
        cmd = {"solve": cmd_solve, "verify": cmd_verify, "feasible": cmd_feasible}[args.command]
        out.mkdir(parents=True, exist_ok=True)
        return cmd(prob, out, args)
    except ProblemError as exc:
        print(f"error: {args.problem}:{exc}", file=sys.stderr)
        return EXIT_PARSE
    except _Exit as exc:
        if str(exc):
            print(str(exc), file=sys.stderr if exc.code != EXIT_OK else sys.stdout)
        return exc.code
    except InfeasibleError as exc:
        print(f"infeasible: {exc}: {_cert_summary(exc.certificate)}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
