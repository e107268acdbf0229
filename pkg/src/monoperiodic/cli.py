"""Command line front-end.

    monoperiodic solve   run.toml   # checks, iteration, certificate, CSV + JSON
    monoperiodic check   run.toml   # bracket and hypothesis checks only
    monoperiodic certify run.toml   # contraction factor
    monoperiodic oracle  run.toml   # compare the iteration limit with a reference
    monoperiodic sweep   run.toml   # mesh refinement study

Exit codes: 0 success, 1 bad configuration, 2 refuted hypothesis, invalid
lower/upper solution or uncertified problem, 3 monotonicity violated,
4 iteration limit reached, 5 oracle error above the configured bound.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import _kernels
from .config import ConfigError, RunConfig, load_config
from .monotone_solver import (HypothesisError, InvalidBracketError, Status, check_H1,
                              check_H3_H4_H5, extremality_check, iterate,
                              uniqueness_certificate, verify_lower_solution,
                              verify_upper_solution)
from .problems import DivergenceError, build, fourier_solution, timestep_oracle

log = logging.getLogger("monoperiodic")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_HYPOTHESIS = 2
EXIT_MONOTONICITY = 3
EXIT_MAX_ITER = 4
EXIT_ORACLE = 5

OUTPUT_ENV = "MONOPERIODIC_OUTPUT_DIR"

_STATUS_EXIT = {
    Status.EXTREMAL_PAIR: EXIT_OK,
    Status.UNIQUE_SOLUTION: EXIT_OK,
    Status.MONOTONICITY_VIOLATED: EXIT_MONOTONICITY,
    Status.MAX_ITER_REACHED: EXIT_MAX_ITER,
}


def _fmt(x) -> str:
    if x is None:
        return "nan"
    return "%.17g" % x


class _Run:
    """State shared by the verbs: config, problem, operator and the report being built."""

    def __init__(self, cfg: RunConfig, recipe=None):
        self.cfg = cfg
        self.recipe = cfg.recipe if recipe is None else recipe
        self.problem = build(self.recipe)
        self.op = self.problem.operator(cfg.quadrature)
        self.report = {
            "problem": {"kind": self.recipe.kind, "name": self.problem.name,
                        "nodes": self.problem.nodes, "dimension": self.problem.dimension,
                        "period": self.problem.period, "delay": self.problem.delay,
                        "shift": self.op.generator.shift, "quadrature": cfg.quadrature,
                        "backend": _kernels.BACKEND},
        }

    def brackets(self) -> bool:
        p = self.problem
        lo = verify_lower_solution(p, p.lower, 1e-8)
        up = verify_upper_solution(p, p.upper, 1e-8)
        self.report["bracket"] = {"lower": dataclasses.asdict(lo), "upper": dataclasses.asdict(up)}
        return lo.ok and up.ok

    def hypotheses(self) -> bool:
        cfg, p = self.cfg, self.problem
        out, ok = {}, True
        if "h1" in cfg.checks:
            h1 = check_H1(p, cfg.samples, cfg.seed)
            out["H1"] = h1.to_dict()
            ok = ok and h1.ok
            if not h1.ok:
                log.error("H1 refuted: %s", h1.witness)
        if "h3h4h5" in cfg.checks:
            rep = check_H3_H4_H5(p, cfg.samples, cfg.seed)
            out.update(rep.to_dict())
            ok = ok and rep.ok
            if not rep.ok:
                log.error("quasi-monotone hypotheses refuted")
        self.report["hypotheses"] = out
        return ok

    def certificate(self):
        try:
            cert = uniqueness_certificate(self.problem, self.op, self.cfg.substeps)
        except HypothesisError as exc:
            self.report["certificate"] = {"error": str(exc)}
            return None
        self.report["certificate"] = cert.to_dict()
        return cert

    def solve(self):
        rep = iterate(self.problem, self.op, self.cfg.tolerance, self.cfg.max_iter)
        self.report["iteration"] = rep.summary()
        return rep

    def oracle(self, rep) -> tuple[np.ndarray, np.ndarray, str]:
        """Reference values on the grid and the oracle name."""
        cfg, p = self.cfg, self.problem
        kind = cfg.oracle
        fourier_ok = self.recipe.kind == "scalar_delay" and self.recipe.rhs is None
        if kind == "auto":
            kind = "fourier" if fourier_ok else "timestep"
        if kind == "fourier":
            if not fourier_ok:
                raise ConfigError("[checks] oracle: the Fourier oracle needs the linear scalar_delay problem")
            m = p.meta
            ref = fourier_solution(m["a"], m["k"], m["c"], p.delay, p.period)(p.times)[:, None]
        else:
            ref = timestep_oracle(p, cfg.oracle_periods, cfg.oracle_substeps).values
        solution = 0.5 * (rep.lower.values + rep.upper.values)
        return solution, ref, kind

    def output_dir(self) -> Path:
        self.cfg.output.mkdir(parents=True, exist_ok=True)
        return self.cfg.output

    def write_json(self, code: int):
        self.report["exit_code"] = code
        path = self.output_dir() / "report.json"
        path.write_text(json.dumps(_jsonable(self.report), indent=2, sort_keys=True) + "\n")
        return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, Status):
        return obj.value
    return obj


def write_iterates(path: Path, rep, times: np.ndarray):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "node", "time", "component", "v", "w"])
        for step, (v, u) in enumerate(zip(rep.lower_iterates, rep.upper_iterates)):
            m, n = v.values.shape
            for j in range(m):
                tj = _fmt(times[j])
                for i in range(n):
                    w.writerow([step, j, tj, i, _fmt(v.values[j, i]), _fmt(u.values[j, i])])


def write_convergence(path: Path, rep, kappa):
    ratios = [math.nan] + rep.contraction_ratios
    lower = [math.nan] + rep.lower_steps
    upper = [math.nan] + rep.upper_steps
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "gap", "lower_step", "upper_step", "ratio", "kappa"])
        for step, gap in enumerate(rep.gaps):
            w.writerow([step, _fmt(gap), _fmt(lower[step]), _fmt(upper[step]),
                        _fmt(ratios[step]), _fmt(kappa)])


def write_oracle(path: Path, times, solution, ref):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "time", "component", "solver", "oracle", "error"])
        for j in range(solution.shape[0]):
            for i in range(solution.shape[1]):
                w.writerow([j, _fmt(times[j]), i, _fmt(solution[j, i]), _fmt(ref[j, i]),
                            _fmt(abs(solution[j, i] - ref[j, i]))])


# -- verbs -------------------------------------------------------------------------

def cmd_check(run: _Run) -> int:
    ok = run.brackets()
    if not ok:
        log.error("invalid lower/upper solution: %s", run.report["bracket"])
        return EXIT_HYPOTHESIS
    return EXIT_OK if run.hypotheses() else EXIT_HYPOTHESIS


def cmd_certify(run: _Run) -> int:
    cert = run.certificate()
    if cert is None:
        log.error("%s", run.report["certificate"]["error"])
        return EXIT_HYPOTHESIS
    print(f"kappa = {cert.kappa:.6g} ({'certified' if cert.certified else 'not certified'})")
    return EXIT_OK if cert.certified else EXIT_HYPOTHESIS


def _oracle_step(run: _Run, rep, out: Path) -> int:
    try:
        solution, ref, kind = run.oracle(rep)
    except DivergenceError as exc:
        run.report["oracle"] = {"error": str(exc)}
        log.error("%s", exc)
        return EXIT_ORACLE
    err = float(np.max(np.abs(solution - ref)))
    write_oracle(out / "oracle.csv", run.problem.times, solution, ref)
    ok = err <= run.cfg.oracle_bound
    run.report["oracle"] = {"kind": kind, "max_error": err, "bound": run.cfg.oracle_bound, "ok": ok}
    print(f"oracle ({kind}): max error {err:.3e} (bound {run.cfg.oracle_bound:.3e})")
    return EXIT_OK if ok else EXIT_ORACLE


def cmd_solve(run: _Run, oracle_only: bool = False) -> int:
    cfg = run.cfg
    if not oracle_only:
        if not run.brackets():
            log.error("invalid lower/upper solution: %s", run.report["bracket"])
            return EXIT_HYPOTHESIS
        if not run.hypotheses():
            return EXIT_HYPOTHESIS
    cert = run.certificate() if (not oracle_only and "certificate" in cfg.checks) else None
    if cert is None and not oracle_only:
        # the predicted rate is still useful in convergence.csv when the constants allow it
        try:
            kappa = uniqueness_certificate(run.problem, run.op, cfg.substeps).kappa
        except HypothesisError:
            kappa = None
    else:
        kappa = cert.kappa if cert is not None else None
    rep = run.solve()
    out = run.output_dir()
    if not oracle_only:
        write_iterates(out / "iterates.csv", rep, run.problem.times)
        write_convergence(out / "convergence.csv", rep, kappa)
    code = _STATUS_EXIT[rep.status]
    print(f"status: {rep.status.value} after {rep.iterations} iterations, gap {rep.gaps[-1]:.3e}")
    if code != EXIT_OK:
        return code
    if not oracle_only and "extremality" in cfg.checks:
        ok = extremality_check(run.problem, run.op, rep, cfg.probes, cfg.seed)
        run.report["extremality"] = {"ok": ok, "probes": cfg.probes}
        if not ok:
            code = EXIT_HYPOTHESIS
    if oracle_only or "oracle" in cfg.checks:
        oc = _oracle_step(run, rep, out)
        code = code or oc
    return code


def _sweep_one(cfg: RunConfig, nodes: int) -> dict:
    recipe = dataclasses.replace(cfg.recipe, nodes=nodes)
    run = _Run(cfg, recipe)
    rep = run.solve()
    row = {"nodes": nodes, "status": rep.status.value, "iterations": rep.iterations,
           "gap": rep.gaps[-1], "oracle": "", "max_error": math.nan}
    if rep.converged:
        try:
            solution, ref, kind = run.oracle(rep)
            row["oracle"], row["max_error"] = kind, float(np.max(np.abs(solution - ref)))
        except DivergenceError as exc:
            log.error("nodes=%d: %s", nodes, exc)
    return row


def cmd_sweep(cfg: RunConfig) -> int:
    if cfg.jobs > 1:
        with ThreadPoolExecutor(cfg.jobs) as pool:
            rows = list(pool.map(lambda m: _sweep_one(cfg, m), cfg.sweep_nodes))
    else:
        rows = [_sweep_one(cfg, m) for m in cfg.sweep_nodes]
    out = cfg.output
    out.mkdir(parents=True, exist_ok=True)
    prev = None
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["nodes", "status", "iterations", "gap", "oracle", "max_error", "error_ratio"])
        for r in rows:
            ratio = prev / r["max_error"] if prev and r["max_error"] > 0 else math.nan
            w.writerow([r["nodes"], r["status"], r["iterations"], _fmt(r["gap"]), r["oracle"],
                        _fmt(r["max_error"]), _fmt(ratio)])
            print(f"m={r['nodes']:>6}  {r['status']:<18} error {r['max_error']:.3e}")
            prev = r["max_error"] if math.isfinite(r["max_error"]) else None
    codes = [_STATUS_EXIT[Status(r["status"])] for r in rows]
    return max(codes)


VERBS = ("solve", "check", "certify", "oracle", "sweep")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="monoperiodic", description=__doc__.split("\n")[0])
    parser.add_argument("verb", choices=VERBS)
    parser.add_argument("config", help="TOML run configuration")
    parser.add_argument("-o", "--output", help=f"output directory (overrides the config and ${OUTPUT_ENV})")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    override = args.output or os.environ.get(OUTPUT_ENV)
    if override:
        cfg.output = Path(override)

    if args.verb == "sweep":
        try:
            return cmd_sweep(cfg)
        except (InvalidBracketError, HypothesisError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_HYPOTHESIS

    try:
        run = _Run(cfg)
    except (InvalidBracketError, HypothesisError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.verb == "check":
            code = cmd_check(run)
        elif args.verb == "certify":
            code = cmd_certify(run)
        elif args.verb == "oracle":
            code = cmd_solve(run, oracle_only=True)
        else:
            code = cmd_solve(run)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InvalidBracketError, HypothesisError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        run.report["error"] = str(exc)
        code = EXIT_HYPOTHESIS
    run.write_json(code)
    return code


if __name__ == "__main__":
    sys.exit(main())
