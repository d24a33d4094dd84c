"""Command-line front end: ``evolve``, ``coeffs``, ``verify`` and ``bench``.

Errors leave one JSON line on stderr (``{"error": code, "exit": n, ...}``)
and exit with the code of the failure class.
"""

from __future__ import annotations

import argparse
import itertools
import json
import os
import sys
import time

import numpy as np
import scipy.linalg

from .checks import run_suite
from .config import load_config, parse_config
from .eigenbasis import convergence_diagnostic, expansion_coefficients
from .errors import ConfigError, DimensionCapError, LindbladModesError
from .evolution import (
    ORACLE_DIM_CAP,
    closed_form_supported,
    eigen_table,
    evolve_closed_form,
    evolve_eigenmode,
    evolve_oracle,
    observables,
    state_dump_lines,
    to_csv,
)
from .models import liouvillian
from .operators import build_state, read_matrix_file, trace_distance
from .superalgebra import to_matrix, unvec, vec


def _emit(text, out):
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _initial_state(cfg):
    return build_state(cfg.initial, cfg.model.dims, strict=cfg.strict)


def _run_method(cfg, method, rho0):
    if method == "eigenmode":
        return evolve_eigenmode(cfg.model, rho0, cfg.grid, cfg.max_index, cfg.strict,
                                cfg.branch, initial=cfg.initial)
    if method == "oracle":
        return evolve_oracle(cfg.model, rho0, cfg.grid, cfg.oracle_kind, cfg.oracle_step,
                             pad=cfg.oracle_pad,
                             initial=cfg.initial if cfg.initial.kind != "explicit" else None)
    return evolve_closed_form(cfg.model, cfg.initial, cfg.grid)


def run_evolve(cfg, out=None):
    """Evolve, write the observable CSV (plus optional state dump and figure); returns the table."""
    rho0 = _initial_state(cfg)
    reference = read_matrix_file(cfg.reference) if cfg.reference else rho0
    if cfg.method == "all":
        methods = ["eigenmode", "oracle"]
        if closed_form_supported(cfg.model, cfg.initial):
            methods.append("closed-form")
    else:
        methods = [cfg.method]
    results = {m: _run_method(cfg, m, rho0) for m in methods}
    table = {}
    for name, res in results.items():
        obs = observables(res, cfg.observables, reference)
        prefix = f"{name}." if len(results) > 1 else ""
        table.update({prefix + k: v for k, v in obs.items()})
    for a, b in itertools.combinations(methods, 2):
        table[f"td.{a}-{b}"] = np.array([trace_distance(x, y) for x, y in
                                         zip(results[a].states, results[b].states)])
    times = cfg.grid.times
    path = out or cfg.output_path
    _emit(to_csv(times, table), path)
    stem = os.path.splitext(path)[0] if path else "evolve"
    if cfg.dump_states:
        for name, res in results.items():
            suffix = "" if len(results) == 1 else f".{name}"
            with open(f"{stem}{suffix}.states.txt", "w", encoding="utf-8") as fh:
                fh.write("\n".join(state_dump_lines(res)) + "\n")
    if cfg.figure:
        from .plotting import plot_observables

        figure = cfg.figure if cfg.figure not in ("true", "auto") else f"{stem}.png"
        plot_observables(times, table, figure,
                         title=f"{cfg.model.tag}, {cfg.initial.kind} start")
    return table


def run_coeffs(cfg, out=None, zeros=False):
    """Coefficient table lines followed by the convergence diagnostic line."""
    rho0 = _initial_state(cfg)
    table = eigen_table(cfg.model, rho0, cfg.max_index, cfg.branch, cfg.initial)
    report = convergence_diagnostic(table, rho0)
    lines = ["# idx... re(lambda) im(lambda) re(C) im(C)"]
    for idx, line in zip(table.indices, table.to_lines()):
        if zeros or table.coefficients[idx] != 0:
            lines.append(line)
    lines.append(f"# diagnostic {report.summary()} worst_element={report.worst_element}")
    _emit("\n".join(lines) + "\n", out or cfg.output_path)
    return table, report


def run_verify(suite, seed=42, out=None):
    records = run_suite(suite, seed)
    passed = all(r.passed for r in records)
    doc = {"suite": suite, "seed": seed, "passed": passed,
           "records": [r.to_dict() for r in records]}
    _emit(json.dumps(doc, indent=1) + "\n", out)
    return passed, records


def _timed(fn):
    start = time.perf_counter()
    value = fn()
    return value, time.perf_counter() - start


def run_bench(cfg, out=None):
    """Eigenmode against per-point oracle exponentials (or the stepper) over the grid."""
    rho0 = _initial_state(cfg)
    times = cfg.grid.times
    n = len(times)

    def setup_eigen():
        # both methods must see the same truncated matrix, so no exact coherent shortcut here
        table = expansion_coefficients(cfg.model, rho0, cfg.max_index, cfg.branch)
        table.engine()
        convergence_diagnostic(table, rho0)
        return table

    table, eig_setup = _timed(setup_eigen)
    eig_states, eig_eval = _timed(lambda: [table.weighted_sum(t) for t in times])

    kind = cfg.oracle_kind if cfg.oracle_kind != "auto" else "exp"
    if kind == "exp":
        side = rho0.side
        if side > ORACLE_DIM_CAP:
            raise DimensionCapError(f"total dimension {side} exceeds oracle cap {ORACLE_DIM_CAP}")
        K, orc_setup = _timed(lambda: to_matrix(liouvillian(cfg.model)))
        v0 = vec(rho0.entries)
        orc_states, orc_eval = _timed(
            lambda: [unvec(scipy.linalg.expm(K * t) @ v0, side) for t in times])
        oracle_meta = {"kind": "exp-per-point"}
    else:
        res, orc_eval = _timed(lambda: evolve_oracle(cfg.model, rho0, cfg.grid, "stepper",
                                                     cfg.oracle_step))
        orc_setup = 0.0
        orc_states = [s.entries for s in res.states]
        oracle_meta = {"kind": "stepper", "step": float(res.meta["step"])}

    dist = max(0.5 * float(np.sum(np.linalg.svd(a - b, compute_uv=False)))
               for a, b in zip(eig_states, orc_states))
    doc = {
        "model": cfg.model.tag, "dims": list(cfg.model.dims), "points": n,
        "eigenmode": {"setup_s": eig_setup, "per_point_s": eig_eval / n,
                      "total_s": eig_setup + eig_eval, "terms": len(table.nonzero)},
        "oracle": dict(oracle_meta, setup_s=orc_setup, per_point_s=orc_eval / n,
                       total_s=orc_setup + orc_eval),
        "max_trace_distance": dist,
    }
    doc["per_point_ratio"] = doc["oracle"]["per_point_s"] / max(doc["eigenmode"]["per_point_s"], 1e-300)
    _emit(json.dumps(doc, indent=1) + "\n", out)
    return doc


def build_parser():
    parser = argparse.ArgumentParser(prog="lindblad-modes", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (("evolve", "evolve a configured initial state"),
                           ("coeffs", "dump expansion coefficients and the convergence diagnostic"),
                           ("verify", "run invariant suites and report JSON"),
                           ("bench", "time eigenmode evaluation against the oracle")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="run configuration file")
        p.add_argument("--out", help="output file (default: config output.path or stdout)")
        p.add_argument("--seed", type=int, default=None, help="random seed (default 42)")
        p.add_argument("--strict", action="store_true", help="turn truncation warnings into errors")
        if name == "verify":
            p.add_argument("--suite", default="all",
                           help="algebra, eigen, closed-form, oracle or all")
        if name == "coeffs":
            p.add_argument("--zeros", action="store_true", help="also list zero coefficients")
    return parser


def _config(args):
    if not args.config:
        raise ConfigError(f"{args.command} needs --config")
    cfg = load_config(args.config)
    if args.strict:
        cfg.strict = True
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _fail(code, exit_code, message):
    sys.stderr.write(json.dumps({"error": code, "exit": exit_code, "message": message}) + "\n")
    return exit_code


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            seed = args.seed
            if seed is None:
                seed = _config(args).seed if args.config else 42
            passed, _ = run_verify(args.suite, seed, args.out)
            return 0 if passed else 1
        cfg = _config(args)
        if args.command == "evolve":
            run_evolve(cfg, args.out)
        elif args.command == "coeffs":
            run_coeffs(cfg, args.out, zeros=args.zeros)
        else:
            run_bench(cfg, args.out)
        return 0
    except LindbladModesError as exc:
        return _fail(exc.code, exc.exit_code, str(exc))
    except KeyError as exc:
        return _fail("parse-error", 2, str(exc))
    except OSError as exc:
        return _fail("io-error", 7, str(exc))


def parse_and_run(text, command="evolve", out=None):
    """Library entry used by tests: run a subcommand on config text."""
    cfg = parse_config(text)
    if command == "evolve":
        return run_evolve(cfg, out)
    if command == "coeffs":
        return run_coeffs(cfg, out)
    return run_bench(cfg, out)


if __name__ == "__main__":
    sys.exit(main())
