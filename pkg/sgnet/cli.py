"""sgnet cli."""

import argparse
import logging
import os
import sys
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

import libsgnet

log = logging.getLogger(__name__)

Report = Dict[str, Any]
CommandFunc = Callable[[libsgnet.AnalysisConfig, argparse.Namespace], bool]

SUBLEVEL_SLACK = 0.05


def get_parser() -> argparse.ArgumentParser:
    """Create the argument parser for the sgnet cli.

    Resulting args contain the special value `entrypoint_func` which
    is either a function which should be called with the config and args or
    `None` if no subcommand was selected.
    """
    parser = argparse.ArgumentParser("sgnet", description="Small-gain analysis of infinite networks.")
    parser.set_defaults(entrypoint_func=None, sections=())

    parser.add_argument("-c", "--config", help="location of the config file", required=True)
    parser.add_argument("-o", "--out", help="directory for the report files", default="out")
    parser.add_argument("--seed", help="seed of the randomized checks", type=int, default=0)
    parser.add_argument("--n-max", help="override analysis.n_max", type=int, default=None)
    parser.add_argument("-q", "--quiet", help="only log warnings", action="store_true", default=False)

    subparsers = parser.add_subparsers(title="commands", dest="command")

    def add_command(name: str, func: CommandFunc, sections: Sequence[str], help_text: str) -> None:
        p = subparsers.add_parser(name, help=help_text)
        p.set_defaults(entrypoint_func=func, sections=tuple(sections))

    add_command("analyze", _analyze_cmd, ("operator",), "estimate the spectral radius of the gain operator")
    add_command("certify", _certify_cmd, ("operator",), "synthesize and verify a point of strict decay")
    add_command("graph-check", _graph_check_cmd, ("operator",), "walk statistics of the gain graph")
    add_command("simulate", _simulate_cmd, ("example",), "simulate the example network and check V")
    add_command("full-report", _full_report_cmd, ("example",), "all of the above for the example network")

    return parser


def _out_path(args: argparse.Namespace, cfg: libsgnet.AnalysisConfig, name: str) -> str:
    return os.path.join(args.out, f"{cfg.report.prefix}-{name}")


def _write_report(args: argparse.Namespace, cfg: libsgnet.AnalysisConfig, report: Report) -> None:
    libsgnet.write_atomic(_out_path(args, cfg, f"{args.command}.txt"), libsgnet.human_repr(report))
    libsgnet.write_atomic(_out_path(args, cfg, f"{args.command}.tsv"),
                          libsgnet.format_records(libsgnet.report_records(report)))


def _rows_of(op: libsgnet.GainOperator) -> List[libsgnet.GainRow]:
    if isinstance(op, libsgnet.FiniteOperator):
        return list(op.rows)

    return list(op.prefix_rows + op.period_rows)


def _analyze_section(op: libsgnet.GainOperator, opts: libsgnet.AnalysisOptions, seed: int) -> Tuple[Report, bool]:
    kind = libsgnet.uniform_aggregation(op)
    verdict = libsgnet.small_gain_check(op, opts.n_max)
    est = verdict.estimate

    report: Report = {
        "operator": {
            "type": type(op).__name__,
            "aggregation": kind.value if kind else "heterogeneous",
            "well_definedness_bound": libsgnet.well_definedness_bound(op),
            "row_gain_bound": libsgnet.row_gain_bound(op),
        },
        "spectral": {
            "verdict": str(verdict),
            "certified_n": est.certified_n,
            "upper_bound": est.upper_bound,
            "ratio_bound": est.ratio_bound,
            "best_bound": est.best_bound,
            "norms": list(est.norms),
            "root_sequence": list(est.root_sequence),
        },
    }

    fit = libsgnet.uges_fit(op, libsgnet.LinfVector.ones(), opts.uges_k_max)
    report["uges_fit"] = {"M": fit.M, "a": fit.a, "uges": fit.uges}

    violations = {"homogeneity": 0, "monotonicity": 0, "subadditivity": 0}
    for i, row in enumerate(_rows_of(op)):
        if not row.entries:
            continue
        axioms = libsgnet.check_mhaf_axioms(row.aggregation, row.weights, opts.axiom_trials, seed + i)
        for axiom in violations:
            violations[axiom] += axioms.count(axiom)
    report["axioms"] = {"trials_per_row": opts.axiom_trials, **violations}
    axioms_ok = not any(violations.values())

    if isinstance(op, libsgnet.FiniteOperator) and kind is not None:
        oracles: Report = {}
        try:
            if kind is libsgnet.AggregationKind.SUM:
                oracles["perron"] = libsgnet.perron_oracle(op.to_matrix())
            elif kind is libsgnet.AggregationKind.MAX:
                oracles["max_cycle_mean"] = libsgnet.max_cycle_mean_oracle(op.to_matrix())
        except libsgnet.OracleError as e:
            oracles["error"] = str(e)
        if oracles:
            report["oracles"] = oracles

    log.info("small-gain check: %s", verdict)
    return report, verdict.satisfied and axioms_ok


def _certify_section(op: libsgnet.GainOperator, opts: libsgnet.AnalysisOptions) -> Tuple[Report, bool]:
    verdict = libsgnet.small_gain_check(op, opts.n_max)
    lam = opts.lam
    if lam is None:
        if not verdict.satisfied:
            return {"certificate": {"status": "none", "reason": f"small-gain check {verdict}"}}, False
        lam = libsgnet.default_lambda(verdict.estimate.best_bound)

    try:
        cert = libsgnet.synthesize_decay_point(op, lam, k_max=opts.k_max, tail_tol=opts.tail_tol, tol=opts.tol)
    except (libsgnet.DivergenceError, libsgnet.NotInteriorError) as e:
        return {"certificate": {"status": "none", "lambda": lam, "reason": str(e)}}, False

    body: Report = {
        "status": "valid" if cert.valid else "invalid",
        "lambda": cert.lam,
        "residual": cert.residual,
        "interiority": cert.interiority,
        "margin": cert.margin,
        "terms": cert.terms,
        "tolerance": cert.tolerance,
        "s0": cert.s0,
    }
    if cert.valid:
        M, a = libsgnet.uges_constants(cert)
        body["uges_constants"] = {"M": M, "a": a}

    return {"certificate": body}, cert.valid


def _graph_section(op: libsgnet.GainOperator, opts: libsgnet.AnalysisOptions) -> Tuple[Report, bool, libsgnet.GainGraph]:
    graph = libsgnet.build_graph(op)
    kind = libsgnet.uniform_aggregation(op)
    est = libsgnet.iterate_ones(op, max(opts.walk_lengths))

    walks: Report = {}
    holds = False
    for n in opts.walk_lengths:
        entry: Report = {
            "max_path_product": libsgnet.max_path_product(graph, n),
            "sum_path_products": libsgnet.sum_path_products(graph, n),
            "operator_norm": est.norms[n - 1],
        }
        try:
            oracle = libsgnet.enumerate_walks_oracle(graph, n)
        except libsgnet.WalkCapError:
            pass
        else:
            entry["oracle_max_product"] = oracle.max_product
            entry["oracle_max_sum"] = oracle.max_sum

        if kind is libsgnet.AggregationKind.MAX:
            value = entry["max_path_product"]
        elif kind is libsgnet.AggregationKind.SUM:
            value = entry["sum_path_products"]
        else:
            value = entry["operator_norm"]
        entry["condition_holds"] = value < 1
        holds = holds or value < 1
        walks[f"n{n}"] = entry

    report = {
        "graph": {"nodes": graph.node_count, "edges": graph.graph.number_of_edges(), "periodic": graph.is_periodic},
        "walks": walks,
    }
    return report, holds, graph


def _example_check_section(op: libsgnet.GainOperator, opts: libsgnet.AnalysisOptions) -> Tuple[Report, bool]:
    check = libsgnet.check_example_small_gain(op, opts.n_max)
    body: Report = {
        "aggregation": check.aggregation.value,
        "status": "PASS" if check.passed else "FAIL",
        "margin": check.margin,
        "graph_value": check.graph_value,
        "operator_check": str(check.verdict),
    }
    for row in check.rows:
        body[row.start] = {"value": row.value, "margin": row.margin, "products": dict(row.products)}
    if not check.passed:
        body["note"] = "walks of length 2 only give a sufficient condition, longer walks may still pass"

    return {"example_small_gain": body}, check.passed


def _sublevel_entry(values: np.ndarray, bound: float) -> Report:
    inside = values <= bound
    entered = int(np.argmax(inside)) if np.any(inside) else None
    stays = entered is not None and bool(np.all(inside[entered:]))
    return {"bound": bound, "entered_at_sample": entered, "stays": stays}


def _simulate_section(args: argparse.Namespace, cfg: libsgnet.AnalysisConfig,
                      op: libsgnet.GainOperator) -> Tuple[Report, bool]:
    ex, opts = cfg.example, cfg.analysis
    jobs = [libsgnet.SimulationJob.example(ex.params, N, ex.input, ex.horizon, ex.step) for N in ex.sizes]
    trajectories = libsgnet.simulate_sweep(jobs, ex.workers)

    stride = cfg.report.trajectory_stride
    for N, traj in zip(ex.sizes, trajectories):
        header = ["t"] + [f"x{i + 1}" for i in range(N)]
        rows = np.column_stack([traj.times, traj.states])[::stride]
        libsgnet.write_atomic(_out_path(args, cfg, f"trajectory-N{N}.tsv"), libsgnet.format_table(header, rows))

    finals = [float(traj.sup_norms()[-1]) for traj in trajectories]
    report: Report = {
        "simulation": {
            "sizes": list(ex.sizes),
            "horizon": ex.horizon,
            "step": ex.step,
            "input": ex.input,
            "terminal_sup_norms": finals,
            "terminal_spread": (max(finals) - min(finals)) / max(finals) if max(finals) > 0 else 0.0,
        },
    }

    try:
        cert = libsgnet.certify_operator(op, opts.n_max, opts.lam, k_max=opts.k_max, tail_tol=opts.tail_tol,
                                         tol=opts.tol)
    except libsgnet.NoCertificateError as e:
        log.warning("no composite Lyapunov function: %s", e)
        report["lyapunov"] = {"status": "no certificate", "reason": str(e)}
        return report, False

    cl = libsgnet.example_lyapunov(ex.params, cert, ex.input_slope)
    lyap: Report = {
        "status": "constructed",
        "lambda": cl.lam,
        "mu": cl.mu,
        "s0_min": cl.s0_min,
        "s0_max": cl.s0_max,
    }
    ok = True
    for N, traj, job in zip(ex.sizes, trajectories, jobs):
        implication = libsgnet.check_implication_along_trajectory(cl, traj, job.signal)
        iss = libsgnet.iss_bound_check(traj, cl, job.signal)
        values = libsgnet.evaluate_along(cl, traj.states)
        gamma = libsgnet.composite_external_gain(cl, job.signal.sup_norm)

        rows = [(v.t, v.V, v.bound, v.margin) for v in implication.violations]
        libsgnet.write_atomic(_out_path(args, cfg, f"violations-N{N}.tsv"),
                              libsgnet.format_table(["t", "V", "bound", "margin"], rows))

        entry: Report = {
            "V_initial": float(values[0]),
            "V_final": float(values[-1]),
            "strictly_decreasing": bool(np.all(np.diff(values) < 0)),
            "implication_checked": implication.checked,
            "implication_violations": len(implication.violations),
            "implication_worst_margin": implication.worst_margin,
            "slack_constant": implication.slack_constant,
            "slack_stable_under_halving": implication.stable_under_halving,
            "iss_passed": iss.passed,
            "iss_worst_margin": iss.worst_margin,
            "iss_worst_relative_margin": iss.worst_relative_margin,
            "iss_worst_time": iss.worst_time,
        }
        if job.signal.sup_norm > 0:
            entry["sublevel"] = _sublevel_entry(values, gamma * (1.0 + SUBLEVEL_SLACK))
        lyap[f"N{N}"] = entry
        ok = ok and implication.ok and iss.passed

    report["lyapunov"] = lyap
    return report, ok


def _analyze_cmd(cfg: libsgnet.AnalysisConfig, args: argparse.Namespace) -> bool:
    """Analyze command."""
    report, ok = _analyze_section(cfg.build_operator(), cfg.analysis, args.seed)
    _write_report(args, cfg, report)
    return ok


def _certify_cmd(cfg: libsgnet.AnalysisConfig, args: argparse.Namespace) -> bool:
    """Certify command."""
    report, ok = _certify_section(cfg.build_operator(), cfg.analysis)
    _write_report(args, cfg, report)
    return ok


def _write_edges(args: argparse.Namespace, cfg: libsgnet.AnalysisConfig, graph: libsgnet.GainGraph) -> None:
    if cfg.report.edge_list:
        lines = libsgnet.edge_list_lines(graph)
        libsgnet.write_atomic(_out_path(args, cfg, "graph.edges"), "".join(f"{line}\n" for line in lines))


def _graph_check_cmd(cfg: libsgnet.AnalysisConfig, args: argparse.Namespace) -> bool:
    """Graph-check command."""
    report, ok, graph = _graph_section(cfg.build_operator(), cfg.analysis)
    _write_edges(args, cfg, graph)
    _write_report(args, cfg, report)
    return ok


def _simulate_cmd(cfg: libsgnet.AnalysisConfig, args: argparse.Namespace) -> bool:
    """Simulate command."""
    op = libsgnet.derive_example_gains(cfg.example.params)
    report, ok = _simulate_section(args, cfg, op)
    _write_report(args, cfg, report)
    return ok


def _full_report_cmd(cfg: libsgnet.AnalysisConfig, args: argparse.Namespace) -> bool:
    """Full-report command.

    Runs every analysis on the operator derived from the example section.
    """
    op = libsgnet.derive_example_gains(cfg.example.params)
    report: Report = {}
    results = []

    section, ok = _analyze_section(op, cfg.analysis, args.seed)
    report.update(section)
    results.append(ok)

    section, ok = _certify_section(op, cfg.analysis)
    report.update(section)
    results.append(ok)

    section, ok, graph = _graph_section(op, cfg.analysis)
    report.update(section)
    results.append(ok)
    _write_edges(args, cfg, graph)

    section, ok = _example_check_section(op, cfg.analysis)
    report.update(section)
    results.append(ok)

    section, ok = _simulate_section(args, cfg, op)
    report.update(section)
    results.append(ok)

    _write_report(args, cfg, report)
    return all(results)


def _load_config(args: argparse.Namespace) -> libsgnet.AnalysisConfig:
    cfg = libsgnet.load_config(args.config, args.sections)
    if args.n_max is not None:
        cfg.analysis = cfg.analysis.model_copy(update={"n_max": args.n_max})

    return cfg


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point for the cli.

    Returns:
        Exit status. 0 if every requested check passed, 1 if one failed or
        was inconclusive, 2 for usage and configuration errors.
    """
    parser = get_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")

    func = args.entrypoint_func
    if func is None:
        parser.print_usage(sys.stderr)
        return 2

    if args.n_max is not None and args.n_max < 1:
        print("--n-max: must be positive", file=sys.stderr)
        return 2

    try:
        cfg = _load_config(args)
    except libsgnet.ConfigError as e:
        print(e, file=sys.stderr)
        return 2
    except OSError as e:
        print(f"can't read config: {e}", file=sys.stderr)
        return 2

    os.makedirs(args.out, exist_ok=True)
    try:
        ok = func(cfg, args)
    except (ValueError, ArithmeticError) as e:
        sys.exit(str(e))

    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
