"""Command line interface for approx-nfa."""

import argparse
import logging
import os
import sys
from dataclasses import replace
from typing import List, Optional, Tuple

from . import __version__
from .automata import export_dot, read_nfa, write_nfa
from .constants import (
    DEFAULT_EXPANSION_CAP,
    EXIT_INPUT_FORMAT,
    EXIT_OK,
    METHOD_BFS,
    METHODS,
    OPT_OUT,
    OPT_RSC,
)
from .cost import resolve_cost_model
from .emit import (
    dumps,
    emit_candidates_csv,
    emit_json,
    emit_lines,
    emit_reduction,
    emit_sweep_csv,
    plan_result_lines,
    plan_table_lines,
    sweep_grid_lines,
)
from .evaluate import compare_rules, evaluate
from .labelling import label, read_labeling, write_labeling
from .models import (
    ApproxNfaError,
    Infeasible,
    InfeasiblePlanError,
    InvariantViolationError,
    PlanProblem,
    RuleSet,
    UsageError,
)
from .planner import (
    enumerate_plans,
    is_feasible,
    load_problem_mapping,
    precise_bound,
    problem_from_mapping,
    solve,
    sweep,
    usable_luts,
)
from .planner import engine_throughput as tp_from_width
from .recompile import compile_ruleset, read_rules
from .reduce import reduce_nfa, substitute_external
from .runner import grid_points, load_pipeline_config, pareto_candidates, run_pipeline
from .traffic import TrafficSample, load_sample, load_samples, write_raw
from .utils import parse_grid, resolve_workers, setup_logging


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        '-v', '--verbose',
        action='count',
        default=1,
        help="Increase verbosity level (-v for debug output)"
    )
    common.add_argument(
        '-q', '--quiet',
        action='store_true',
        help="Quiet mode (errors only)"
    )
    common.add_argument(
        '--json',
        action='store_true',
        help="Print a machine-readable JSON summary on stdout"
    )
    common.add_argument(
        '--workers',
        type=int,
        help="Worker processes for labelling, evaluation and sweeps "
             "(default: $APPROX_NFA_WORKERS or 1)"
    )
    return common


def _sample_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--max-packets', type=int, help="Read at most this many packets per trace")
    parser.add_argument('--truncate', type=int, help="Truncate payloads to this many bytes")


def create_parser() -> argparse.ArgumentParser:
    """Create the command line argument parser."""
    common = _common_options()
    parser = argparse.ArgumentParser(
        prog='approx-nfa',
        description="Traffic-driven approximate NFA reduction and multi-stage matcher planning",
        epilog="For trade-off plots of a sweep CSV, use: approx-nfa-plot <sweep.csv>"
    )
    parser.add_argument('--version', action='version', version=f'approx-nfa {__version__}')
    sub = parser.add_subparsers(dest='command', required=True, metavar='COMMAND')

    p = sub.add_parser('compile', parents=[common], help="Compile a rule file or patterns to an NFA")
    p.add_argument('rules', nargs='?', help="Rule file (id<TAB>pattern per line)")
    p.add_argument('-e', '--pattern', action='append', default=[],
                   help="Pattern to compile (repeatable; ids r1, r2, ...)")
    p.add_argument('-o', '--output', required=True, help="Output NFA file")
    p.add_argument('--expansion-cap', type=int, default=DEFAULT_EXPANSION_CAP,
                   help="Maximum copies made when expanding {m,n} (default: 64)")

    p = sub.add_parser('label', parents=[common], help="Label NFA states with their significance")
    p.add_argument('nfa', help="NFA file")
    p.add_argument('traces', nargs='+', help="Training traces (pcap or raw)")
    p.add_argument('-o', '--output', required=True, help="Output labeling CSV")
    _sample_options(p)

    p = sub.add_parser('reduce', parents=[common], help="Reduce an NFA approximately")
    p.add_argument('nfa', help="NFA file")
    p.add_argument('-m', '--method', choices=METHODS, default='prune', help="Reduction method")
    p.add_argument('--theta', type=str, default='1', help="Reduction ratio in (0,1] (default: 1)")
    p.add_argument('-D', '--distance', type=str, help="Distance ceiling D >= 1 (merge)")
    p.add_argument('-F', '--frequency', type=str, help="Frequency ceiling F in (0,1] (merge)")
    p.add_argument('-l', '--labeling', help="Labeling CSV of the NFA")
    p.add_argument('--external', help="Use an externally reduced NFA file instead, after an "
                                      "inclusion check on --sample")
    p.add_argument('--sample', help="Trace whose packets the external NFA must still accept")
    p.add_argument('-o', '--output', required=True, help="Output NFA file (report written alongside)")

    p = sub.add_parser('eval', parents=[common], help="Evaluate a reduced NFA against the precise one")
    p.add_argument('precise', help="Precise NFA file")
    p.add_argument('reduced', help="Reduced NFA file")
    p.add_argument('traces', nargs='+', help="Testing traces (pcap or raw)")
    p.add_argument('-o', '--output', help="Write the JSON report here")
    p.add_argument('--strict', action='store_true',
                   help="Exit 5 when the reduced NFA rejects a packet the precise one accepts")
    p.add_argument('--per-rule', action='store_true', help="Include per-rule hit counts")
    _sample_options(p)

    p = sub.add_parser('pareto', parents=[common], help="Sweep reductions and keep the Pareto set")
    p.add_argument('nfa', help="Precise NFA file")
    p.add_argument('-l', '--labeling', required=True, help="Labeling CSV of the NFA")
    p.add_argument('-t', '--test', nargs='+', required=True, help="Testing traces")
    p.add_argument('--methods', default='prune', help="Comma-separated methods (default: prune)")
    p.add_argument('--thetas', default='0.1,0.2,0.5,1', help="Comma-separated theta grid")
    p.add_argument('--distances', default='1.005', help="Comma-separated D grid")
    p.add_argument('--frequencies', default='0.1', help="Comma-separated F grid")
    p.add_argument('--cost-model', help="Cost model file (default: auto-discovered "
                                        "./approx-nfa-cost.conf or ~/.config/approx-nfa/cost.conf)")
    p.add_argument('--overrides', help="LUT override CSV (candidate_id,luts)")
    p.add_argument('--state-weight', type=float, help="LUTs per state")
    p.add_argument('--transition-weight', type=float, help="LUTs per transition class")
    p.add_argument('--overhead', type=float, help="Fixed LUTs per automaton")
    p.add_argument('--no-precise', action='store_true', help="Leave the precise NFA out")
    p.add_argument('-o', '--output', required=True, help="Candidate CSV for 'plan'")
    p.add_argument('--sweep-csv', help="Write every evaluated point here")
    p.add_argument('--out-dir', help="Directory for reduced NFAs (default: next to --output)")

    p = sub.add_parser('plan', parents=[common], help="Solve OPT_RSC / OPT_out over candidates")
    p.add_argument('problem', nargs='?', help="Problem file (JSON or TOML)")
    p.add_argument('-c', '--candidates', help="Candidate CSV (id,lut,accpt)")
    p.add_argument('--input-rate', type=float, help="Input traffic out_0 in Gbps")
    p.add_argument('--throughput', type=float, help="Engine throughput TP in Gbps")
    p.add_argument('--width-bits', type=int, help="Engine input width (with --clock-mhz)")
    p.add_argument('--clock-mhz', type=float, help="Engine clock (with --width-bits)")
    p.add_argument('--objective', choices=[OPT_RSC, OPT_OUT], help="rsc: minimise LUTs; out: minimise output")
    p.add_argument('-X', '--max-output', type=float, help="Output bound X in Gbps")
    p.add_argument('-Y', '--max-luts', type=float, help="Resource bound Y in LUTs")
    p.add_argument('--chip-luts', type=int, help="Derive Y from the chip's LUT count")
    p.add_argument('-n', '--stages', type=int, help="Maximum number of stages")
    p.add_argument('--exact-stages', action='store_true', help="Use exactly --stages stages")
    p.add_argument('--precise-bound', action='store_true',
                   help="Set X to the output of the precise candidate alone")
    p.add_argument('--enumerate', action='store_true', help="List every admissible plan")
    p.add_argument('--sweep-speeds', help="Comma-separated input speeds: print the RSC grid")
    p.add_argument('-o', '--output', help="Write the plan JSON here")

    p = sub.add_parser('export-dot', parents=[common], help="Export an NFA as Graphviz DOT")
    p.add_argument('nfa', help="NFA file")
    p.add_argument('-l', '--labeling', help="Colour states by significance")
    p.add_argument('-o', '--output', required=True, help="Output DOT file")

    p = sub.add_parser('ingest', parents=[common], help="Convert traces to the raw sample format")
    p.add_argument('traces', nargs='+', help="Input traces (pcap or raw)")
    p.add_argument('-o', '--output', required=True, help="Output raw sample")
    _sample_options(p)

    p = sub.add_parser('pipeline', parents=[common], help="Run compile -> label -> pareto -> plan")
    p.add_argument('config', help="Pipeline config (JSON or TOML)")

    return parser


def _read_traces(paths: List[str], args, workers: int) -> TrafficSample:
    if args.max_packets is None and args.truncate is None:
        return load_samples(paths, workers)
    total = TrafficSample()
    for path in paths:
        total = total + load_sample(path, args.max_packets, args.truncate)
    return total


def cmd_compile(args, logger, workers) -> dict:
    if args.rules and args.pattern:
        raise UsageError('give a rule file or --pattern, not both')
    if args.rules:
        rules = read_rules(args.rules)
    elif args.pattern:
        rules = RuleSet(tuple((f'r{i}', p) for i, p in enumerate(args.pattern, start=1)))
    else:
        raise UsageError('nothing to compile: give a rule file or --pattern')
    nfa = compile_ruleset(rules, args.expansion_cap)
    write_nfa(nfa, args.output)
    logger.info('Compiled %d rule(s) into %d states -> %s', len(rules), nfa.num_states, args.output)
    return {'rules': len(rules), 'states': nfa.num_states,
            'transitions': nfa.transition_count, 'output': args.output}


def cmd_label(args, logger, workers) -> dict:
    nfa = read_nfa(args.nfa)
    sample = _read_traces(args.traces, args, workers)
    labeling = label(nfa, sample, workers)
    write_labeling(labeling, args.output)
    logger.info('Labelled %d states over %d packets -> %s',
                nfa.num_states, sample.total_packets, args.output)
    return {'states': nfa.num_states, 'sample_size': labeling.sample_size,
            'skipped_frames': sample.skipped_frames, 'output': args.output}


def cmd_reduce(args, logger, workers) -> dict:
    nfa = read_nfa(args.nfa)
    if args.external:
        sample = load_sample(args.sample) if args.sample else None
        reduced, report = substitute_external(nfa, args.external, sample)
    else:
        labeling = read_labeling(args.labeling, nfa) if args.labeling else None
        if labeling is None and args.method != METHOD_BFS:
            raise UsageError(f'method {args.method} needs --labeling')
        reduced, report = reduce_nfa(nfa, args.method, labeling, theta=args.theta,
                                     distance_ceiling=args.distance,
                                     frequency_ceiling=args.frequency)
    emit_reduction(reduced, report, args.output, logger=logger)
    return dict(report.to_dict(), output=args.output)


def cmd_eval(args, logger, workers) -> dict:
    precise = read_nfa(args.precise)
    reduced = read_nfa(args.reduced)
    sample = _read_traces(args.traces, args, workers)
    result = evaluate(precise, reduced, sample, workers)
    data = result.to_dict()
    if args.per_rule:
        data['rules'] = [{'rule': h.rule_id, 'precise': h.precise, 'reduced': h.reduced}
                         for h in compare_rules(precise, reduced, sample)]
    if args.output:
        emit_json(data, args.output, logger=logger)
    logger.info('AP %.4f  Prob %.4f  (tp %d, fp %d, fn %d, |S| %d)%s',
                result.ap, result.prob, result.a_tp, result.a_fp, result.a_fn,
                result.sample_size, ' no acceptances' if result.no_acceptances else '')
    if args.strict and result.violation:
        raise InvariantViolationError(
            f'reduced NFA rejects {result.a_fn} packet(s) accepted by the precise NFA')
    return data


def cmd_pareto(args, logger, workers) -> dict:
    nfa = read_nfa(args.nfa)
    labeling = read_labeling(args.labeling, nfa)
    test = load_samples(args.test, workers)
    model = resolve_cost_model(
        args.cost_model,
        inline={'state_weight': args.state_weight, 'transition_weight': args.transition_weight,
                'overhead': args.overhead},
        overrides_path=args.overrides)
    points = grid_points([m.strip() for m in args.methods.split(',') if m.strip()],
                         parse_grid(args.thetas), parse_grid(args.distances),
                         parse_grid(args.frequencies))
    out_dir = args.out_dir or os.path.join(os.path.dirname(os.path.abspath(args.output)),
                                           'candidates')
    rows, candidates = pareto_candidates(nfa, labeling, test, points, model, out_dir,
                                         not args.no_precise, workers, logger)
    if args.sweep_csv:
        emit_sweep_csv(rows, args.sweep_csv, logger=logger)
    emit_candidates_csv(candidates, args.output, logger=logger)
    return {'evaluated': len(rows), 'candidates': [c.id for c in candidates],
            'output': args.output}


def _problem_from_args(args) -> Tuple[PlanProblem, bool]:
    """Problem file overlaid with command line values; second item: derive X per speed."""
    data = load_problem_mapping(args.problem) if args.problem else {}
    base_dir = os.path.dirname(os.path.abspath(args.problem)) if args.problem else '.'
    if args.width_bits is not None or args.clock_mhz is not None:
        if args.width_bits is None or args.clock_mhz is None:
            raise UsageError('--width-bits and --clock-mhz go together')
        data['engine_throughput'] = float(tp_from_width(args.width_bits, args.clock_mhz))
    elif args.throughput is not None:
        data['engine_throughput'] = args.throughput
    if args.chip_luts is not None:
        data['max_luts'] = usable_luts(args.chip_luts)
    for key, value in (('input_rate', args.input_rate), ('objective', args.objective),
                       ('max_output', args.max_output), ('max_luts', args.max_luts),
                       ('max_stages', args.stages)):
        if value is not None:
            data[key] = value
    if args.candidates:
        data['candidates'] = os.path.abspath(args.candidates)
    if args.exact_stages:
        data['exact_stages'] = True
    if not args.problem and ('candidates' not in data or 'input_rate' not in data
                             or 'engine_throughput' not in data):
        raise UsageError('need a problem file, or --candidates with --input-rate and '
                         '--throughput (or --width-bits/--clock-mhz)')
    derive = args.precise_bound or (bool(args.sweep_speeds) and data.get('max_output') is None)
    objective = data.get('objective', OPT_RSC)
    if objective == OPT_RSC and data.get('max_output') is None and not derive:
        raise UsageError('OPT_RSC needs -X/--max-output or --precise-bound')
    if derive and data.get('max_output') is None:
        data['max_output'] = 1.0  # replaced by the precise bound below
    problem = problem_from_mapping(data, base_dir, args.problem or 'command line')
    if derive:
        problem = replace(problem, max_output=float(precise_bound(problem)))
    return problem, derive


def cmd_plan(args, logger, workers) -> dict:
    problem, derive = _problem_from_args(args)
    if args.sweep_speeds:
        cells = sweep(problem, parse_grid(args.sweep_speeds), per_speed_bound=derive)
        if not args.json:
            emit_lines(sweep_grid_lines(cells, problem.max_luts), None, logger=logger)
        return {'sweep': [{'input_rate': c.input_rate, 'stages': c.stages,
                           'max_output': c.max_output,
                           'rsc': c.total_rsc, 'over_budget': c.over_budget,
                           'plan': list(c.plan.candidate_ids) if c.plan else None}
                          for c in cells]}
    data: dict = {}
    if args.enumerate:
        plans = enumerate_plans(problem)
        if not args.json:
            emit_lines(plan_table_lines(plans, problem.max_luts), None, logger=logger)
        data['plans'] = [dict(p.to_dict(), feasible=is_feasible(problem, p)) for p in plans]
    result = solve(problem)
    data.update(result.to_dict())
    if not args.json:
        emit_lines(plan_result_lines(problem, result), None, logger=logger)
    if args.output:
        emit_json(data, args.output, logger=logger)
    if isinstance(result, Infeasible):
        if args.json:
            print(dumps(data))
        raise InfeasiblePlanError(result)
    return data


def cmd_export_dot(args, logger, workers) -> dict:
    nfa = read_nfa(args.nfa)
    labeling = read_labeling(args.labeling, nfa) if args.labeling else None
    export_dot(nfa, labeling, args.output)
    logger.info('Wrote %s', args.output)
    return {'states': nfa.num_states, 'output': args.output}


def cmd_ingest(args, logger, workers) -> dict:
    sample = _read_traces(args.traces, args, workers)
    write_raw(sample, args.output)
    logger.info('%d packets (%d distinct, %d bytes) -> %s', sample.total_packets, len(sample),
                sample.total_bytes, args.output)
    return {'packets': sample.total_packets, 'distinct': len(sample),
            'bytes': sample.total_bytes, 'frames': sample.frames,
            'skipped_frames': sample.skipped_frames, 'output': args.output}


def cmd_pipeline(args, logger, workers) -> dict:
    config = load_pipeline_config(args.config)
    if args.workers is not None:
        config.workers = workers
    result = run_pipeline(config, logger=logger)
    data = {'nfa': result.nfa_path, 'labeling': result.labeling_path,
            'sweep_csv': result.sweep_csv, 'candidates_csv': result.candidates_csv,
            'candidates': [c.id for c in result.candidates]}
    if result.plan is not None:
        data['plan'] = result.plan.to_dict()
        if isinstance(result.plan, Infeasible):
            raise InfeasiblePlanError(result.plan)
    return data


COMMANDS = {
    'compile': cmd_compile,
    'label': cmd_label,
    'reduce': cmd_reduce,
    'eval': cmd_eval,
    'pareto': cmd_pareto,
    'plan': cmd_plan,
    'export-dot': cmd_export_dot,
    'ingest': cmd_ingest,
    'pipeline': cmd_pipeline,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for the CLI."""
    try:
        parser = create_parser()
        args = parser.parse_args(argv)
        verbosity_level = 0 if args.quiet else args.verbose
        logger = setup_logging(verbosity_level)
        workers = resolve_workers(args.workers)
        data = COMMANDS[args.command](args, logger, workers)
        if args.json:
            print(dumps(data))
        return EXIT_OK
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_OK
    except KeyboardInterrupt:
        print("\nOperation cancelled by user", file=sys.stderr)
        return 130
    except ApproxNfaError as e:
        print(f"error: {e.code}: {e}", file=sys.stderr)
        return e.exit_code
    except FileNotFoundError as e:
        print(f"error: MISSING_INPUT: {e}", file=sys.stderr)
        return EXIT_INPUT_FORMAT
    except Exception as e:
        print(f"error: ERROR: {e}", file=sys.stderr)
        if logging.getLogger().isEnabledFor(logging.DEBUG):
            import traceback
            traceback.print_exc()
        return 1


if __name__ == '__main__':
    sys.exit(main())
