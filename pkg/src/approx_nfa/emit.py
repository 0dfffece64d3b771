"""Output emitters: JSON reports, sweep/candidate CSVs and plan tables.

Free functions; the caller passes its logger in.
"""

import csv
import json
import os
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence

from . import __version__
from .automata import Nfa, write_nfa
from .constants import SWEEP_CSV_COLUMNS
from .models import Candidate, Infeasible, PlanProblem, ReductionReport, StagePlan


def _jsonable(value):
    if isinstance(value, Fraction):
        return float(value)
    if isinstance(value, (set, frozenset, tuple)):
        return list(value)
    raise TypeError(f'{type(value).__name__} is not JSON serializable')


def dumps(data: dict) -> str:
    return json.dumps(data, indent=2, sort_keys=True, default=_jsonable)


def emit_json(data: dict, output_file: str, *, logger) -> None:
    payload = dict(data, tool_version=__version__)
    with open(output_file, 'w', encoding='utf-8') as f:
        f.write(dumps(payload) + '\n')
    logger.info('Wrote %s', output_file)


def report_path_for(nfa_path: str) -> str:
    """``out/x.nfa`` -> ``out/x.report.json``."""
    return os.path.splitext(nfa_path)[0] + '.report.json'


def emit_reduction(nfa: Nfa, report: ReductionReport, output_file: str, *, logger) -> str:
    """Reduced NFA plus its JSON report alongside; returns the report path."""
    write_nfa(nfa, output_file)
    report_file = report_path_for(output_file)
    data = report.to_dict()
    data['state_names'] = [nfa.state_name(q) for q in nfa.states]
    emit_json(data, report_file, logger=logger)
    logger.info('Reduced %d -> %d states (%s) into %s',
                report.states_before, report.states_after, report.method, output_file)
    return report_file


def emit_sweep_csv(rows: Iterable, output_file: str, *, logger) -> None:
    """One row per reduced automaton; rows provide ``csv_row()`` in SWEEP_CSV_COLUMNS order."""
    with open(output_file, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        writer.writerow(SWEEP_CSV_COLUMNS)
        count = 0
        for row in rows:
            writer.writerow(row.csv_row())
            count += 1
    logger.info('Wrote %d sweep rows to %s', count, output_file)


def emit_candidates_csv(candidates: Sequence[Candidate], output_file: str, *, logger) -> None:
    with open(output_file, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        writer.writerow(['id', 'lut', 'accpt', 'nfa_path', 'precise'])
        for c in candidates:
            writer.writerow([c.id, _number(c.lut), repr(float(c.accpt)), c.nfa_path or '',
                             'true' if c.precise else 'false'])
    logger.info('Wrote %d candidates to %s', len(candidates), output_file)


def _number(value) -> str:
    value = float(value)
    return str(int(value)) if value.is_integer() else repr(value)


def _luts(value) -> str:
    return f'{float(value):,.0f}'


def _gbps(value) -> str:
    return f'{float(value):g}'


def plan_table_lines(plans: Sequence[StagePlan],
                     budget: Optional[float] = None) -> List[str]:
    """One line per plan: stages, ``r x candidate`` per stage, total RSC, output."""
    width = max((len(p.stages) for p in plans), default=1)
    header = ['stages'] + [f'stage {i}' for i in range(1, width + 1)] + ['RSC', 'out Gbps']
    rows = [header]
    for plan in plans:
        cells = [str(len(plan.stages))]
        cells += [f'{s.replicas}x{s.candidate_id}' for s in plan.stages]
        cells += [''] * (width - len(plan.stages))
        rsc = _luts(plan.total_rsc)
        if budget is not None and plan.total_rsc > Fraction(str(budget)):
            rsc += ' (over budget)'
        cells += [rsc, _gbps(plan.output_rate)]
        rows.append(cells)
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    return ['  '.join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows]


def plan_result_lines(problem: PlanProblem, result) -> List[str]:
    if isinstance(result, Infeasible):
        return [f'infeasible ({result.binding}): {result.message}']
    lines = plan_table_lines([result], problem.max_luts)
    lines.append(f'total RSC {_luts(result.total_rsc)} LUTs, output {_gbps(result.output_rate)} Gbps')
    return lines


def sweep_grid_lines(cells: Sequence, max_luts: Optional[float] = None) -> List[str]:
    """Speed x stage-count grid of required LUTs; ``-`` where no plan exists, ``*`` over budget."""
    speeds = sorted({c.input_rate for c in cells})
    stage_counts = sorted({c.stages for c in cells})
    by_key = {(c.input_rate, c.stages): c for c in cells}
    rows = [['Gbps'] + [f'{n} stage(s)' for n in stage_counts]]
    for speed in speeds:
        row = [_gbps(speed)]
        for n in stage_counts:
            cell = by_key.get((speed, n))
            if cell is None or cell.plan is None:
                row.append('-')
            else:
                row.append(_luts(cell.total_rsc) + ('*' if cell.over_budget else ''))
        rows.append(row)
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = ['  '.join(cell.rjust(w) for cell, w in zip(r, widths)) for r in rows]
    if max_luts is not None:
        lines.append(f'* over the budget of {_luts(max_luts)} LUTs')
    return lines


def emit_lines(lines: Sequence[str], output_file: Optional[str], *, logger) -> None:
    """Write lines to a file, or print them when no file is given."""
    text = '\n'.join(lines) + '\n'
    if output_file:
        with open(output_file, 'w', encoding='utf-8') as f:
            f.write(text)
        logger.info('Wrote %s', output_file)
    else:
        print(text, end='')
