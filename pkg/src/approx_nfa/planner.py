"""Multi-stage matcher configuration: OPT_RSC and OPT_out by exact search.

Stage i runs ``r_i = ceil(out_{i-1} / TP)`` copies of its candidate and lets
``out_i = out_0 * accpt_i`` through; the plan costs ``sum r_i * lut_i`` LUTs.
Candidates of consecutive stages must have non-increasing accpt. All
arithmetic uses Fractions built from the decimal text of the inputs, so
ceil(20 / 6.4) is 4 exactly.
"""

import csv
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

from .constants import DEFAULT_LUT_UTILISATION, DEFAULT_RESERVED_LUTS, OPT_OUT, OPT_RSC
from .models import (
    Candidate,
    ConfigError,
    Infeasible,
    PlanProblem,
    StageAssignment,
    StagePlan,
    UsageError,
)
from .utils import exact

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

logger = logging.getLogger(__name__)

PlanResult = Union[StagePlan, Infeasible]


def engine_throughput(width_bits: int, clock_mhz: float) -> Fraction:
    """Gbps of one engine reading ``width_bits`` per cycle: 32 bit at 200 MHz is 6.4."""
    return exact(width_bits) * exact(clock_mhz) / 1000


def usable_luts(chip_luts: int, utilisation: float = DEFAULT_LUT_UTILISATION,
                reserved: int = DEFAULT_RESERVED_LUTS) -> int:
    """LUTs left for matchers once routing headroom and packet I/O are taken."""
    return math.floor(exact(chip_luts) * exact(utilisation) - reserved)


def precise_bound(problem: PlanProblem) -> Fraction:
    """X of the "Precise" setting: the output of the precise automaton alone."""
    return exact(problem.input_rate) * exact(problem.precise.accpt)


def _ceil(value: Fraction) -> int:
    return -(-value.numerator // value.denominator)


def evaluate_assignment(problem: PlanProblem, candidate_ids: Sequence[str]) -> StagePlan:
    """Replicas, rates and LUTs of one candidate per stage (constraints are not checked)."""
    by_id = {c.id: c for c in problem.candidates}
    try:
        chosen = [by_id[i] for i in candidate_ids]
    except KeyError as e:
        raise UsageError(f'unknown candidate {e.args[0]}') from None
    if not chosen:
        raise UsageError('a plan needs at least one stage')
    out0 = exact(problem.input_rate)
    tp = exact(problem.engine_throughput)
    stages = []
    rate = out0
    for candidate in chosen:
        replicas = _ceil(rate / tp)
        out = out0 * exact(candidate.accpt)
        stages.append(StageAssignment(candidate.id, replicas, rate, out,
                                      replicas * exact(candidate.lut)))
        rate = out
    return StagePlan(tuple(stages), sum((s.luts for s in stages), Fraction(0)), rate)


def _stage_counts(problem: PlanProblem) -> range:
    if problem.exact_stages:
        return range(problem.max_stages, problem.max_stages + 1)
    return range(1, problem.max_stages + 1)


def _ordered(problem: PlanProblem) -> List[Candidate]:
    return sorted(problem.candidates, key=lambda c: (-exact(c.accpt), c.id))


def enumerate_plans(problem: PlanProblem) -> List[StagePlan]:
    """Every assignment with non-increasing accpt over the allowed stage counts."""
    ordered = _ordered(problem)
    counts = _stage_counts(problem)
    plans: List[StagePlan] = []

    def extend(prefix: List[Candidate]) -> None:
        if len(prefix) in counts:
            plans.append(evaluate_assignment(problem, [c.id for c in prefix]))
        if len(prefix) == counts.stop - 1:
            return
        last = exact(prefix[-1].accpt) if prefix else None
        for candidate in ordered:
            if last is None or exact(candidate.accpt) <= last:
                extend(prefix + [candidate])

    extend([])
    return plans


def is_feasible(problem: PlanProblem, plan: StagePlan) -> bool:
    if problem.max_output is not None and plan.output_rate > exact(problem.max_output):
        return False
    if problem.max_luts is not None and plan.total_rsc > exact(problem.max_luts):
        return False
    return True


def _key(problem: PlanProblem, plan: StagePlan) -> tuple:
    # output_rate is out_0 * final accpt
    if problem.objective == OPT_OUT:
        return (plan.output_rate, plan.total_rsc, len(plan.stages), plan.candidate_ids)
    return (plan.total_rsc, len(plan.stages), plan.output_rate, plan.candidate_ids)


def _search(problem: PlanProblem) -> Optional[StagePlan]:
    """Depth-first branch and bound; partial RSC only grows, so it bounds subtrees."""
    ordered = _ordered(problem)
    counts = _stage_counts(problem)
    out0 = exact(problem.input_rate)
    tp = exact(problem.engine_throughput)
    y = exact(problem.max_luts) if problem.max_luts is not None else None
    best: Dict[str, object] = {'plan': None, 'key': None}
    explored = 0

    def extend(ids: List[str], last: Optional[Fraction], rate: Fraction, rsc: Fraction) -> None:
        nonlocal explored
        explored += 1
        if ids and len(ids) in counts:
            plan = evaluate_assignment(problem, ids)
            if is_feasible(problem, plan):
                key = _key(problem, plan)
                if best['key'] is None or key < best['key']:
                    best['plan'], best['key'] = plan, key
        if len(ids) == counts.stop - 1:
            return
        for candidate in ordered:
            accpt = exact(candidate.accpt)
            if last is not None and accpt > last:
                continue
            total = rsc + _ceil(rate / tp) * exact(candidate.lut)
            if y is not None and total > y:
                continue
            if (problem.objective == OPT_RSC and best['key'] is not None
                    and total > best['key'][0]):
                continue
            extend(ids + [candidate.id], accpt, out0 * accpt, total)

    extend([], None, out0, Fraction(0))
    logger.debug('plan search visited %d nodes', explored)
    return best['plan']  # type: ignore[return-value]


def _diagnose(problem: PlanProblem) -> Infeasible:
    """Name the bound that makes the problem infeasible."""
    stages = problem.max_stages
    if problem.objective == OPT_RSC:
        cheapest = _search(replace(problem, max_luts=None))
        if cheapest is None:
            return Infeasible('max_output', (
                f'no plan with {"exactly" if problem.exact_stages else "at most"} {stages} '
                f'stage(s) keeps the output at or below {problem.max_output} Gbps'))
        return Infeasible('max_luts', (
            f'meeting {problem.max_output} Gbps needs {float(cheapest.total_rsc):,.0f} LUTs, '
            f'over the budget of {problem.max_luts:,.0f}'))
    relaxed = replace(problem, max_output=None)
    if _search(relaxed) is None:
        return Infeasible('max_luts', (
            f'no plan with {"exactly" if problem.exact_stages else "at most"} {stages} '
            f'stage(s) fits within {problem.max_luts:,.0f} LUTs'))
    return Infeasible('max_output', (
        f'no plan within {problem.max_luts:,.0f} LUTs keeps the output at or below '
        f'{problem.max_output} Gbps'))


def solve(problem: PlanProblem) -> PlanResult:
    """Optimal plan, or Infeasible naming the binding constraint.

    OPT_RSC ties go to fewer stages, then lower final accpt, then candidate
    ids; OPT_out ties go to lower RSC, then fewer stages, then ids.
    """
    plan = _search(problem)
    if plan is None:
        infeasible = _diagnose(problem)
        logger.info('Infeasible (%s): %s', infeasible.binding, infeasible.message)
        return infeasible
    logger.info('Plan %s: %s LUTs, output %s Gbps', ' -> '.join(plan.candidate_ids),
                float(plan.total_rsc), float(plan.output_rate))
    return plan


@dataclass(frozen=True)
class SweepCell:
    input_rate: float
    stages: int
    max_output: Fraction
    plan: Optional[StagePlan]
    over_budget: bool

    @property
    def total_rsc(self) -> Optional[Fraction]:
        return self.plan.total_rsc if self.plan is not None else None


def sweep(problem: PlanProblem, speeds: Sequence[float],
          max_stages: Optional[int] = None, per_speed_bound: bool = False) -> List[SweepCell]:
    """RSC needed per (input speed, exact stage count), budget ignored but flagged.

    Without an explicit X (or with ``per_speed_bound``), each speed uses the
    precise automaton's output at that speed.
    """
    cells = []
    for speed in speeds:
        for stages in range(1, (max_stages or problem.max_stages) + 1):
            x = problem.max_output
            if x is None or per_speed_bound:
                x = float(precise_bound(replace(problem, input_rate=speed)))
            point = replace(problem, input_rate=speed, max_stages=stages, exact_stages=True,
                            objective=OPT_RSC, max_luts=None, max_output=x)
            plan = _search(point)
            over = (plan is not None and problem.max_luts is not None
                    and plan.total_rsc > exact(problem.max_luts))
            cells.append(SweepCell(speed, stages, exact(point.max_output), plan, over))
    return cells


# -- problem files -------------------------------------------------------------

def read_candidates(path: str) -> List[Candidate]:
    """Candidate CSV with header ``id,lut,accpt`` (optional ``nfa_path``, ``precise``)."""
    candidates = []
    with open(path, newline='', encoding='utf-8') as f:
        reader = csv.DictReader(f)
        missing = {'id', 'lut', 'accpt'} - set(reader.fieldnames or ())
        if missing:
            raise ConfigError(f'{path}: missing column(s) {", ".join(sorted(missing))}')
        for row in reader:
            candidates.append(_candidate(row, path))
    return candidates


def _candidate(entry: dict, source: str) -> Candidate:
    try:
        return Candidate(
            id=str(entry['id']),
            lut=float(entry['lut']),
            accpt=float(entry['accpt']),
            nfa_path=entry.get('nfa_path') or entry.get('nfa') or None,
            precise=str(entry.get('precise', '')).strip().lower() in ('1', 'true', 'yes'),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f'{source}: bad candidate {entry!r}: {e}') from None


def load_problem_mapping(path: str) -> dict:
    """Top-level table of a JSON or TOML problem file."""
    if not os.path.exists(path):
        raise FileNotFoundError(f'Problem file not found: {path}')
    try:
        if path.endswith('.toml'):
            with open(path, 'rb') as f:
                data = tomllib.load(f)
        else:
            with open(path, encoding='utf-8') as f:
                data = json.load(f)
    except (ValueError, tomllib.TOMLDecodeError) as e:
        raise ConfigError(f'{path}: {e}') from None
    if not isinstance(data, dict):
        raise ConfigError(f'{path}: expected a table/object at the top level')
    return data


def problem_from_mapping(data: dict, base_dir: str = '.', source: str = '<problem>') -> PlanProblem:
    """Build a PlanProblem from a JSON/TOML-style mapping.

    ``candidates`` is a list of {id, lut, accpt} tables or the path of a
    candidate CSV; the engine speed is ``engine_throughput`` in Gbps or
    ``width_bits`` with ``clock_mhz``.
    """
    raw = data.get('candidates')
    if isinstance(raw, str):
        candidates = read_candidates(os.path.join(base_dir, raw))
    elif isinstance(raw, list):
        candidates = [_candidate(entry, source) for entry in raw]
    else:
        raise ConfigError(f'{source}: "candidates" must be a list or a CSV path')
    if 'engine_throughput' in data:
        tp = data['engine_throughput']
    elif 'width_bits' in data and 'clock_mhz' in data:
        tp = float(engine_throughput(data['width_bits'], data['clock_mhz']))
    else:
        raise ConfigError(f'{source}: need engine_throughput or width_bits + clock_mhz')
    try:
        return PlanProblem(
            candidates=tuple(candidates),
            input_rate=data['input_rate'],
            engine_throughput=tp,
            max_stages=int(data.get('max_stages', 1)),
            objective=data.get('objective', OPT_RSC),
            max_output=data.get('max_output'),
            max_luts=data.get('max_luts'),
            exact_stages=bool(data.get('exact_stages', False)),
        )
    except KeyError as e:
        raise ConfigError(f'{source}: missing key {e.args[0]!r}') from None


def load_problem(path: str) -> PlanProblem:
    return problem_from_mapping(load_problem_mapping(path), os.path.dirname(os.path.abspath(path)), path)


def iter_stage_rows(plan: StagePlan) -> Iterator[Tuple[int, str, int, Fraction, Fraction]]:
    """(stage, candidate, replicas, output Gbps, LUTs) per stage."""
    for i, stage in enumerate(plan.stages, start=1):
        yield i, stage.candidate_id, stage.replicas, stage.output_rate, stage.luts
