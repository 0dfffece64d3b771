"""Top-level orchestration: parameter sweeps, the Pareto filter and full pipeline runs."""

import json
import logging
import os
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import List, Optional, Sequence, Tuple

from .automata import Nfa, read_nfa, write_nfa
from .constants import (
    DEFAULT_EXPANSION_CAP,
    METHOD_BFS,
    METHOD_MERGE,
    METHOD_MERGE_PRUNE,
    METHOD_PRUNE,
    METHODS,
)
from .cost import CostModel, lut_estimate, resolve_cost_model
from .emit import (
    emit_candidates_csv,
    emit_json,
    emit_lines,
    emit_reduction,
    emit_sweep_csv,
    plan_result_lines,
)
from .evaluate import evaluate
from .labelling import check_labeling, label, read_labeling, write_labeling
from .models import Candidate, ConfigError, Labeling, MismatchingLabelingError, UsageError
from .planner import PlanResult, problem_from_mapping, solve
from .recompile import compile_ruleset, read_rules
from .reduce import reduce_nfa
from .traffic import TrafficSample, load_samples
from .utils import console_logger, parallel_map

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

PRECISE_ID = 'precise'


@dataclass(frozen=True)
class SweepPoint:
    method: str
    theta: Optional[float] = None
    distance: Optional[float] = None
    frequency: Optional[float] = None

    @property
    def candidate_id(self) -> str:
        """``prune-t0.5``, ``merge-d1.005-f0.1``, ``merge-prune-t0.5-d1.005-f0.1``, ..."""
        parts = [self.method]
        if self.theta is not None:
            parts.append(f't{self.theta:g}')
        if self.distance is not None:
            parts.append(f'd{self.distance:g}')
        if self.frequency is not None:
            parts.append(f'f{self.frequency:g}')
        return '-'.join(parts)


@dataclass
class SweepRow:
    id: str
    method: str
    theta: Optional[float]
    distance: Optional[float]
    frequency: Optional[float]
    states: int
    cost: float
    ap: float
    prob: Fraction
    a_fn: int = 0
    nfa_path: Optional[str] = None
    precise: bool = False

    def csv_row(self) -> list:
        def opt(value):
            return '' if value is None else f'{value:g}'

        return [self.method, opt(self.theta), opt(self.distance), opt(self.frequency),
                self.states, f'{self.cost:g}', f'{self.ap:.6f}', f'{float(self.prob):.6f}']

    def candidate(self) -> Candidate:
        return Candidate(self.id, self.cost, float(self.prob), self.nfa_path, self.precise)


def grid_points(methods: Sequence[str], thetas: Sequence[float],
                distances: Sequence[float] = (), frequencies: Sequence[float] = ()) -> List[SweepPoint]:
    """Cartesian grid per method; merge ignores theta, prune and bfs ignore D and F."""
    points = []
    for method in methods:
        if method not in METHODS:
            raise UsageError(f'unknown reduction method: {method}')
        if method in (METHOD_PRUNE, METHOD_BFS):
            if not thetas:
                raise UsageError(f'{method} needs a non-empty theta grid')
            points += [SweepPoint(method, theta=t) for t in thetas]
            continue
        if not distances or not frequencies:
            raise UsageError(f'{method} needs non-empty D and F grids')
        if method == METHOD_MERGE:
            points += [SweepPoint(method, distance=d, frequency=f)
                       for d, f in product(distances, frequencies)]
        else:
            if not thetas:
                raise UsageError(f'{method} needs a non-empty theta grid')
            points += [SweepPoint(method, t, d, f)
                       for t, d, f in product(thetas, distances, frequencies)]
    return points


def _run_point(job: Tuple[Nfa, Labeling, TrafficSample, SweepPoint, CostModel, Optional[str]]) -> SweepRow:
    nfa, labeling, test, point, model, out_dir = job
    reduced, report = reduce_nfa(nfa, point.method, labeling, theta=point.theta or 1,
                                 distance_ceiling=point.distance,
                                 frequency_ceiling=point.frequency)
    result = evaluate(nfa, reduced, test)
    nfa_path = None
    if out_dir:
        nfa_path = os.path.join(out_dir, f'{point.candidate_id}.nfa')
        emit_reduction(reduced, report, nfa_path, logger=logging.getLogger(__name__))
    return SweepRow(point.candidate_id, point.method, point.theta, point.distance,
                    point.frequency, reduced.num_states,
                    lut_estimate(model, reduced, point.candidate_id),
                    result.ap, result.prob_fraction, result.a_fn, nfa_path)


def precise_row(nfa: Nfa, test: TrafficSample, model: CostModel,
                nfa_path: Optional[str] = None) -> SweepRow:
    result = evaluate(nfa, nfa, test)
    return SweepRow(PRECISE_ID, PRECISE_ID, None, None, None, nfa.num_states,
                    lut_estimate(model, nfa, PRECISE_ID), result.ap, result.prob_fraction,
                    0, nfa_path, precise=True)


def sweep_reductions(nfa: Nfa, labeling: Labeling, test: TrafficSample,
                     points: Sequence[SweepPoint], model: CostModel,
                     out_dir: Optional[str] = None, workers: int = 1,
                     logger: Optional[logging.Logger] = None) -> List[SweepRow]:
    """Reduce and evaluate every grid point (in parallel across points)."""
    logger = logger or logging.getLogger(__name__)
    check_labeling(nfa, labeling)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    rows = parallel_map(_run_point, [(nfa, labeling, test, p, model, out_dir) for p in points],
                        workers)
    for row in rows:
        if row.a_fn:
            logger.warning('%s rejects %d packet(s) the precise NFA accepts', row.id, row.a_fn)
    logger.info('Evaluated %d reduced automata', len(rows))
    return rows


def front_indices(points: Sequence[Tuple[float, float, bool, str]]) -> List[int]:
    """Positions of the non-dominated ``(cost, prob, precise, id)`` points, in cost order.

    Both cost and prob are minimised. A precise point is kept even when a
    reduced point with the same prob costs less. Of points with equal
    (cost, prob) only the first stays, precise before reduced, then by id.
    """
    order = sorted(range(len(points)),
                   key=lambda i: (points[i][0], points[i][1], not points[i][2], points[i][3]))
    kept: List[int] = []
    best = None
    for i in order:
        _, prob, precise, _ = points[i]
        # sorted by cost, so only earlier points can dominate
        if best is None or prob < best:
            kept.append(i)
            best = prob
        elif precise:
            kept.append(i)
    return kept


def pareto_front(rows: Sequence[SweepRow]) -> List[SweepRow]:
    """Rows on the (cost, prob) Pareto front, sorted by cost; see front_indices."""
    return [rows[i] for i in front_indices([(r.cost, r.prob, r.precise, r.id) for r in rows])]


def pareto_candidates(nfa: Nfa, labeling: Labeling, test: TrafficSample,
                      points: Sequence[SweepPoint], model: CostModel,
                      out_dir: Optional[str] = None, include_precise: bool = True,
                      workers: int = 1,
                      logger: Optional[logging.Logger] = None) -> Tuple[List[SweepRow], List[Candidate]]:
    """Sweep, attach costs, keep the Pareto-optimal set; returns (all rows, candidates)."""
    rows = sweep_reductions(nfa, labeling, test, points, model, out_dir, workers, logger)
    if include_precise:
        precise_path = None
        if out_dir:
            precise_path = os.path.join(out_dir, f'{PRECISE_ID}.nfa')
            write_nfa(nfa, precise_path)
        rows = rows + [precise_row(nfa, test, model, precise_path)]
    front = pareto_front(rows)
    return rows, [r.candidate() for r in front]


# -- pipeline -------------------------------------------------------------------

@dataclass
class PipelineConfig:
    """Paths, parameter grids and planner settings of one end-to-end run.

    Relative paths are taken relative to the config file.
    """

    train: List[str]
    test: List[str]
    output_dir: str
    rules: Optional[str] = None
    nfa: Optional[str] = None
    labeling: Optional[str] = None
    cost_model: Optional[str] = None
    methods: List[str] = field(default_factory=lambda: [METHOD_PRUNE, METHOD_MERGE_PRUNE])
    thetas: List[float] = field(default_factory=lambda: [0.1, 0.2, 0.5, 1.0])
    distances: List[float] = field(default_factory=lambda: [1.005])
    frequencies: List[float] = field(default_factory=lambda: [0.1])
    plan: dict = field(default_factory=dict)
    include_precise: bool = True
    expansion_cap: int = DEFAULT_EXPANSION_CAP
    workers: int = 1

    def validate(self) -> None:
        if (self.rules is None) == (self.nfa is None):
            raise ConfigError('pipeline needs exactly one of "rules" or "nfa"')
        if not self.train or not self.test:
            raise ConfigError('pipeline needs training and testing traces')
        for path in [self.rules, self.nfa, self.cost_model, *self.train, *self.test]:
            if path is not None and not os.path.exists(path):
                raise FileNotFoundError(f'Pipeline input not found: {path}')
        grid_points(self.methods, self.thetas, self.distances, self.frequencies)


def load_pipeline_config(path: str) -> PipelineConfig:
    if not os.path.exists(path):
        raise FileNotFoundError(f'Pipeline config not found: {path}')
    try:
        if path.endswith('.toml'):
            with open(path, 'rb') as f:
                data = tomllib.load(f)
        else:
            with open(path, encoding='utf-8') as f:
                data = json.load(f)
    except (ValueError, tomllib.TOMLDecodeError) as e:
        raise ConfigError(f'{path}: {e}') from None
    base = os.path.dirname(os.path.abspath(path))

    def resolve(value):
        return value if value is None or os.path.isabs(value) else os.path.join(base, value)

    try:
        config = PipelineConfig(**data)
    except TypeError as e:
        raise ConfigError(f'{path}: {e}') from None
    for key in ('rules', 'nfa', 'labeling', 'cost_model', 'output_dir'):
        setattr(config, key, resolve(getattr(config, key)))
    config.train = [resolve(p) for p in config.train]
    config.test = [resolve(p) for p in config.test]
    config.validate()
    return config


@dataclass
class PipelineResult:
    nfa_path: str
    labeling_path: str
    sweep_csv: str
    candidates_csv: str
    plan_json: Optional[str]
    rows: List[SweepRow]
    candidates: List[Candidate]
    plan: Optional[PlanResult]


def _cached_labeling(path: Optional[str], nfa: Nfa, logger) -> Optional[Labeling]:
    if not path or not os.path.exists(path):
        return None
    try:
        labeling = read_labeling(path, nfa)
    except MismatchingLabelingError:
        logger.info('Labeling cache %s belongs to another NFA, relabelling', path)
        return None
    logger.info('Reusing labeling %s', path)
    return labeling


def run_pipeline(config: PipelineConfig, verbosity_level: int = 1,
                 logger: Optional[logging.Logger] = None) -> PipelineResult:
    """compile -> label -> reduce sweep -> eval -> pareto -> plan, all artifacts on disk."""
    logger = logger or console_logger('approx-nfa', verbosity_level)
    config.validate()
    out = config.output_dir
    os.makedirs(out, exist_ok=True)

    if config.rules:
        nfa = compile_ruleset(read_rules(config.rules), config.expansion_cap)
        logger.info('Compiled %s: %d states', config.rules, nfa.num_states)
    else:
        nfa = read_nfa(config.nfa)
    nfa_path = os.path.join(out, f'{PRECISE_ID}.nfa')
    write_nfa(nfa, nfa_path)

    labeling_path = config.labeling or os.path.join(out, 'labeling.csv')
    labeling = _cached_labeling(labeling_path, nfa, logger)
    if labeling is None:
        train = load_samples(config.train, config.workers)
        logger.info('Training sample: %d packets, %d bytes', train.total_packets, train.total_bytes)
        labeling = label(nfa, train, config.workers)
        write_labeling(labeling, labeling_path)

    test = load_samples(config.test, config.workers)
    logger.info('Testing sample: %d packets', test.total_packets)
    model = resolve_cost_model(config.cost_model, discover=config.cost_model is None)
    points = grid_points(config.methods, config.thetas, config.distances, config.frequencies)
    rows, candidates = pareto_candidates(
        nfa, labeling, test, points, model, os.path.join(out, 'candidates'),
        config.include_precise, config.workers, logger)
    sweep_csv = os.path.join(out, 'sweep.csv')
    candidates_csv = os.path.join(out, 'candidates.csv')
    emit_sweep_csv(rows, sweep_csv, logger=logger)
    emit_candidates_csv(candidates, candidates_csv, logger=logger)

    plan = None
    plan_json = None
    if config.plan:
        problem = problem_from_mapping(dict(config.plan, candidates=os.path.abspath(candidates_csv)), out,
                                       'pipeline plan')
        plan = solve(problem)
        plan_json = os.path.join(out, 'plan.json')
        emit_json(plan.to_dict(), plan_json, logger=logger)
        emit_lines(plan_result_lines(problem, plan), os.path.join(out, 'plan.txt'), logger=logger)
    return PipelineResult(nfa_path, labeling_path, sweep_csv, candidates_csv, plan_json,
                          rows, candidates, plan)
