"""LUT cost estimates for candidate automata.

Synthesis is not run; a candidate costs ``overhead + state_weight * |Q| +
transition_weight * (number of (src, dst) transition classes)`` LUTs unless an
override table gives its measured size. The model is a key=value file:

    state_weight = 2
    transition_weight = 0.25
    overhead = 50
    overrides = luts.csv      # optional, ``candidate_id,luts`` rows

Relative ``overrides`` paths are taken relative to the model file.
"""

import csv
import os
from dataclasses import dataclass, field, replace
from typing import Dict, Mapping, Optional

from .automata import Nfa
from .constants import DEFAULT_OVERHEAD, DEFAULT_STATE_WEIGHT, DEFAULT_TRANSITION_WEIGHT, MIN_LUTS
from .models import ConfigError, UsageError

_KEYS = ('state_weight', 'transition_weight', 'overhead')


@dataclass(frozen=True)
class CostModel:
    state_weight: float = DEFAULT_STATE_WEIGHT
    transition_weight: float = DEFAULT_TRANSITION_WEIGHT
    overhead: float = DEFAULT_OVERHEAD
    overrides: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for key in _KEYS:
            if getattr(self, key) < 0:
                raise UsageError(f'cost model {key} must be non-negative')
        for candidate_id, luts in self.overrides.items():
            if not luts > 0:
                raise UsageError(f'override for {candidate_id} must be positive, got {luts}')


def lut_estimate(model: CostModel, nfa: Nfa, candidate_id: Optional[str] = None) -> float:
    """Override value when the candidate has one, else the linear estimate.

    Estimates are at least MIN_LUTS.
    """
    if candidate_id is not None and candidate_id in model.overrides:
        return float(model.overrides[candidate_id])
    return max(MIN_LUTS, model.overhead + model.state_weight * nfa.num_states
               + model.transition_weight * nfa.transition_count)


def _discovery_paths():
    """Auto-discovery search paths, first existing wins (evaluated per call)."""
    return [
        os.path.join(os.getcwd(), 'approx-nfa-cost.conf'),
        os.path.expanduser('~/.config/approx-nfa/cost.conf'),
    ]


def discover_cost_model() -> Optional[str]:
    """Return the first existing auto-discovery config path, or None."""
    for candidate in _discovery_paths():
        if os.path.isfile(candidate):
            return candidate
    return None


def load_overrides(path: str) -> Dict[str, float]:
    """``candidate_id,luts`` CSV; a header row is allowed."""
    overrides: Dict[str, float] = {}
    with open(path, newline='', encoding='utf-8') as f:
        for number, row in enumerate(csv.reader(f), start=1):
            if not row or not row[0].strip() or row[0].lstrip().startswith('#'):
                continue
            if len(row) != 2:
                raise ConfigError(f'{path}:{number}: expected "candidate_id,luts"')
            candidate_id, luts_text = row[0].strip(), row[1].strip()
            try:
                luts = float(luts_text)
            except ValueError:
                if number == 1:
                    continue  # header
                raise ConfigError(f'{path}:{number}: bad LUT count {luts_text!r}') from None
            if not luts > 0:
                raise ConfigError(f'{path}:{number}: LUT count must be positive')
            overrides[candidate_id] = luts
    return overrides


def load_cost_model(path: str) -> CostModel:
    """Load and validate a key=value cost model file.

    Raises FileNotFoundError if the path does not exist, ConfigError on
    unknown keys or bad values.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f'Cost model not found: {path}')
    values: Dict[str, float] = {}
    overrides: Dict[str, float] = {}
    with open(path, encoding='utf-8') as f:
        for number, raw in enumerate(f, start=1):
            line = raw.split('#', 1)[0].strip()
            if not line:
                continue
            key, sep, value = (part.strip() for part in line.partition('='))
            if not sep:
                raise ConfigError(f'{path}:{number}: expected key = value')
            if key == 'overrides':
                overrides_path = os.path.join(os.path.dirname(os.path.abspath(path)), value)
                overrides = load_overrides(overrides_path)
            elif key in _KEYS:
                try:
                    values[key] = float(value)
                except ValueError:
                    raise ConfigError(f'{path}:{number}: {key} is not a number: {value!r}') from None
            else:
                raise ConfigError(f'{path}:{number}: unknown key {key!r}')
    try:
        return CostModel(overrides=overrides, **values)
    except UsageError as e:
        raise ConfigError(f'{path}: {e}') from None


def resolve_cost_model(path: Optional[str] = None,
                       inline: Optional[Mapping[str, Optional[float]]] = None,
                       overrides_path: Optional[str] = None,
                       discover: bool = True) -> CostModel:
    """Resolve the cost model.

    Precedence: inline values > explicit model file > auto-discovered file >
    built-in defaults. An explicit overrides CSV replaces the file's table.
    """
    if path is None and discover:
        path = discover_cost_model()
    model = load_cost_model(path) if path else CostModel()
    given = {k: v for k, v in (inline or {}).items() if v is not None}
    if given:
        model = replace(model, **given)
    if overrides_path:
        model = replace(model, overrides=load_overrides(overrides_path))
    return model
