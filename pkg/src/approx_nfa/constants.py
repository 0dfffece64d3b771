"""Shared constants for approx-nfa."""

# Automata run over packet bytes.
ALPHABET_SIZE = 256
FULL_BYTE_CLASS = (1 << ALPHABET_SIZE) - 1

# Bounded repetition {m,n} is expanded by copying. Nested repetitions multiply,
# and more copies of any sub-pattern than this is an error.
DEFAULT_EXPANSION_CAP = 64

# Rule-file marker for Snort-style /pattern/flags literals; other patterns are taken as-is.
PCRE_PREFIX = 'pcre:'

# Cost model defaults (LUTs). Plausible estimates only, not synthesis results.
DEFAULT_STATE_WEIGHT = 2.0
DEFAULT_TRANSITION_WEIGHT = 0.25
DEFAULT_OVERHEAD = 50.0
# Floor of an estimate, so a candidate cost is always positive.
MIN_LUTS = 1.0

# Merging parameters used for the backbone experiments.
DEFAULT_DISTANCE_CEILING = 1.005
DEFAULT_FREQUENCY_CEILING = 0.1

# FPGA budget: share of LUTs that still routes at 200 MHz, and LUTs taken by
# the packet receive/transfer components.
DEFAULT_LUT_UTILISATION = 0.7
DEFAULT_RESERVED_LUTS = 90_000

# Raw sample records: 4-byte little-endian length, then payload.
RAW_RECORD_HEADER = '<I'

# Worker count for packet-parallel labelling/evaluation and grid sweeps.
WORKERS_ENV_VAR = 'APPROX_NFA_WORKERS'

# Reduction method names.
METHOD_PRUNE = 'prune'
METHOD_MERGE = 'merge'
METHOD_MERGE_PRUNE = 'merge-prune'
METHOD_BFS = 'bfs'
METHODS = (METHOD_PRUNE, METHOD_MERGE, METHOD_MERGE_PRUNE, METHOD_BFS)

# Planner objectives.
OPT_RSC = 'rsc'
OPT_OUT = 'out'

# Process exit codes.
EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT_FORMAT = 3
EXIT_INFEASIBLE = 4
EXIT_INVARIANT = 5

SWEEP_CSV_COLUMNS = ['method', 'theta', 'D', 'F', 'states', 'cost', 'ap', 'prob']
