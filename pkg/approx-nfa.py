#!/usr/bin/env python3

"""Standalone entry point for approx-nfa.

The implementation lives in the ``approx_nfa`` package under ``src/``. This
file only puts ``src/`` on ``sys.path`` so the tool runs from a checkout
without installation, then hands over to the package CLI:

   $ ./approx-nfa.py compile rules.tsv -o precise.nfa

The hyphenated name keeps it from shadowing the package when the checkout
root is on ``sys.path``.
"""

import os
import sys

if __name__ == "__main__":
    _SRC = os.path.join(os.path.dirname(os.path.abspath(__file__)), "src")
    if _SRC in sys.path:
        sys.path.remove(_SRC)
    sys.path.insert(0, _SRC)
    from approx_nfa.cli import main
    sys.exit(main())
