"""Main module entry point for the approx-nfa package."""

import sys

from .cli import main

if __name__ == '__main__':
    sys.exit(main())
