"""Bundled fallback SMT solver for the fragment this tool emits.

Drives like any external solver (SMT-LIB v2 in, verdict + get-value
answers out) via the `evmso-smt` console script, and exposes
`solve_text` for in-process use.
"""

from .solver import solve_text

__all__ = ["solve_text"]
