"""evmso: a superoptimizer for straight-line EVM bytecode blocks.

Blocks of encodable instructions are translated into SMT formulas over
their stack, storage, gas, and halting behaviour; a constraint solver
searches for strictly cheaper equivalent instruction sequences; winners
are certified by full-width translation validation and seeded random
interpreter runs.
"""

from .bytecode import Block, Program, assemble, disassemble, parse_asm, splice
from .isa import TABLE, Instruction, static_gas
from .superopt import (OptimizationReport, basic_superoptimize,
                       unbounded_superoptimize)
from .validate import interpret, random_validate, translation_validate

__version__ = "0.1.0"

__all__ = [
    "Block", "Program", "assemble", "disassemble", "parse_asm", "splice",
    "TABLE", "Instruction", "static_gas",
    "OptimizationReport", "basic_superoptimize", "unbounded_superoptimize",
    "interpret", "random_validate", "translation_validate",
    "__version__",
]
