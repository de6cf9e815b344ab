"""Instruction table for the encodable EVM subset.

Every entry knows its stack arity (how many words it consumes and
produces), its gas rule, and how its semantics are modelled: fully
interpreted, or uninterpreted (environment-dependent result). Anything
not in the table delimits blocks and is never optimized.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import Iterable, Optional

STACK_LIMIT = 2**10
WORD_BITS = 256

DEFAULT_TABLE_RESOURCE = "instructions_constantinople.json"


class EffectClass(Enum):
    INTERPRETED = "interpreted"
    CONST_UNINTERPRETED = "const_uninterpreted"
    NONCONST_UNINTERPRETED = "nonconst_uninterpreted"
    UNENCODABLE = "unencodable"


@dataclass(frozen=True)
class GasRule:
    """Fixed cost, or the SSTORE pair (set when the key was zero, reset otherwise)."""

    kind: str  # "fixed" | "sstore"
    amount: int = 0
    set_cost: int = 0
    reset_cost: int = 0

    def __post_init__(self) -> None:
        if self.kind == "fixed":
            if self.amount < 1:
                raise ValueError("fixed gas cost must be >= 1")
        elif self.kind == "sstore":
            if self.set_cost < 1 or self.reset_cost < 1:
                raise ValueError("sstore gas costs must be >= 1")
        else:
            raise ValueError(f"unknown gas rule kind {self.kind!r}")

    @property
    def min_cost(self) -> int:
        return self.amount if self.kind == "fixed" else min(self.set_cost, self.reset_cost)

    @property
    def max_cost(self) -> int:
        return self.amount if self.kind == "fixed" else max(self.set_cost, self.reset_cost)


@dataclass(frozen=True)
class Instruction:
    opcode: int
    mnemonic: str
    delta: int
    alpha: int
    gas: GasRule
    effect_class: EffectClass
    push_width: Optional[int] = None  # 1..32, PUSH1..PUSH32 only

    @property
    def is_push(self) -> bool:
        return self.push_width is not None

    @property
    def is_storage(self) -> bool:
        return self.mnemonic in ("SLOAD", "SSTORE")

    @property
    def is_uninterpreted(self) -> bool:
        return self.effect_class in (
            EffectClass.CONST_UNINTERPRETED,
            EffectClass.NONCONST_UNINTERPRETED,
        )

    @property
    def base_mnemonic(self) -> str:
        """PUSH5 -> PUSH; everything else unchanged."""
        return "PUSH" if self.is_push else self.mnemonic

    def __repr__(self) -> str:  # keep solver traces readable
        return f"<{self.mnemonic}>"


class InstructionTable:
    """Immutable opcode/mnemonic lookup over one fee schedule."""

    def __init__(self, instructions: Iterable[Instruction], schedule: str = "custom"):
        self.schedule = schedule
        self._by_opcode: dict[int, Instruction] = {}
        self._by_mnemonic: dict[str, Instruction] = {}
        for ins in instructions:
            if ins.opcode in self._by_opcode:
                raise ValueError(f"duplicate opcode 0x{ins.opcode:02x}")
            if ins.mnemonic in self._by_mnemonic:
                raise ValueError(f"duplicate mnemonic {ins.mnemonic}")
            self._by_opcode[ins.opcode] = ins
            self._by_mnemonic[ins.mnemonic] = ins
        if not all(i.alpha <= 1 for i in self if not i.mnemonic.startswith(("DUP", "SWAP"))):
            raise ValueError("alpha > 1 outside DUP/SWAP")
        for i in self:
            if i.effect_class is EffectClass.CONST_UNINTERPRETED and i.delta != 0:
                raise ValueError(f"{i.mnemonic}: constant-uninterpreted must have delta 0")

    def __iter__(self):
        return iter(sorted(self._by_opcode.values(), key=lambda i: i.opcode))

    def __len__(self) -> int:
        return len(self._by_opcode)

    def lookup_opcode(self, byte: int) -> Optional[Instruction]:
        """Table entry for an opcode byte, or None for unknown (block delimiter)."""
        return self._by_opcode.get(byte)

    def lookup_mnemonic(self, name: str) -> Optional[Instruction]:
        return self._by_mnemonic.get(name.upper())

    def push(self, width: int) -> Instruction:
        if not 1 <= width <= 32:
            raise ValueError(f"PUSH width {width} out of range")
        return self._by_mnemonic[f"PUSH{width}"]

    @property
    def min_fixed_cost(self) -> int:
        """Cheapest cost in the table; the EncodeUso length bound relies on it being >= 1."""
        return min(i.gas.min_cost for i in self)


def _parse_gas(obj: dict) -> GasRule:
    if obj["kind"] == "fixed":
        return GasRule("fixed", amount=obj["amount"])
    return GasRule("sstore", set_cost=obj["set"], reset_cost=obj["reset"])


def load_table(path_or_file) -> InstructionTable:
    """Load an instruction table from a versioned JSON data file."""
    if hasattr(path_or_file, "read"):
        doc = json.load(path_or_file)
    else:
        with open(path_or_file, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    instrs = [
        Instruction(
            opcode=row["opcode"],
            mnemonic=row["mnemonic"],
            delta=row["delta"],
            alpha=row["alpha"],
            gas=_parse_gas(row["gas"]),
            effect_class=EffectClass(row["class"]),
            push_width=row.get("push_width"),
        )
        for row in doc["instructions"]
    ]
    return InstructionTable(instrs, schedule=doc.get("schedule", "custom"))


def default_table() -> InstructionTable:
    ref = resources.files("evmso.data").joinpath(DEFAULT_TABLE_RESOURCE)
    with ref.open("r", encoding="utf-8") as fh:
        return load_table(fh)


TABLE = default_table()


class UnencodableInstruction(Exception):
    """A block contains an instruction outside the encodable subset."""


def static_gas(block) -> tuple[int, int]:
    """(min, max) summed gas of a block; SSTORE contributes reset to min, set to max."""
    lo = hi = 0
    for ins, _imm in block:
        if ins.effect_class is EffectClass.UNENCODABLE:
            raise UnencodableInstruction(ins.mnemonic)
        lo += ins.gas.min_cost
        hi += ins.gas.max_cost
    return lo, hi
