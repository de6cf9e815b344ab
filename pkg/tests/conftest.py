"""Shared test fixtures: the micro instruction set, block generators, and an
oracle that mirrors the encoding's first-match chain semantics."""

from __future__ import annotations

import random

import pytest

from evmso.bytecode import Block
from evmso.encoder import Candidate
from evmso.isa import TABLE
from evmso.validate import Oracle

PUSH1 = TABLE.lookup_mnemonic("PUSH1")

MICRO_MNEMONICS = ("POP", "ADD", "SUB", "DUP1", "SWAP1")


@pytest.fixture(scope="session")
def micro_isa():
    """{PUSH(0..3), POP, ADD, SUB, DUP1, SWAP1} as (instruction, immediate) pairs."""
    items = [(PUSH1, v) for v in range(4)]
    items += [(TABLE.lookup_mnemonic(m), None) for m in MICRO_MNEMONICS]
    return items


@pytest.fixture(scope="session")
def micro_ci():
    out = [Candidate(PUSH1, PUSH1.opcode, "template")]
    out += [Candidate(TABLE.lookup_mnemonic(m), TABLE.lookup_mnemonic(m).opcode)
            for m in MICRO_MNEMONICS]
    return out


class SequenceOracle(Oracle):
    """Oracle whose draws follow a fixed value list in first-use order, the
    way the encoding's ite chains bind u_1..u_l to call keys."""

    def __init__(self, const_values: dict, fn_values: dict, storage_values: list,
                 width: int = 256):
        super().__init__(seed=0, width=width)
        self._const = const_values
        self._fn = {m: list(vals) for m, vals in fn_values.items()}
        self._fn_seen: dict = {}
        self._storage = list(storage_values)
        self._storage_seen: dict = {}

    def const(self, mnemonic):
        return self._const.get(mnemonic, 0)

    def fn(self, mnemonic, arg):
        seen = self._fn_seen.setdefault(mnemonic, {})
        if arg not in seen:
            vals = self._fn.get(mnemonic, [])
            seen[arg] = vals.pop(0) if vals else 0
        return seen[arg]

    def storage_default(self, key):
        if key not in self._storage_seen:
            self._storage_seen[key] = self._storage.pop(0) if self._storage else 0
        return self._storage_seen[key]


def random_block(rng: random.Random, width: int, max_len: int = 5,
                 allow_uninterpreted: bool = True,
                 allow_storage: bool = True) -> Block:
    pool = []
    for ins in TABLE:
        if ins.is_push:
            continue
        m = ins.mnemonic
        if m.startswith(("DUP", "SWAP")) and int(m.lstrip("DUPSWA")) > 3:
            continue
        if ins.is_storage and not allow_storage:
            continue
        if ins.is_uninterpreted and not allow_uninterpreted:
            continue
        pool.append(ins)
    instrs = []
    for _ in range(rng.randint(1, max_len)):
        if rng.random() < 0.35:
            instrs.append((PUSH1, rng.randrange(1 << min(width, 8))))
        else:
            ins = rng.choice(pool)
            instrs.append((ins, None))
    return Block(tuple(instrs))
