"""Parse, split, and reassemble EVM bytecode.

A program is a sequence of segments: optimizable straight-line blocks of
encodable instructions, and opaque byte runs (control flow, memory ops,
unknown opcodes) that are carried through untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

from .isa import Instruction, InstructionTable, TABLE, WORD_BITS

WORD_MOD = 2**WORD_BITS

JUMPDEST = 0x5B


class AsmError(ValueError):
    """Malformed mnemonic assembly."""


@dataclass(frozen=True)
class Block:
    """A straight-line run of encodable instructions."""

    instrs: tuple[tuple[Instruction, Optional[int]], ...]
    byte_offset: int = 0

    def __post_init__(self) -> None:
        for ins, imm in self.instrs:
            if ins.is_push:
                if imm is None or not 0 <= imm < WORD_MOD:
                    raise ValueError(f"{ins.mnemonic} needs an immediate in [0, 2^256)")
            elif imm is not None:
                raise ValueError(f"{ins.mnemonic} takes no immediate")

    def __iter__(self) -> Iterator[tuple[Instruction, Optional[int]]]:
        return iter(self.instrs)

    def __len__(self) -> int:
        return len(self.instrs)

    def asm(self) -> str:
        parts = []
        for ins, imm in self.instrs:
            parts.append("PUSH" if ins.is_push else ins.mnemonic)
            if ins.is_push:
                parts.append(str(imm))
        return " ".join(parts)

    def __repr__(self) -> str:
        return f"Block[{self.asm()}]"


@dataclass(frozen=True)
class Opaque:
    """Bytes we do not encode; kept verbatim so reassembly is exact."""

    data: bytes
    byte_offset: int = 0

    def __repr__(self) -> str:
        return f"Opaque[0x{self.data.hex()}]"


Segment = Union[Block, Opaque]


@dataclass(frozen=True)
class Program:
    segments: tuple[Segment, ...] = field(default_factory=tuple)

    def __iter__(self) -> Iterator[Segment]:
        return iter(self.segments)

    def __len__(self) -> int:
        return len(self.segments)

    def blocks(self) -> list[Block]:
        return [s for s in self.segments if isinstance(s, Block)]

    def has_jumps(self) -> bool:
        return any(
            isinstance(s, Opaque) and any(b in (0x56, 0x57) for b in s.data)
            for s in self.segments
        )


def block(asm_or_instrs, offset: int = 0) -> Block:
    """Convenience constructor: Block from asm text or an instruction list."""
    if isinstance(asm_or_instrs, str):
        return parse_asm(asm_or_instrs)
    return Block(tuple(asm_or_instrs), offset)


def min_push(value: int, table: InstructionTable = TABLE) -> Instruction:
    width = max(1, (value.bit_length() + 7) // 8)
    return table.push(width)


def disassemble(data: bytes, table: InstructionTable = TABLE) -> Program:
    """Greedy linear sweep; PUSHn eats n immediate bytes, zero-padded at the tail."""
    segments: list[Segment] = []
    cur: list[tuple[Instruction, Optional[int]]] = []
    cur_off = 0
    opaque: list[int] = []
    opq_off = 0

    def flush_block() -> None:
        nonlocal cur
        if cur:
            segments.append(Block(tuple(cur), cur_off))
            cur = []

    def flush_opaque() -> None:
        nonlocal opaque
        if opaque:
            segments.append(Opaque(bytes(opaque), opq_off))
            opaque = []

    i = 0
    n = len(data)
    while i < n:
        op = data[i]
        ins = table.lookup_opcode(op)
        if ins is None or op == JUMPDEST:
            # delimiter: unknown/control-flow opcode, or a jump target
            flush_block()
            if not opaque:
                opq_off = i
            opaque.append(op)
            i += 1
            continue
        flush_opaque()
        if not cur:
            cur_off = i
        if ins.is_push:
            w = ins.push_width
            raw = data[i + 1 : i + 1 + w]
            raw = raw + b"\x00" * (w - len(raw))  # truncated tail pads with zeros
            cur.append((ins, int.from_bytes(raw, "big")))
            i += 1 + w
        else:
            cur.append((ins, None))
            i += 1
    flush_block()
    flush_opaque()
    return Program(tuple(segments))


def assemble(p: Union[Program, Block], table: InstructionTable = TABLE) -> bytes:
    """Inverse of disassemble; a PUSH without a declared width takes the minimal one."""
    if isinstance(p, Block):
        p = Program((p,))
    out = bytearray()
    for seg in p:
        if isinstance(seg, Opaque):
            out.extend(seg.data)
            continue
        for ins, imm in seg:
            if ins.is_push:
                width = ins.push_width
                if imm.bit_length() > 8 * width:
                    raise ValueError(f"immediate {imm} does not fit {ins.mnemonic}")
                out.append(ins.opcode)
                out.extend(imm.to_bytes(width, "big"))
            else:
                out.append(ins.opcode)
    return bytes(out)


def parse_hex(text: str) -> bytes:
    text = text.strip()
    if text.startswith(("0x", "0X")):
        text = text[2:]
    if len(text) % 2:
        raise ValueError("odd-length hex bytecode")
    return bytes.fromhex(text)


def _parse_literal(tok: str) -> int:
    try:
        v = int(tok, 0)  # decimal, 0x hex, 0b binary
    except ValueError:
        raise AsmError(f"malformed PUSH literal {tok!r}") from None
    if not 0 <= v < WORD_MOD:
        raise AsmError(f"PUSH literal {tok} out of [0, 2^256)")
    return v


def parse_asm(text: str, table: InstructionTable = TABLE) -> Block:
    """Whitespace-separated mnemonics; unified PUSH takes one literal."""
    toks = text.split()
    instrs: list[tuple[Instruction, Optional[int]]] = []
    i = 0
    while i < len(toks):
        name = toks[i].upper()
        if name == "PUSH" or (name.startswith("PUSH") and name[4:].isdigit()):
            if i + 1 >= len(toks):
                raise AsmError("PUSH needs a literal")
            v = _parse_literal(toks[i + 1])
            if name == "PUSH":
                ins = min_push(v, table)
            else:
                ins = table.lookup_mnemonic(name)
                if ins is None:
                    raise AsmError(f"unknown mnemonic {name}")
                if v.bit_length() > 8 * ins.push_width:
                    raise AsmError(f"literal {v} does not fit {name}")
            instrs.append((ins, v))
            i += 2
            continue
        ins = table.lookup_mnemonic(name)
        if ins is None:
            raise AsmError(f"unknown mnemonic {name}")
        if i + 1 < len(toks):
            nxt = toks[i + 1]
            if nxt[0].isdigit() and not nxt.lstrip("0123456789xXbBabcdefABCDEF"):
                raise AsmError(f"immediate on non-PUSH instruction {name}")
        instrs.append((ins, None))
        i += 1
    return Block(tuple(instrs))


def program_depth(p: Block) -> int:
    """delta-hat: how many pre-existing stack words the block consumes."""
    need = 0
    size = 0  # stack growth relative to entry
    for ins, _ in p:
        need = max(need, ins.delta - size)
        size += ins.alpha - ins.delta
    return need


def stack_growth(p: Block) -> int:
    return sum(ins.alpha - ins.delta for ins, _ in p)


def splice(p: Program, at: int, replacement: Block) -> Program:
    """Replace the block at segment index `at`; other segments stay byte-identical."""
    if not 0 <= at < len(p.segments):
        raise IndexError(f"segment index {at} out of range")
    if not isinstance(p.segments[at], Block):
        raise TypeError(f"segment {at} is not a block")
    segs = list(p.segments)
    if len(replacement) == 0:
        del segs[at]
    else:
        segs[at] = replacement
    return Program(tuple(segs))


def dedup_key(p: Block, k: int = 4) -> tuple:
    """Key identifying blocks up to PUSH arguments: small literals stay, oversized
    ones become slot ids (equal values share a slot)."""
    slots: dict[int, int] = {}
    key = []
    for ins, imm in p:
        if ins.is_push:
            if imm < 2**k:
                key.append(("PUSH", imm))
            else:
                slot = slots.setdefault(imm, len(slots))
                key.append(("PUSH", f"#{slot}"))
        else:
            key.append((ins.mnemonic, None))
    return tuple(key)
