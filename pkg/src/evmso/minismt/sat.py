"""Compact CDCL SAT solver: two-watched literals, 1UIP learning, VSIDS."""

from __future__ import annotations

import time
from typing import Optional


class SatSolver:
    def __init__(self):
        self.nvars = 0
        self.clauses: list[list[int]] = []
        self.watches: dict[int, list[int]] = {}
        self.assign: dict[int, bool] = {}
        self.level: dict[int, int] = {}
        self.reason: dict[int, Optional[int]] = {}
        self.trail: list[int] = []
        self.trail_lim: list[int] = []
        self.activity: dict[int, float] = {}
        self.var_inc = 1.0
        self.ok = True

    def new_var(self) -> int:
        self.nvars += 1
        self.activity[self.nvars] = 0.0
        return self.nvars

    def add_clause(self, lits: list[int]) -> None:
        lits = sorted(set(lits), key=abs)
        if any(-l in lits for l in lits):
            return  # tautology
        lits = [l for l in lits if not self._is_false_root(l)]
        if not self.ok:
            return
        if not lits:
            self.ok = False
            return
        if len(lits) == 1:
            if not self._enqueue(lits[0], None):
                self.ok = False
            return
        idx = len(self.clauses)
        self.clauses.append(lits)
        for l in lits[:2]:
            self.watches.setdefault(-l, []).append(idx)

    def _is_false_root(self, lit: int) -> bool:
        v = abs(lit)
        if v in self.assign and self.level.get(v, 0) == 0:
            return self.assign[v] != (lit > 0)
        return False

    def _value(self, lit: int) -> Optional[bool]:
        v = self.assign.get(abs(lit))
        if v is None:
            return None
        return v if lit > 0 else not v

    def _enqueue(self, lit: int, reason: Optional[int]) -> bool:
        val = self._value(lit)
        if val is not None:
            return val
        v = abs(lit)
        self.assign[v] = lit > 0
        self.level[v] = len(self.trail_lim)
        self.reason[v] = reason
        self.trail.append(lit)
        return True

    def _propagate(self) -> Optional[int]:
        while self._qhead < len(self.trail):
            lit = self.trail[self._qhead]
            self._qhead += 1
            watchers = self.watches.get(lit, [])
            new_watchers = []
            for ci in watchers:
                clause = self.clauses[ci]
                # ensure the falsified literal sits at position 1
                if clause[0] == -lit:
                    clause[0], clause[1] = clause[1], clause[0]
                if self._value(clause[0]) is True:
                    new_watchers.append(ci)
                    continue
                moved = False
                for k in range(2, len(clause)):
                    if self._value(clause[k]) is not False:
                        clause[1], clause[k] = clause[k], clause[1]
                        self.watches.setdefault(-clause[1], []).append(ci)
                        moved = True
                        break
                if moved:
                    continue
                new_watchers.append(ci)
                if not self._enqueue(clause[0], ci):
                    self.watches[lit] = new_watchers + watchers[watchers.index(ci) + 1:]
                    return ci
            self.watches[lit] = new_watchers
        return None

    def _bump(self, v: int) -> None:
        self.activity[v] = self.activity.get(v, 0.0) + self.var_inc
        if self.activity[v] > 1e100:
            for k in self.activity:
                self.activity[k] *= 1e-100
            self.var_inc *= 1e-100

    def _analyze(self, confl: int) -> tuple[list[int], int]:
        learnt: list[int] = []
        seen = set()
        counter = 0
        p: Optional[int] = None  # trail literal currently resolved on
        idx = len(self.trail) - 1
        cur_level = len(self.trail_lim)
        clause = self.clauses[confl]
        while True:
            for q in clause:
                if q == p:
                    continue  # the propagated literal itself
                v = abs(q)
                if v in seen or self.level.get(v, 0) == 0:
                    continue
                seen.add(v)
                self._bump(v)
                if self.level[v] >= cur_level:
                    counter += 1
                else:
                    learnt.append(q)
            while abs(self.trail[idx]) not in seen:
                idx -= 1
            p = self.trail[idx]
            v = abs(p)
            seen.discard(v)
            counter -= 1
            idx -= 1
            if counter == 0:
                break
            clause = self.clauses[self.reason[v]]
        learnt.insert(0, -p)
        back = 0
        if len(learnt) > 1:
            back = max(self.level[abs(q)] for q in learnt[1:])
        return learnt, back

    def _backtrack(self, level: int) -> None:
        while self.trail_lim and len(self.trail_lim) > level:
            start = self.trail_lim.pop()
            for lit in self.trail[start:]:
                v = abs(lit)
                del self.assign[v]
                del self.level[v]
                self.reason.pop(v, None)
            del self.trail[start:]
        self._qhead = len(self.trail)

    def _decide(self) -> Optional[int]:
        best, best_act = None, -1.0
        for v in range(1, self.nvars + 1):
            if v not in self.assign and self.activity.get(v, 0.0) > best_act:
                best, best_act = v, self.activity.get(v, 0.0)
        if best is None:
            return None
        return -best  # negative-first polarity: zeros make good EVM witnesses

    def solve(self, deadline: Optional[float] = None) -> Optional[dict[int, bool]]:
        """Model as var -> bool, or None for unsat. Raises TimeoutError."""
        if not self.ok:
            return None
        self._qhead = 0
        conflicts = 0
        limit = 256
        while True:
            confl = self._propagate()
            if confl is not None:
                conflicts += 1
                if not self.trail_lim:
                    return None
                learnt, back = self._analyze(confl)
                self._backtrack(back)
                if len(learnt) == 1:
                    if not self._enqueue(learnt[0], None):
                        return None
                else:
                    idx = len(self.clauses)
                    self.clauses.append(learnt)
                    for l in learnt[:2]:
                        self.watches.setdefault(-l, []).append(idx)
                    if not self._enqueue(learnt[0], idx):
                        return None
                self.var_inc *= 1.05
                if conflicts >= limit:
                    conflicts = 0
                    limit = int(limit * 1.5)
                    self._backtrack(0)
                if deadline is not None and time.monotonic() > deadline:
                    raise TimeoutError("sat deadline")
                continue
            lit = self._decide()
            if lit is None:
                return dict(self.assign)
            self.trail_lim.append(len(self.trail))
            self._enqueue(lit, None)
