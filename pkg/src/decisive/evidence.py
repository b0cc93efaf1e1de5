"""Decisiveness evidence attached to verdicts and approximation results.

Results computed under an ``ASSUMED`` premise anywhere in their chain are
*tainted*: they are reported, but flagged as resting on an unchecked claim.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .core import order_key, sorted_states


class EvidenceKind(str, Enum):
    FINITE_CHAIN = "FiniteChain"
    FINITE_ATTRACTOR = "FiniteAttractor"
    SOUND_ABSTRACTION = "SoundAbstractionOfDecisive"
    FIBER_BOUNDS = "UniformFiberBounds"
    FAIRNESS = "Fairness"
    STA_CLASS = "StaClass"
    NON_ZENO = "NonZeno"
    ASSUMED = "Assumed"


@dataclass(frozen=True)
class Evidence:
    kind: EvidenceKind
    note: str = ""
    premises: tuple = ()
    declared: bool = False
    attractor: object = field(default=None, compare=False, repr=False)
    bounds: object = field(default=None, compare=False, repr=False)

    @property
    def tainted(self) -> bool:
        return self.kind is EvidenceKind.ASSUMED or any(p.tainted for p in self.premises)

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value, "note": self.note, "declared": self.declared,
               "tainted": self.tainted}
        if self.bounds:
            out["bounds"] = [{"state": repr(a), "target": [repr(b) for b in sorted_states(B)],
                              "p": str(p), "k": k2}
                             for (a, B), (p, k2) in sorted(self.bounds.items(),
                                                           key=lambda kv: _bound_key(kv[0]))]
        if self.premises:
            out["premises"] = [p.to_dict() for p in self.premises]
        return out

    @classmethod
    def finite_chain(cls, note: str = "finite chains are decisive") -> Evidence:
        return cls(EvidenceKind.FINITE_CHAIN, note)

    @classmethod
    def assumed(cls, note: str) -> Evidence:
        return cls(EvidenceKind.ASSUMED, note, declared=True)

    @classmethod
    def non_zeno(cls, note: str, declared: bool = True) -> Evidence:
        return cls(EvidenceKind.NON_ZENO, note, declared=declared)

    @classmethod
    def fairness(cls, note: str) -> Evidence:
        return cls(EvidenceKind.FAIRNESS, note, declared=True)

    def supporting(self, kind: EvidenceKind, note: str, declared: bool = False) -> Evidence:
        """New evidence derived from this one."""
        return Evidence(kind, note, premises=(self,), declared=declared, attractor=self.attractor)


def _bound_key(key) -> tuple:
    a, B = key
    return (order_key(a), len(B), [order_key(b) for b in sorted_states(B)])
