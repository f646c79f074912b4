"""Validation outcomes. Invalid inputs are reported as verdicts, never raised."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class Reason(str, Enum):
    RANGE_PROOF = "RangeProof"
    KERNEL_SIGNATURE = "KernelSignature"
    UNBALANCED = "Unbalanced"
    DUPLICATE_INPUT = "DuplicateInput"
    BALANCE_EQUATION = "BalanceEquation"
    UNKNOWN_INPUT = "UnknownInput"
    DOUBLE_SPEND = "DoubleSpend"
    NOT_GENESIS = "NotGenesis"
    GENESIS_INPUTS = "GenesisInputs"
    MISPLACED_GENESIS = "MisplacedGenesis"
    UNEXPECTED_SUPPLY = "UnexpectedSupply"
    EMPTY_CHAIN = "EmptyChain"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Verdict:
    ok: bool
    reason: Reason | None = None
    index: int | None = None
    block: int | None = None
    detail: str = field(default="", compare=False)

    @classmethod
    def valid(cls) -> "Verdict":
        return cls(True)

    @classmethod
    def invalid(cls, reason: Reason, index: int | None = None, *, block: int | None = None,
                detail: str = "") -> "Verdict":
        return cls(False, reason, index, block, detail)

    def at_block(self, i: int) -> "Verdict":
        return Verdict(self.ok, self.reason, self.index, i, self.detail)

    def __bool__(self) -> bool:
        return self.ok

    def __str__(self) -> str:
        if self.ok:
            return "Valid"
        where = []
        if self.block is not None:
            where.append(f"block={self.block}")
        if self.index is not None:
            where.append(f"index={self.index}")
        suffix = f" [{', '.join(where)}]" if where else ""
        extra = f": {self.detail}" if self.detail else ""
        return f"Invalid({self.reason}){suffix}{extra}"

    def to_dict(self) -> dict:
        return {"valid": self.ok, "reason": None if self.reason is None else self.reason.value,
                "index": self.index, "block": self.block, "detail": self.detail}
