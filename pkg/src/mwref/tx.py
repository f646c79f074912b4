"""Confidential transactions: construction, excess and the three-clause validity check."""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

from . import crypto
from .crypto import EMPTY_MSG, KernelSignature, RangeProof
from .group import DecodeError, Group, GroupElement
from .verdict import Reason, Verdict


class ImbalanceError(ValueError):
    """Output values do not sum to input values."""


@dataclass(frozen=True)
class Opening:
    """Builder-side secret behind a commitment. Never serialized."""

    r: int
    v: int

    def commitment(self, group: Group) -> GroupElement:
        return crypto.commit(group, self.r, self.v)


@dataclass(frozen=True)
class TxKernel:
    excess: GroupElement
    signature: KernelSignature
    range_proofs: tuple[RangeProof, ...] = ()

    def to_dict(self) -> dict:
        return {
            "excess": self.excess.hex(),
            "sig": self.signature.to_dict(),
            "range_proofs": [p.to_dict() for p in self.range_proofs],
        }

    @classmethod
    def from_dict(cls, d: dict, group: Group) -> "TxKernel":
        try:
            return cls(
                group.element_from_hex(d["excess"]),
                KernelSignature.from_dict(d["sig"], group),
                tuple(RangeProof.from_dict(p, group) for p in d.get("range_proofs", [])),
            )
        except (KeyError, TypeError) as exc:
            raise DecodeError(f"bad kernel object: {exc}") from exc


def canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


@dataclass(frozen=True, eq=False)
class Transaction:
    group: Group = field(repr=False)
    inputs: tuple[GroupElement, ...] = ()
    outputs: tuple[GroupElement, ...] = ()
    kernels: tuple[TxKernel, ...] = ()
    # builder-side only; needed to re-blind a kernel when aggregating with an offset
    kernel_secrets: tuple[int, ...] | None = field(default=None, repr=False)
    output_openings: tuple[Opening, ...] | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "inputs": [c.hex() for c in self.inputs],
            "outputs": [c.hex() for c in self.outputs],
            "kernels": [k.to_dict() for k in self.kernels],
        }

    @classmethod
    def from_dict(cls, d: dict, group: Group) -> "Transaction":
        try:
            return cls(
                group,
                tuple(group.element_from_hex(h) for h in d["inputs"]),
                tuple(group.element_from_hex(h) for h in d["outputs"]),
                tuple(TxKernel.from_dict(k, group) for k in d["kernels"]),
            )
        except (KeyError, TypeError) as exc:
            raise DecodeError(f"bad transaction object: {exc}") from exc

    @cached_property
    def digest(self) -> str:
        return hashlib.sha256(self.group.name.encode() + b"|" + canonical_json(self.to_dict())).hexdigest()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Transaction):
            return NotImplemented
        return self.digest == other.digest

    def __hash__(self) -> int:
        return hash(self.digest)

    @property
    def range_proofs(self) -> list[RangeProof]:
        return [p for k in self.kernels for p in k.range_proofs]

    def replace(self, **changes) -> "Transaction":
        fields = dict(group=self.group, inputs=self.inputs, outputs=self.outputs, kernels=self.kernels)
        fields.update(changes)
        return Transaction(**fields)


def sum_points(group: Group, points: Iterable[GroupElement]) -> GroupElement:
    acc = group.identity
    for p in points:
        acc = acc + p
    return acc


def excess_of(tx: Transaction) -> GroupElement:
    """Sum of output commitments minus sum of input commitments."""
    g = tx.group
    return sum_points(g, tx.outputs) - sum_points(g, tx.inputs)


def build_transaction(
    group: Group,
    spends: Sequence[Opening],
    outputs: Sequence[tuple[int, int | None]],
    signer_secret: int | None = None,
    n_bits: int = 8,
    msg: bytes = EMPTY_MSG,
) -> Transaction:
    """Spend ``spends`` into ``outputs`` given as ``(value, blinding)`` pairs.

    At most one output may leave its blinding as ``None``; it is then chosen so
    that the excess equals ``signer_secret * G`` (the receiver adding their own
    blinding factor). With all blindings fixed, ``signer_secret`` is either
    omitted or must match ``sum(r') - sum(r)``.
    """
    q = group.q
    in_value = sum(o.v for o in spends)
    out_value = sum(v for v, _ in outputs)
    if in_value != out_value:
        raise ImbalanceError(f"inputs carry {in_value}, outputs {out_value}")

    in_blind = sum(o.r for o in spends) % q
    free = [i for i, (_, r) in enumerate(outputs) if r is None]
    if len(free) > 1:
        raise ValueError("at most one output blinding may be left open")
    fixed = sum(r for _, r in outputs if r is not None) % q
    if free:
        sk = (signer_secret or 0) % q
        openings = [Opening(r % q if r is not None else (sk + in_blind - fixed) % q, v) for v, r in outputs]
    else:
        openings = [Opening(r % q, v) for v, r in outputs]
        sk = (fixed - in_blind) % q
        if signer_secret is not None and signer_secret % q != sk:
            raise ValueError("signer_secret disagrees with the fixed output blindings")

    proofs = tuple(crypto.prove_range(group, o.r, o.v, n_bits) for o in openings)
    kernel = TxKernel(group.scalar_mul(sk, group.G), crypto.sign(group, sk, msg), proofs)
    return Transaction(
        group,
        tuple(o.commitment(group) for o in spends),
        tuple(o.commitment(group) for o in openings),
        (kernel,),
        kernel_secrets=(sk,),
        output_openings=tuple(openings),
    )


def validate_transaction(tx: Transaction, msg: bytes = EMPTY_MSG) -> Verdict:
    """Valid iff inputs are distinct, every output's range proof verifies,
    every kernel signature verifies under its excess, and the transaction is
    balanced: outputs minus inputs equals the sum of kernel excesses.

    A signature under an excess proves the signer knows its discrete log
    w.r.t. ``G``, i.e. the excess carries no ``H`` component and no value was
    created.
    """
    dup = [c for c, n in Counter(tx.inputs).items() if n > 1]
    if dup:
        return Verdict.invalid(Reason.DUPLICATE_INPUT, tx.inputs.index(dup[0]))

    proofs = tx.range_proofs
    for j, out in enumerate(tx.outputs):
        if j >= len(proofs):
            return Verdict.invalid(Reason.RANGE_PROOF, j, detail="missing range proof")
        if not crypto.verify_range(out, proofs[j]):
            return Verdict.invalid(Reason.RANGE_PROOF, j)
    if len(proofs) != len(tx.outputs):
        return Verdict.invalid(Reason.RANGE_PROOF, len(tx.outputs), detail="surplus range proofs")

    for k, kernel in enumerate(tx.kernels):
        if not crypto.verify(kernel.excess, msg, kernel.signature):
            return Verdict.invalid(Reason.KERNEL_SIGNATURE, k)

    if excess_of(tx) != sum_points(tx.group, (k.excess for k in tx.kernels)):
        return Verdict.invalid(Reason.UNBALANCED)
    return Verdict.valid()
