"""Pedersen commitments, Schnorr kernel signatures and a bit-decomposition range proof.

Every commitment is ``r*G + v*H``. Signatures are Schnorr over ``G`` with a
Fiat-Shamir challenge and deterministic nonces so that all golden files are
reproducible. The range proof commits to each bit of ``v`` and proves with a
two-branch OR proof that each bit commitment opens to 0 or 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

from .group import DecodeError, Group, GroupElement

# A commitment is just a point; openings live with the builder (see tx.Opening).
Commitment = GroupElement

EMPTY_MSG = b""


class RangeViolation(ValueError):
    """The value to prove is outside ``[0, 2**n)``."""


def commit(group: Group, r: int, v: int) -> Commitment:
    return group.scalar_mul(r, group.G) + group.scalar_mul(v, group.H)


# --------------------------------------------------------------------------
# Schnorr signatures
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class KernelSignature:
    R: GroupElement
    s: int

    def to_dict(self) -> dict:
        g = self.R.group
        return {"R": self.R.hex(), "s": g.scalar_hex(self.s)}

    @classmethod
    def from_dict(cls, d: dict, group: Group) -> "KernelSignature":
        try:
            return cls(group.element_from_hex(d["R"]), group.scalar_from_hex(d["s"]))
        except (KeyError, TypeError) as exc:
            raise DecodeError(f"bad signature object: {exc}") from exc


def challenge(group: Group, R: GroupElement, P: GroupElement, msg: bytes) -> int:
    return group.hash_to_scalar(b"mwref/sig/challenge", R.to_bytes(), P.to_bytes(), msg)


def _nonce(group: Group, sk: int, msg: bytes) -> int:
    k = group.hash_to_scalar(b"mwref/sig/nonce", group.scalar_to_bytes(sk), msg)
    return k or 1


def sign(group: Group, sk: int, msg: bytes = EMPTY_MSG) -> KernelSignature:
    sk %= group.q
    k = _nonce(group, sk, msg)
    R = group.scalar_mul(k, group.G)
    P = group.scalar_mul(sk, group.G)
    e = challenge(group, R, P, msg)
    return KernelSignature(R, (k + e * sk) % group.q)


def verify(pk: GroupElement, msg: bytes, sig: KernelSignature) -> bool:
    group = pk.group
    if sig.R.group.name != group.name or not 0 <= sig.s < group.q:
        return False
    e = challenge(group, sig.R, pk, msg)
    return group.scalar_mul(sig.s, group.G) == sig.R + group.scalar_mul(e, pk)


# --------------------------------------------------------------------------
# Range proofs
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BitProof:
    """Two-branch OR proof that a bit commitment hides 0 or 1.

    Branch 0 proves knowledge of ``log_G(C)``, branch 1 of ``log_G(C - H)``.
    The ``R`` values are recomputed by the verifier, so only challenges and
    responses are stored.
    """

    e0: int
    e1: int
    s0: int
    s1: int


@dataclass(frozen=True)
class RangeProof:
    n: int
    bit_commitments: tuple[GroupElement, ...]
    bit_proofs: tuple[BitProof, ...]

    def proven_commitment(self) -> GroupElement | None:
        """``sum_j 2^j C_j``, the commitment this proof speaks about."""
        if not self.bit_commitments:
            return None
        group = self.bit_commitments[0].group
        acc = group.identity
        for j, c in enumerate(self.bit_commitments):
            acc = acc + group.scalar_mul(1 << j, c)
        return acc

    def to_dict(self) -> dict:
        g = self.bit_commitments[0].group if self.bit_commitments else None
        return {
            "n": self.n,
            "bit_commitments": [c.hex() for c in self.bit_commitments],
            "bit_proofs": [
                {k: g.scalar_hex(getattr(bp, k)) for k in ("e0", "e1", "s0", "s1")}
                for bp in self.bit_proofs
            ],
        }

    @classmethod
    def from_dict(cls, d: dict, group: Group) -> "RangeProof":
        try:
            return cls(
                int(d["n"]),
                tuple(group.element_from_hex(h) for h in d["bit_commitments"]),
                tuple(
                    BitProof(*(group.scalar_from_hex(bp[k]) for k in ("e0", "e1", "s0", "s1")))
                    for bp in d["bit_proofs"]
                ),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, DecodeError):
                raise
            raise DecodeError(f"bad range proof object: {exc}") from exc

    def to_bytes(self) -> bytes:
        g = self.bit_commitments[0].group
        out = bytearray([self.n])
        for c, bp in zip(self.bit_commitments, self.bit_proofs):
            out += c.to_bytes()
            for k in (bp.e0, bp.e1, bp.s0, bp.s1):
                out += g.scalar_to_bytes(k)
        return bytes(out)

    @classmethod
    def from_bytes(cls, raw: bytes, group: Group) -> "RangeProof":
        if not raw:
            raise DecodeError("empty range proof")
        n = raw[0]
        ew = len(group.identity.to_bytes())
        sw = group.scalar_width
        step = ew + 4 * sw
        if len(raw) != 1 + n * step:
            raise DecodeError("range proof length mismatch")
        cs, bps = [], []
        for j in range(n):
            chunk = raw[1 + j * step: 1 + (j + 1) * step]
            cs.append(group.deserialize(chunk[:ew]))
            bps.append(BitProof(*(group.scalar_from_bytes(chunk[ew + i * sw: ew + (i + 1) * sw]) for i in range(4))))
        return cls(n, tuple(cs), tuple(bps))


def _bit_challenge(group: Group, j: int, C: GroupElement, R0: GroupElement, R1: GroupElement) -> int:
    return group.hash_to_scalar(b"mwref/rp/challenge", j.to_bytes(2, "big"), C.to_bytes(), R0.to_bytes(), R1.to_bytes())


def prove_bit(group: Group, j: int, C: GroupElement, r_j: int, bit: int) -> BitProof:
    """OR proof for ``C = r_j*G + bit*H``. Run with ``bit`` outside {0,1} it yields a non-verifying transcript."""
    q = group.q
    P = (C, C - group.H)
    real = 1 if bit == 1 else 0
    fake = 1 - real
    seed = (group.scalar_to_bytes(r_j), j.to_bytes(2, "big"), C.to_bytes())
    k = group.hash_to_scalar(b"mwref/rp/nonce", *seed) or 1
    e_f = group.hash_to_scalar(b"mwref/rp/fake-e", *seed)
    s_f = group.hash_to_scalar(b"mwref/rp/fake-s", *seed)
    R = [None, None]
    R[fake] = group.scalar_mul(s_f, group.G) - group.scalar_mul(e_f, P[fake])
    R[real] = group.scalar_mul(k, group.G)
    e = _bit_challenge(group, j, C, R[0], R[1])
    e_r = (e - e_f) % q
    s_r = (k + e_r * r_j) % q
    es = [0, 0]
    ss = [0, 0]
    es[real], ss[real] = e_r, s_r
    es[fake], ss[fake] = e_f, s_f
    return BitProof(es[0], es[1], ss[0], ss[1])


def verify_bit(group: Group, j: int, C: GroupElement, bp: BitProof) -> bool:
    q = group.q
    if not all(0 <= x < q for x in (bp.e0, bp.e1, bp.s0, bp.s1)):
        return False
    R0 = group.scalar_mul(bp.s0, group.G) - group.scalar_mul(bp.e0, C)
    R1 = group.scalar_mul(bp.s1, group.G) - group.scalar_mul(bp.e1, C - group.H)
    return (bp.e0 + bp.e1) % q == _bit_challenge(group, j, C, R0, R1)


def bit_blindings(group: Group, r: int, v: int, n: int) -> list[int]:
    """Deterministic per-bit blindings with ``sum_j 2^j r_j = r``."""
    rs = [group.hash_to_scalar(b"mwref/rp/blind", group.scalar_to_bytes(r), group.scalar_to_bytes(v),
                               j.to_bytes(2, "big")) for j in range(1, n)]
    r0 = (r - sum((1 << j) * rj for j, rj in enumerate(rs, start=1))) % group.q
    return [r0] + rs


class RangeProver(Protocol):
    def prove(self, group: Group, r: int, v: int, n: int) -> RangeProof: ...

    def verify(self, c: Commitment, proof: RangeProof) -> bool: ...


class BitDecompositionProver:
    """Commit to every bit and attach a per-bit OR proof. Proof size is linear in ``n``."""

    max_bits = 64

    def prove(self, group: Group, r: int, v: int, n: int) -> RangeProof:
        if not 1 <= n <= self.max_bits:
            raise ValueError(f"bit width must be in [1, {self.max_bits}]")
        if not 0 <= v < (1 << n):
            raise RangeViolation(f"value {v} outside [0, 2^{n})")
        r %= group.q
        rs = bit_blindings(group, r, v, n)
        cs, bps = [], []
        for j, r_j in enumerate(rs):
            bit = (v >> j) & 1
            C = commit(group, r_j, bit)
            cs.append(C)
            bps.append(prove_bit(group, j, C, r_j, bit))
        return RangeProof(n, tuple(cs), tuple(bps))

    def verify(self, c: Commitment, proof: RangeProof) -> bool:
        group = c.group
        if not 1 <= proof.n <= self.max_bits:
            return False
        if len(proof.bit_commitments) != proof.n or len(proof.bit_proofs) != proof.n:
            return False
        if any(C.group.name != group.name for C in proof.bit_commitments):
            return False
        if proof.proven_commitment() != c:
            return False
        return all(verify_bit(group, j, C, bp)
                   for j, (C, bp) in enumerate(zip(proof.bit_commitments, proof.bit_proofs)))


DEFAULT_PROVER: RangeProver = BitDecompositionProver()


def prove_range(group: Group, r: int, v: int, n: int) -> RangeProof:
    return DEFAULT_PROVER.prove(group, r, v, n)


def verify_range(c: Commitment, proof: RangeProof) -> bool:
    return DEFAULT_PROVER.verify(c, proof)
