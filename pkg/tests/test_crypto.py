import json
import random
from dataclasses import replace
from importlib import resources

import jsonschema
import pytest

from mwref import crypto
from mwref.crypto import BitProof, KernelSignature, RangeProof, RangeViolation, commit, prove_range, sign, verify, verify_range
from mwref.group import DecodeError


def test_commit_zero_is_identity(group):
    assert commit(group, 0, 0).is_identity()


def test_commit_z13(z13):
    assert commit(z13, 3, 4) == z13.element(11)


def test_commit_homomorphic(group):
    rng = random.Random(3)
    for _ in range(1000):
        rv, v, rw, w = (rng.randrange(group.q) for _ in range(4))
        assert commit(group, rv, v) + commit(group, rw, w) == commit(group, rv + rw, v + w)


def test_sign_verify_500_keys(group):
    rng = random.Random(11)
    for _ in range(500):
        sk = rng.randrange(1, group.q)
        pk = group.scalar_mul(sk, group.G)
        sig = sign(group, sk)
        assert verify(pk, b"", sig)
        assert not verify(group.scalar_mul(sk + 1, group.G), b"", sig)
        assert not verify(pk, b"x", sig)


def test_signature_deterministic(group):
    assert sign(group, 42) == sign(group, 42)
    assert sign(group, 42, b"a") != sign(group, 42, b"b")


def test_signature_tamper(group):
    sig = sign(group, 99)
    pk = group.scalar_mul(99, group.G)
    assert not verify(pk, b"", KernelSignature(sig.R, (sig.s + 1) % group.q))
    assert not verify(pk, b"", KernelSignature(sig.R + group.G, sig.s))
    assert not verify(pk, b"", KernelSignature(sig.R, group.q))  # unreduced response


@pytest.mark.parametrize("n", [1, 4])
def test_range_completeness_exhaustive(group, n):
    r = 1234
    for v in range(1 << n):
        assert verify_range(commit(group, r, v), prove_range(group, r, v, n))


def test_range_boundaries(group):
    n = 4
    assert verify_range(commit(group, 5, 0), prove_range(group, 5, 0, n))
    assert verify_range(commit(group, 5, 15), prove_range(group, 5, 15, n))
    with pytest.raises(RangeViolation):
        prove_range(group, 5, 16, n)
    with pytest.raises(RangeViolation):
        prove_range(group, 5, -1, n)


def test_range_proof_binds_value(group):
    r = 777
    proof = prove_range(group, r, 5, 8)
    assert verify_range(commit(group, r, 5), proof)
    assert not verify_range(commit(group, r, 6), proof)


def test_bit_blindings_sum(group):
    rs = crypto.bit_blindings(group, 4321, 9, 6)
    assert sum((1 << j) * rj for j, rj in enumerate(rs)) % group.q == 4321 % group.q


def test_forged_bit_commitment_rejected(group):
    # v = 4 written as bits (0, 2, 0): the weighted sum still opens the output
    r, n = 1000, 3
    c = commit(group, r, 4)
    r1, r2 = 17, 29
    r0 = (r - 2 * r1 - 4 * r2) % group.q
    bits = [(r0, 0), (r1, 2), (r2, 0)]
    cs = tuple(commit(group, rj, b) for rj, b in bits)
    bps = tuple(crypto.prove_bit(group, j, cs[j], rj, b) for j, (rj, b) in enumerate(bits))
    forged = RangeProof(n, cs, bps)
    assert forged.proven_commitment() == c
    assert not verify_range(c, forged)
    assert not crypto.verify_bit(group, 1, cs[1], bps[1])


def test_every_single_field_tamper_rejected(group):
    r, v, n = 4242, 11, 4
    c = commit(group, r, v)
    proof = prove_range(group, r, v, n)
    assert verify_range(c, proof)
    for j in range(n):
        cs = list(proof.bit_commitments)
        cs[j] = cs[j] + group.G
        assert not verify_range(c, replace(proof, bit_commitments=tuple(cs)))
        for name in ("e0", "e1", "s0", "s1"):
            bps = list(proof.bit_proofs)
            bps[j] = replace(bps[j], **{name: (getattr(bps[j], name) + 1) % group.q})
            assert not verify_range(c, replace(proof, bit_proofs=tuple(bps))), (j, name)


def test_structurally_bad_proofs(group):
    c = commit(group, 1, 1)
    proof = prove_range(group, 1, 1, 2)
    assert not verify_range(c, replace(proof, n=3))
    assert not verify_range(c, replace(proof, bit_proofs=proof.bit_proofs[:1]))
    assert not verify_range(c, RangeProof(0, (), ()))
    assert RangeProof(0, (), ()).proven_commitment() is None


def test_proof_round_trips(group):
    proof = prove_range(group, 55, 6, 4)
    assert RangeProof.from_dict(proof.to_dict(), group) == proof
    assert RangeProof.from_bytes(proof.to_bytes(), group) == proof
    sig = sign(group, 5)
    assert KernelSignature.from_dict(sig.to_dict(), group) == sig
    with pytest.raises(DecodeError):
        RangeProof.from_bytes(proof.to_bytes()[:-1], group)
    with pytest.raises(DecodeError):
        RangeProof.from_dict({"n": 1}, group)


def test_schema_accepts_serialized_objects(group):
    from mwref.ledger import Chain, make_genesis
    from mwref.tx import Opening, build_transaction

    schema = json.loads(resources.files("mwref").joinpath("schemas/crypto.schema.json").read_text())
    defs = schema["$defs"]
    tx = build_transaction(group, [Opening(3, 2)], [(1, 8), (1, 9)], n_bits=2)
    chain = Chain((make_genesis(group, [Opening(3, 2)], 2),))

    def check(obj, name):
        jsonschema.validate(obj, {"$defs": defs, "$ref": f"#/$defs/{name}"} if name else schema)

    check(tx.to_dict()["kernels"][0]["range_proofs"][0], "range_proof")
    check(tx.to_dict()["kernels"][0]["sig"], "signature")
    check(tx.to_dict(), "transaction")
    check(chain.to_list()[0], "block")
    check(chain.to_list(), "chain")
    check(chain.to_list(), None)
    with pytest.raises(jsonschema.ValidationError):
        check({"R": "0g", "s": "00"}, "signature")
    assert set(defs) >= {"transaction", "block", "chain", "kernel"}
