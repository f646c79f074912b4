import random

import pytest

from mwref import crypto
from mwref.crypto import RangeViolation, commit
from mwref.group import DecodeError
from mwref.tx import (
    ImbalanceError, Opening, Transaction, TxKernel, build_transaction, excess_of, validate_transaction,
)
from mwref.verdict import Reason


def test_excess_of_empty(group):
    assert excess_of(Transaction(group)).is_identity()


def test_excess_of_single_pair(group):
    tx = Transaction(group, (commit(group, 2, 5),), (commit(group, 3, 5),))
    assert excess_of(tx) == group.G


def test_excess_of_brute_force(transparent):
    g, q = transparent, transparent.q
    rng = random.Random(5)
    for _ in range(50):
        ins = [(rng.randrange(q), rng.randrange(q)) for _ in range(3)]
        outs = [(rng.randrange(q), rng.randrange(q)) for _ in range(2)]
        tx = Transaction(g, tuple(commit(g, r, v) for r, v in ins), tuple(commit(g, r, v) for r, v in outs))
        expect = (sum(r + 5657 * v for r, v in outs) - sum(r + 5657 * v for r, v in ins)) % q
        assert excess_of(tx).data == expect


def test_build_single(group):
    tx = build_transaction(group, [Opening(2, 5)], [(5, 7)], n_bits=4)
    assert tx.kernels[0].excess == group.scalar_mul(5, group.G)
    assert tx.kernel_secrets == (5,)
    assert crypto.verify(group.scalar_mul(5, group.G), b"", tx.kernels[0].signature)
    assert validate_transaction(tx)


def test_build_rejects_imbalance(group):
    with pytest.raises(ImbalanceError):
        build_transaction(group, [Opening(2, 5)], [(6, 7)])


def test_build_rejects_out_of_range(group):
    with pytest.raises(RangeViolation):
        build_transaction(group, [Opening(2, 20)], [(20, 7)], n_bits=4)


def test_build_receiver_blinding(group):
    # the open output blinding is fixed so that the excess is signer_secret*G
    tx = build_transaction(group, [Opening(10, 3), Opening(20, 4)], [(2, 99), (5, None)], signer_secret=77)
    assert tx.kernels[0].excess == group.scalar_mul(77, group.G)
    assert validate_transaction(tx)
    with pytest.raises(ValueError):
        build_transaction(group, [Opening(10, 3)], [(1, None), (2, None)])
    with pytest.raises(ValueError):
        build_transaction(group, [Opening(10, 3)], [(3, 12)], signer_secret=5)


def test_multi_io_random_valid(group):
    rng = random.Random(9)
    for _ in range(20):
        spends = [Opening(rng.randrange(1, group.q), rng.randrange(0, 8)) for _ in range(rng.randint(1, 3))]
        total = sum(o.v for o in spends)
        a = rng.randint(0, total)
        tx = build_transaction(group, spends, [(a, rng.randrange(group.q)), (total - a, rng.randrange(group.q))], n_bits=4)
        assert validate_transaction(tx)
        r_in = sum(o.r for o in spends)
        r_out = sum(o.r for o in tx.output_openings)
        assert excess_of(tx) == group.scalar_mul(r_out - r_in, group.G)


def test_value_from_thin_air_breaks_signature(group):
    # bump an output by H, re-prove its range and recompute the excess honestly
    tx = build_transaction(group, [Opening(2, 5)], [(5, 7)], n_bits=4)
    bumped = commit(group, 7, 6)
    proof = crypto.prove_range(group, 7, 6, 4)
    k = tx.kernels[0]
    forged = Transaction(group, tx.inputs, (bumped,), (TxKernel(bumped - tx.inputs[0], k.signature, (proof,)),))
    v = validate_transaction(forged)
    assert v.reason == Reason.KERNEL_SIGNATURE and v.index == 0


def test_bumped_output_keeping_excess_is_unbalanced(group):
    tx = build_transaction(group, [Opening(2, 5)], [(5, 7)], n_bits=4)
    k = tx.kernels[0]
    forged = Transaction(group, tx.inputs, (commit(group, 7, 6),),
                         (TxKernel(k.excess, k.signature, (crypto.prove_range(group, 7, 6, 4),)),))
    assert validate_transaction(forged).reason == Reason.UNBALANCED


def test_wrong_range_proof(group):
    tx = build_transaction(group, [Opening(2, 5)], [(2, 7), (3, 8)], n_bits=4)
    k = tx.kernels[0]
    bad = (k.range_proofs[0], crypto.prove_range(group, 8, 4, 4))
    v = validate_transaction(tx.replace(kernels=(TxKernel(k.excess, k.signature, bad),)))
    assert v.reason == Reason.RANGE_PROOF and v.index == 1


def test_missing_and_surplus_proofs(group):
    tx = build_transaction(group, [Opening(2, 5)], [(2, 7), (3, 8)], n_bits=4)
    k = tx.kernels[0]
    short = tx.replace(kernels=(TxKernel(k.excess, k.signature, k.range_proofs[:1]),))
    assert validate_transaction(short).reason == Reason.RANGE_PROOF
    extra = tx.replace(kernels=(TxKernel(k.excess, k.signature, k.range_proofs + k.range_proofs[:1]),))
    assert validate_transaction(extra).reason == Reason.RANGE_PROOF


def test_duplicate_input(group):
    tx = build_transaction(group, [Opening(2, 1), Opening(2, 1)], [(2, 7)], n_bits=4)
    v = validate_transaction(tx)
    assert v.reason == Reason.DUPLICATE_INPUT and v.index == 0


def test_validation_is_pure_in_serialized_form(group):
    tx = build_transaction(group, [Opening(2, 5)], [(1, 7), (4, 8)], n_bits=4)
    back = Transaction.from_dict(tx.to_dict(), group)
    assert back == tx and back.kernel_secrets is None
    assert validate_transaction(back) == validate_transaction(tx)


def test_decode_errors(group):
    with pytest.raises(DecodeError):
        Transaction.from_dict({"inputs": []}, group)
    with pytest.raises(DecodeError):
        Transaction.from_dict({"inputs": ["zz"], "outputs": [], "kernels": []}, group)
