import numpy as np
import pytest

from shapcert.datasets import synth_gaussian
from shapcert.params import PublicParams
from shapcert.pipeline import check_run, full_run, valuate_phase, commit_phase, deterministic_salts
from shapcert.protocol import provider_verify, verify
from shapcert.valuation import lsh_shapley


def small_pp(**kw):
    base = dict(
        n_train=32, n_test=8, dim=4, num_classes=2, num_tables=2, depth=3,
        providers=2, hash_seed=7, col_checks=12,
    )
    base.update(kw)
    return PublicParams(**base)


def make_run(pp=None, seed=None, audit=True):
    pp = pp or small_pp()
    train, val = synth_gaussian(pp.n_train, pp.n_test, pp.dim, pp.num_classes,
                                seed if seed is not None else pp.hash_seed)
    return full_run(train, val, pp, audit=audit)


def test_honest_proof_verifies():
    run = make_run()
    res = check_run(run)
    assert res.ok, f"{res.section}: {res.check}"
    assert np.array_equal(res.svavg, run.oset.svavg_field)


def test_scores_in_proof_match_plaintext():
    run = make_run()
    res = check_run(run)
    plain = lsh_shapley(run.train, run.val, run.hash_params, run.harmonic)
    assert np.array_equal(res.svavg, np.array(plain.field_encodings(), dtype=np.uint64))


def test_verify_without_public_record_inputs():
    # verification is possible from the proof alone (self-contained)
    run = make_run()
    assert verify(run.proof).ok


def test_truncated_proof_rejected():
    run = make_run()
    res = verify(run.proof[: len(run.proof) // 2])
    assert not res.ok and res.section == "parse"


def test_bitflip_anywhere_rejected():
    run = make_run()
    data = bytearray(run.proof)
    rng = np.random.default_rng(0)
    for _ in range(6):
        pos = int(rng.integers(4, len(data)))
        mutated = bytearray(data)
        mutated[pos] ^= 0x40
        res = verify(bytes(mutated), run.provider_digests, run.buyer_digest)
        assert not res.ok


def test_wrong_provider_digest_rejected():
    run = make_run()
    wrong = list(run.provider_digests)
    wrong[0], wrong[1] = wrong[1], wrong[0]
    res = verify(run.proof, wrong, run.buyer_digest)
    assert not res.ok and res.section == "commit"


def test_score_tamper_rejected():
    # operator publishes altered scores: flip one svavg entry inside the proof
    run = make_run()
    pp = run.pp
    from shapcert.protocol import _parse_header, WAVE1_ORACLES
    from shapcert.pcs import BYTES_PER_DIGEST

    _, off = _parse_header(run.proof)
    off += (pp.providers + 1 + len(WAVE1_ORACLES) + pp.providers) * BYTES_PER_DIGEST
    data = bytearray(run.proof)
    cell = np.frombuffer(data[off : off + 8], dtype="<u8")[0]
    data[off : off + 8] = np.array([(int(cell) + 1) % (2**63)], dtype="<u8").tobytes()
    res = verify(bytes(data), run.provider_digests, run.buyer_digest)
    assert not res.ok


def test_histogram_tamper_rejected():
    # corrupt cnt before proving; honest prover machinery must yield a rejectable proof
    run = make_run(audit=True)
    oset = run.oset
    vals = oset.oracle("cnt").values.copy()
    vals[0] = (int(vals[0]) + 1) % 97
    oset.oracles["cnt"].values = vals
    from shapcert.pipeline import prove, pcs_commit, pcs_setup
    from shapcert.witness import shard_oracle

    pp = run.pp
    shard_params = pcs_setup(pp.log_d + pp.log_slice + 1, pp.col_checks)
    shard_oracles = [shard_oracle(run.train, run.part, p, pp) for p in range(pp.providers)]
    shard_states = [pcs_commit(o.values, shard_params)[1] for o in shard_oracles]
    report = prove(oset, run.part, shard_oracles, shard_states,
                   run.provider_digests, run.buyer_digest, run.harmonic)
    res = verify(report.proof, run.provider_digests, run.buyer_digest)
    assert not res.ok


def test_weight_tamper_rejected():
    run = make_run()
    oset = run.oset
    w = oset.oracle("w").values.copy()
    w[3] = (int(w[3]) + run.pp.lambda_scale) % ((1 << 64) - (1 << 32) + 1)
    oset.oracles["w"].values = w
    from shapcert.pipeline import prove, pcs_commit, pcs_setup
    from shapcert.witness import shard_oracle

    pp = run.pp
    shard_params = pcs_setup(pp.log_d + pp.log_slice + 1, pp.col_checks)
    shard_oracles = [shard_oracle(run.train, run.part, p, pp) for p in range(pp.providers)]
    shard_states = [pcs_commit(o.values, shard_params)[1] for o in shard_oracles]
    report = prove(oset, run.part, shard_oracles, shard_states,
                   run.provider_digests, run.buyer_digest, run.harmonic)
    res = verify(report.proof, run.provider_digests, run.buyer_digest)
    assert not res.ok


def test_provider_verify_honest():
    run = make_run()
    pp = run.pp
    s = pp.n_train // pp.providers
    for p in range(pp.providers):
        rows = run.train.features[p * s : (p + 1) * s]
        scores = run.oset.svavg_field[p * s : (p + 1) * s]
        rep = provider_verify(run.proof, p, rows, run.part.salts[p], scores,
                              run.provider_digests, run.buyer_digest)
        assert rep.input_binding and rep.output_binding and rep.transcript_ok, rep.detail


def test_provider_verify_altered_scores_fails_b():
    run = make_run()
    pp = run.pp
    s = pp.n_train // pp.providers
    scores = run.oset.svavg_field[:s].copy()
    scores[0] = (int(scores[0]) + 1) % 1000
    rep = provider_verify(run.proof, 0, run.train.features[:s], run.part.salts[0],
                          scores, run.provider_digests, run.buyer_digest)
    assert rep.input_binding and not rep.output_binding


def test_provider_verify_substituted_shard_fails_a():
    run = make_run()
    pp = run.pp
    s = pp.n_train // pp.providers
    rows = run.train.features[:s].copy()
    rows[0, 0] += 1
    rep = provider_verify(run.proof, 0, rows, run.part.salts[0],
                          run.oset.svavg_field[:s], run.provider_digests, run.buyer_digest)
    assert not rep.input_binding


def test_proof_deterministic():
    a = make_run()
    b = make_run()
    assert a.proof == b.proof


def test_sparsity_on_off_identical_proof():
    pp = small_pp()
    train, val = synth_gaussian(pp.n_train, pp.n_test, pp.dim, pp.num_classes, pp.hash_seed)
    run_on = full_run(train, val, pp, sparsity=True)
    run_off = full_run(train, val, pp, sparsity=False)
    assert run_on.proof == run_off.proof


def test_unbatched_mode_verifies_and_is_larger():
    run_b = make_run(small_pp(batching=True))
    run_u = make_run(small_pp(batching=False))
    assert check_run(run_u).ok
    assert run_u.report.opening_bytes > run_b.report.opening_bytes


def test_multiclass_and_odd_shapes():
    pp = small_pp(n_train=64, n_test=4, num_classes=5, num_tables=4, depth=5,
                  providers=4, dim=8)
    run = make_run(pp)
    res = check_run(run)
    assert res.ok, f"{res.section}: {res.check}"
    plain = lsh_shapley(run.train, run.val, run.hash_params, run.harmonic)
    assert np.array_equal(res.svavg, np.array(plain.field_encodings(), dtype=np.uint64))


def test_single_table_single_provider():
    pp = small_pp(num_tables=1, providers=1)
    run = make_run(pp)
    assert check_run(run).ok
