"""Unit tests for the knowledge-closure audit."""

import random

import pytest

from crawsim.crypto import encrypt, hash_f, hash_f_xor, random_key
from crawsim.secrecy import (
    CipherRecord,
    RunRecorder,
    check_secrecy,
    closure,
    derivation_edges,
    operational_decrypt_check,
)


def test_closure_follows_multi_hop_derivations():
    k = bytes(16)
    k1 = hash_f(k)
    k2 = hash_f_xor(k1, "12")
    universe = {k, k1, k2}
    edges = derivation_edges(universe, {"12"})
    reached = closure({k}, edges, {"12"})
    assert reached == {k, k1, k2}


def test_closure_pruned_to_universe():
    k = bytes(16)
    universe = {k, hash_f_xor(k, "7")}
    # f(k) is a real hash image but not a protocol key, so it must not
    # appear, and nothing may be reached through it
    edges = derivation_edges(universe, {"7"})
    reached = closure({k}, edges, {"7"})
    assert hash_f(k) not in reached
    assert reached == universe


def test_closure_requires_knowing_the_code():
    k = bytes(16)
    derived = hash_f_xor(k, "15")
    edges = derivation_edges({k, derived}, {"15"})
    assert derived not in closure({k}, edges, set())
    assert derived in closure({k}, edges, {"15"})


def test_closure_does_not_run_backwards():
    k = bytes(range(16))
    universe = {k, hash_f(k)}
    edges = derivation_edges(universe, set())
    assert closure({hash_f(k)}, edges, set()) == {hash_f(k)}


def test_window_legality_and_target_override():
    rec = RunRecorder()
    key_in, key_out, key_uni = (bytes([i]) * 16 for i in (1, 2, 3))
    rec.open_window("u1", "A", 100)
    rec.close_window("u1", "A", 200)
    rec.note_knowledge("u1", [key_in, key_out, key_uni])
    rec.record_ciphertext(CipherRecord(key_in, 150, "A", "key_multicast"))
    rec.record_ciphertext(CipherRecord(key_out, 250, "A", "key_multicast"))
    rec.record_ciphertext(CipherRecord(key_uni, 300, "A", "key_unicast", target="u1"))
    violations = check_secrecy(rec)
    assert len(violations) == 1
    assert "t=250" in violations[0]


def test_window_boundaries_are_half_open():
    rec = RunRecorder()
    key = bytes(16)
    rec.open_window("u1", "A", 100)
    rec.close_window("u1", "A", 200)
    rec.note_knowledge("u1", [key])
    rec.record_ciphertext(CipherRecord(key, 100, "A", "content_frame"))
    assert check_secrecy(rec) == []
    rec.record_ciphertext(CipherRecord(key, 200, "A", "content_frame"))
    assert len(check_secrecy(rec)) == 1


def test_other_area_is_not_covered_by_window():
    rec = RunRecorder()
    key = bytes(16)
    rec.open_window("u1", "A", 0)
    rec.note_knowledge("u1", [key])
    rec.record_ciphertext(CipherRecord(key, 10, "B", "key_multicast"))
    assert len(check_secrecy(rec)) == 1


def test_close_without_open_raises():
    rec = RunRecorder()
    rec.open_window("u1", "A", 0)
    rec.close_window("u1", "A", 5)
    with pytest.raises(RuntimeError):
        rec.close_window("u1", "A", 9)


def test_cover_key_leak_via_learned_code_is_detected():
    # forward-secrecy regression: a departed member who remembers an old
    # group key AND has learned a sibling-subtree code can recompute that
    # cover key; the oracle must flag the cover payload once the code is in
    # the member's knowledge, and stay quiet while it is not
    rng = random.Random(5)
    old_ak = random_key(rng)
    cover_key = hash_f_xor(old_ak, "14")  # sibling subtree, off the path
    rec = RunRecorder()
    rec.record_keys([old_ak, cover_key])
    rec.record_codes(["14", "15"])
    rec.note_knowledge("leaver", [old_ak])
    rec.note_codes("leaver", ["1", "15", "157"])  # its own path only
    rec.open_window("leaver", "A", 0)
    rec.close_window("leaver", "A", 100)
    rec.record_ciphertext(CipherRecord(cover_key, 100, "A", "key_multicast"))
    assert check_secrecy(rec) == []
    rec.note_codes("leaver", ["14"])  # the off-path code leaks
    assert len(check_secrecy(rec)) == 1


def test_stale_group_key_reuse_is_detected():
    # if a leave handed out f(old group key) instead of a fresh draw, the
    # leaver reaches it with a plain hash step, no code required
    rng = random.Random(7)
    old_ak = random_key(rng)
    bogus_new = hash_f(old_ak)
    rec = RunRecorder()
    rec.record_keys([old_ak, bogus_new])
    rec.note_knowledge("leaver", [old_ak])
    rec.open_window("leaver", "A", 0)
    rec.close_window("leaver", "A", 100)
    rec.record_ciphertext(CipherRecord(bogus_new, 150, "A", "content_frame"))
    assert len(check_secrecy(rec)) == 1


def test_operational_check_opens_real_ciphertext():
    rng = random.Random(6)
    key = random_key(rng)
    ct = encrypt(key, b"payload")
    rec = RunRecorder()
    rec.note_knowledge("eve", [key])
    rec.record_ciphertext(CipherRecord(key, 40, "A", "content_frame", ciphertext=ct))
    assert len(operational_decrypt_check(rec)) == 1
    # inside a window the same ciphertext is fine
    rec.open_window("eve", "A", 0)
    assert operational_decrypt_check(rec) == []
