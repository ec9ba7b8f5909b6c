import os

import pytest
from hypothesis import given, settings, strategies as st

from chronocache import crypto_core
from chronocache.crypto_core import (NodeKeySet, decrypt, derive_tag, encrypt, keygen,
                                     nonce_from_tag)
from chronocache.errors import DecryptionError, ValidationError
from chronocache.time_tree import TreeParams

ZERO_KEY = bytes(32)
# openssl dgst -sha256 -mac HMAC -macopt hexkey:00..00 over "abc" || 8-byte big-endian node
T1 = bytes.fromhex("01b3214dae84ff8a70d45b5924f9c46a9f177818e82014b3dad91a1b331da0f5")
T2 = bytes.fromhex("3586f4f04ef33b69e92d94a9cd6c133ac4e7bc776a0ca532e13d7202e210e6c9")


@pytest.mark.parametrize("m,count", [(1, 3), (4, 31)])
def test_keygen_sizes(m, count):
    ks = keygen(TreeParams(m))
    assert len(ks) == count
    assert sorted(ks) == list(range(1, count + 1))
    assert all(len(k) == 32 for k in ks.values())


def test_keygen_independent_draws():
    a, b = keygen(TreeParams(3)), keygen(TreeParams(3))
    assert not set(a.values()) & set(b.values())
    assert len(set(a.values())) == len(a)


def test_keygen_short_entropy():
    with pytest.raises(RuntimeError):
        keygen(TreeParams(1), lambda n: b"short")


def test_keyset_json_roundtrip(tmp_path):
    ks = keygen(TreeParams(2))
    ks.save(tmp_path / "k.json")
    again = NodeKeySet.load(tmp_path / "k.json")
    assert dict(again) == dict(ks) and again.params == ks.params
    obj = ks.to_json()
    assert obj["m"] == 2 and set(obj["keys"]) == {str(j) for j in range(1, 8)}
    assert all("=" not in v for v in obj["keys"].values())


def test_keyset_incomplete_rejected():
    with pytest.raises(ValidationError):
        NodeKeySet(TreeParams(1), {1: ZERO_KEY, 2: ZERO_KEY})


def test_mac_key_file(tmp_path):
    k = crypto_core.gen_mac_key()
    crypto_core.save_mac_key(k, tmp_path / "mac.json")
    assert crypto_core.load_mac_key(tmp_path / "mac.json") == k


def test_derive_tag_reference_values():
    assert derive_tag(ZERO_KEY, b"abc", 1) == T1
    assert derive_tag(ZERO_KEY, b"abc", 2) == T2
    assert derive_tag(ZERO_KEY, b"abc", 1) == derive_tag(ZERO_KEY, b"abc", 1)


def test_derive_tag_fixed_width_node():
    # without fixed-width encoding these two inputs would collide
    assert derive_tag(ZERO_KEY, b"a1", 2) != derive_tag(ZERO_KEY, b"a", 12)


def test_derive_tag_rejects_empty():
    with pytest.raises(ValidationError):
        derive_tag(ZERO_KEY, b"", 1)


def test_tags_collision_free_corpus():
    key = os.urandom(32)
    tags = {derive_tag(key, os.urandom(16), j) for j in range(1, 10_001)}
    assert len(tags) == 10_000


def test_nonce_from_tag():
    tag = bytes(range(32))
    assert nonce_from_tag(tag) == bytes(range(16))
    assert nonce_from_tag(tag, 96) == bytes(range(12))
    assert nonce_from_tag(os.urandom(32)) != nonce_from_tag(os.urandom(32))
    with pytest.raises(ValidationError):
        nonce_from_tag(tag[:31])
    with pytest.raises(ValidationError):
        nonce_from_tag(tag, 64)


@pytest.mark.parametrize("nonce_bits", [96, 128])
def test_encrypt_roundtrip_and_overhead(nonce_bits):
    key, tag = os.urandom(32), os.urandom(32)
    ct = encrypt(key, tag, b"hello", nonce_bits=nonce_bits)
    assert len(ct) == 5 + 16
    assert decrypt(key, tag, ct, nonce_bits=nonce_bits) == b"hello"
    assert encrypt(key, tag, b"hello", nonce_bits=nonce_bits) == ct


def test_nonce_modes_differ():
    key, tag = os.urandom(32), os.urandom(32)
    ct = encrypt(key, tag, b"hello", nonce_bits=128)
    with pytest.raises(DecryptionError):
        decrypt(key, tag, ct, nonce_bits=96)


def test_distinct_nodes_distinct_ciphertexts():
    ks = keygen(TreeParams(2))
    mac = crypto_core.gen_mac_key()
    c = b"same content"
    t1, t3 = derive_tag(mac, c, 1), derive_tag(mac, c, 3)
    assert encrypt(ks[1], t1, c) != encrypt(ks[3], t3, c)


def test_decrypt_failures():
    ks = keygen(TreeParams(2))
    tag = os.urandom(32)
    ct = encrypt(ks[1], tag, b"payload")
    flipped = bytearray(ct)
    flipped[3] ^= 0x01
    with pytest.raises(DecryptionError):
        decrypt(ks[1], tag, bytes(flipped))
    with pytest.raises(DecryptionError):
        decrypt(ks[2], tag, ct)
    with pytest.raises(DecryptionError):
        decrypt(ks[1], os.urandom(32), ct)
    with pytest.raises(DecryptionError):
        decrypt(ks[1], tag, ct[:10])


@settings(max_examples=60, deadline=None)
@given(st.binary(min_size=1, max_size=4096), st.binary(min_size=32, max_size=32),
       st.binary(min_size=32, max_size=32))
def test_roundtrip_property(msg, key, tag):
    assert decrypt(key, tag, encrypt(key, tag, msg)) == msg


def test_roundtrip_large():
    key, tag = os.urandom(32), os.urandom(32)
    msg = os.urandom(1 << 20)
    assert decrypt(key, tag, encrypt(key, tag, msg)) == msg


def test_b64url_helpers():
    assert crypto_core.b64url_encode(b"\xff\xfe") == "__4"
    assert crypto_core.b64url_decode("__4") == b"\xff\xfe"


def test_seeded_entropy_is_reproducible():
    a = keygen(TreeParams(2), crypto_core.seeded_entropy(5))
    b = keygen(TreeParams(2), crypto_core.seeded_entropy(5))
    assert dict(a) == dict(b)
