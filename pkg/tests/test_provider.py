import os
import random
import threading

import pytest

from chronocache import crypto_core
from chronocache.errors import NoEntryError, NotFoundError, ValidationError
from chronocache.provider import Provider
from chronocache.time_tree import comp_subtree, path

from conftest import make_system


def check_bijection(sp):
    entries = {(name, node): tag for name, rec in sp.contbl.by_name.items()
               for node, (tag, _ct) in rec.entries.items()}
    assert {tag: key for key, tag in entries.items()} == sp.contbl.by_tag
    assert len(entries) == len(sp.contbl.by_tag)


def check_entries_decrypt(sp):
    for rec in sp.contbl.by_name.values():
        for node, (tag, ct) in rec.entries.items():
            assert tag == crypto_core.derive_tag(sp.mac_key, rec.content, node)
            assert crypto_core.decrypt(sp.keyset[node], tag, ct,
                                       nonce_bits=sp.nonce_bits) == rec.content


@pytest.mark.parametrize("m,t,nodes", [(3, 2, [9, 4, 2, 1]), (1, 2, [3, 1])])
def test_send_key(m, t, nodes):
    sp, *_ = make_system(m=m)
    keys = sp.send_key("alice", t)
    assert [j for j, _ in keys] == nodes
    assert all(k == sp.keyset[j] for j, k in keys)
    assert sp.send_key("alice", t) == keys


def test_send_key_m4_sizes():
    sp, *_ = make_system(m=4)
    assert all(len(sp.send_key("u", t)) == 5 for t in range(1, 17))
    with pytest.raises(ValidationError):
        sp.send_key("u", 17)


@pytest.mark.parametrize("t_i,nodes", [(1, {1}), (2, {3, 5, 9}), (4, {3, 11})])
def test_gen_table_cover_entries(t_i, nodes):
    sp, *_ = make_system(m=3)
    tbl = sp.gen_table([("ep", b"episode bytes", t_i)])
    assert set(tbl.by_name["ep"].entries) == nodes
    check_bijection(sp)
    check_entries_decrypt(sp)


def test_gen_table_duplicates():
    sp, *_ = make_system(m=3)
    with pytest.raises(ValidationError):
        sp.gen_table([("a", b"1", 1), ("a", b"2", 1)])
    sp.gen_table([("a", b"1", 1)])
    with pytest.raises(ValidationError):
        sp.gen_table([("a", b"1", 2)])


def test_content_request_flow(catalog):
    sp, *_ = make_system(m=3, catalog=catalog)
    sp.advance_period(2)
    tag = sp.handle_content_request("ep2", 9)
    assert tag == crypto_core.derive_tag(sp.mac_key, catalog["ep2"], 9)
    assert sp.handle_content_request("ep2", 9) == tag
    with pytest.raises(NoEntryError):
        sp.handle_content_request("ep2", 1)
    with pytest.raises(NotFoundError):
        sp.handle_content_request("nope", 9)
    with pytest.raises(ValidationError):
        sp.handle_content_request("ep2", 0)


def test_cache_request(catalog):
    sp, *_ = make_system(m=3, catalog=catalog)
    tag = sp.handle_content_request("ep1", 1)
    ct = sp.handle_cache_request(tag)
    assert crypto_core.decrypt(sp.keyset[1], tag, ct) == catalog["ep1"]
    assert sp.handle_cache_request(tag) == ct
    with pytest.raises(NotFoundError):
        sp.handle_cache_request(os.urandom(32))
    with pytest.raises(ValidationError):
        sp.handle_cache_request(b"short")


def test_advance_period(catalog):
    sp, *_ = make_system(m=3, catalog=catalog)
    assert sp.current_cover() == {1}
    sp.advance_period(2)
    assert sp.current_cover() == {3, 5, 9}
    sp.advance_period(2)
    assert sp.t_curr == 2
    with pytest.raises(ValidationError):
        sp.advance_period(1)


def test_entries_survive_period_change(catalog):
    sp, *_ = make_system(m=3, catalog=catalog)
    sp.advance_period(2)
    tag3 = sp.handle_content_request("ep1", 3)
    sp.advance_period(5)
    assert 3 in sp.current_cover()
    assert sp.handle_content_request("ep1", 3) == tag3
    assert sp.handle_cache_request(tag3)


def test_random_operations_keep_invariants(catalog):
    sp, *_ = make_system(m=4, catalog=catalog)
    rng = random.Random(3)
    per_period = {}
    for t in range(1, 17):
        sp.advance_period(t)
        cover = sorted(comp_subtree(sp.params, t - 1))
        for _ in range(30):
            name = rng.choice(list(catalog))
            node = rng.choice(cover)
            per_period.setdefault(t, set()).add((name, node))
            sp.handle_content_request(name, node)
        check_bijection(sp)
    check_entries_decrypt(sp)


def test_duplication_bound(catalog):
    sp, *_ = make_system(m=4, catalog=catalog)
    sp.advance_period(2)
    cover = comp_subtree(sp.params, 1)
    for node in cover:
        for _ in range(3):
            sp.handle_content_request("ep1", node)
    assert sp.contbl.entry_count("ep1") == len(cover) == 4


def test_revoked_paths_disjoint_from_cover():
    sp, *_ = make_system(m=4)
    for t_curr in range(1, 17):
        cover = comp_subtree(sp.params, t_curr - 1)
        for t_user in range(1, t_curr):
            assert not cover & set(path(sp.params, t_user))


def test_concurrent_lazy_creation_single_entry(catalog):
    sp, *_ = make_system(m=3, catalog=catalog)
    tags, barrier = [], threading.Barrier(16)

    def worker():
        barrier.wait()
        tags.append(sp.handle_content_request("ep1", 1))

    threads = [threading.Thread(target=worker) for _ in range(16)]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    assert len(set(tags)) == 1
    assert len(sp.contbl) == 1


def test_lazy_catalog_source():
    class Source(dict):
        pass

    sp = Provider.create(2, Source(a=b"lazy"))
    tag = sp.handle_content_request("a", 1)
    assert sp.contbl.by_tag[tag] == ("a", 1)


def test_keyset_mismatch_rejected():
    sp, *_ = make_system(m=3)
    with pytest.raises(ValidationError):
        Provider(sp.params.__class__(2), sp.keyset, sp.mac_key)
