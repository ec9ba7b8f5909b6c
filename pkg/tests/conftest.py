import pytest

from chronocache import crypto_core
from chronocache.cache_server import CacheServer
from chronocache.provider import Provider
from chronocache.time_tree import TreeParams
from chronocache.transport import LocalCacheLink, LocalProviderLink


@pytest.fixture
def catalog():
    return {"ep1": b"Episode 1 " * 20, "ep2": b"Episode 2 " * 30, "tiny": b"x"}


def make_system(m=3, capacity=8, catalog=None, seed=7, nonce_bits=128):
    sp = Provider.create(m, entropy=crypto_core.seeded_entropy(seed), nonce_bits=nonce_bits)
    if catalog:
        sp.add_contents(catalog)
    sp_link = LocalProviderLink(sp)
    cs = CacheServer(capacity, sp_link)
    return sp, sp_link, cs, LocalCacheLink(cs)


@pytest.fixture
def system(catalog):
    return make_system(catalog=catalog)


@pytest.fixture
def params3():
    return TreeParams(3)


ACCEPTANCE_RESULTS = []


def record(criterion, passed, detail):
    ACCEPTANCE_RESULTS.append((criterion, passed, detail))
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(
            f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}")
