import shutil
import tempfile
from typing import Any, Dict, Iterator, List

import pytest

from pdscr.stage_cache import KEY_FILE, StageCache, StageCacheMiss, stage_key


@pytest.fixture
def cache() -> Iterator[StageCache]:
    d: str = tempfile.mkdtemp()
    yield StageCache(d)
    shutil.rmtree(d)


def test_slots_chain_on_foreign_keys(cache: StageCache) -> None:
    k = stage_key("dayahead", case="abc", eps_points=8)
    assert not cache.exists(k)
    first = cache.claim(k)
    assert first.name == "000"
    assert first.parent == cache.bucket(k)

    # another run left a slot for the same digest under a different key
    first.rename(first.parent / "001")
    (first.parent / "000").mkdir()
    (first.parent / "000" / KEY_FILE).write_text("some other key")
    assert cache.locate(k).name == "001"

    # a damaged key file no longer matches, so the next free slot is used
    with open(cache.locate(k) / KEY_FILE, "a") as f:
        f.write("x")
    assert not cache.exists(k)
    assert cache.claim(k).name == "002"


def test_claim_is_idempotent(cache: StageCache) -> None:
    k = stage_key("scenarios", case="abc", seed=0, count=10)
    assert cache.claim(k) == cache.claim(k)


def test_inputs_pick_the_slot(cache: StageCache) -> None:
    a = cache.claim(stage_key("scenarios", case="abc", seed=0))
    b = cache.claim(stage_key("scenarios", case="abc", seed=1))
    assert a != b
    # argument order does not change the key
    assert stage_key("x", a=1, b=2) == stage_key("x", b=2, a=1)


def test_fetch_computes_once(cache: StageCache) -> None:
    calls: List[int] = []

    def compute() -> Dict[str, Any]:
        calls.append(1)
        return {"j1": 1.0, "ids": (3, 4)}

    k = stage_key("intraday", case="abc", criterion="equal")
    fresh, cached = cache.fetch(k, compute)
    assert not cached
    # handed back as stored, so the tuple is already a list
    assert fresh == {"j1": 1.0, "ids": [3, 4]}
    again, cached = cache.fetch(k, compute)
    assert cached and again == fresh
    assert len(calls) == 1


def test_claimed_but_empty_slot_is_a_miss(cache: StageCache) -> None:
    k = stage_key("dayahead", case="abc")
    cache.claim(k)
    with pytest.raises(StageCacheMiss):
        cache.load(k)
    data, cached = cache.fetch(k, lambda: {"ok": True})
    assert data == {"ok": True} and not cached


def test_evict(cache: StageCache) -> None:
    k = "something"
    assert not cache.evict(k)
    cache.store(k, {"a": 1})
    slot = cache.locate(k)
    assert slot.is_dir()
    assert cache.evict(k)
    assert not cache.exists(k)
    assert not slot.exists()
    assert not cache.evict(k)
    assert cache.base.exists()
