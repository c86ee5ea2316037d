"""
Stage results stored by the hash of everything they depend on

A stage key is canonical JSON text. Its sha256 picks a bucket
<base>/a/b/c/<rest>/ and the entry lives in the first numbered slot
(000, 001, ...) whose 'key' file holds exactly that text, so two keys with
the same digest never share a slot. There is no index; removing any slot
directory by hand only forgets that result.
"""

import shutil
from pathlib import Path
from typing import Any, Callable, Dict, Iterator, Optional, Tuple, Union

from .artifacts import ArtifactField, ArtifactType
from .utils import canonical_json, hash_text

KEY_FILE = "key"
RESULT_JSON = ArtifactField("result.json", ArtifactType.JSON)


class StageCacheMiss(Exception):
    pass


def stage_key(stage: str, **inputs: Any) -> str:
    """
    Canonical text naming everything a stage result depends on

    >>> stage_key("dayahead", case="abc", eps_points=8)
    '{"case":"abc","eps_points":8,"stage":"dayahead"}'
    """
    return canonical_json(dict(inputs, stage=stage))


class StageCache:
    def __init__(self, loc: Union[str, Path]):
        self.base = Path(loc)
        self.base.mkdir(parents=True, exist_ok=True)

    def bucket(self, key: str) -> Path:
        """
        >>> str(StageCache('/tmp').bucket("something"))
        '/tmp/3/f/c/9b689459d738f8c88a3a48aa9e33542016b7a4052e001aaa536fca74813cb'
        """
        digest = hash_text(key)
        return self.base / digest[0] / digest[1] / digest[2] / digest[3:]

    def _slots(self, key: str) -> Iterator[Path]:
        b = self.bucket(key)
        if b.is_dir():
            yield from sorted(p for p in b.iterdir() if p.is_dir())

    @staticmethod
    def _holds(slot: Path, key: str) -> bool:
        kf = slot / KEY_FILE
        return kf.is_file() and kf.read_text() == key

    def locate(self, key: str) -> Path:
        """The slot directory for key; StageCacheMiss when there is none"""
        for slot in self._slots(key):
            if self._holds(slot, key):
                return slot
        raise StageCacheMiss(f"no cached entry under {self.bucket(key)}")

    def claim(self, key: str) -> Path:
        """The slot for key, creating the first free numbered one if needed"""
        try:
            return self.locate(key)
        except StageCacheMiss:
            pass
        b = self.bucket(key)
        n = 0
        while (b / f"{n:03d}").exists():
            n += 1
        slot = b / f"{n:03d}"
        slot.mkdir(parents=True)
        (slot / KEY_FILE).write_text(key)
        return slot

    def exists(self, key: str) -> bool:
        try:
            self.locate(key)
        except StageCacheMiss:
            return False
        return True

    def evict(self, key: str) -> bool:
        """Forgets the result for key; False if nothing was stored"""
        try:
            slot = self.locate(key)
        except StageCacheMiss:
            return False
        shutil.rmtree(slot)
        return True

    def load(self, key: str) -> Dict[str, Any]:
        data: Optional[Dict[str, Any]] = RESULT_JSON.get(self.locate(key))
        if data is None:
            # a slot claimed by a run that died before storing
            raise StageCacheMiss(f"no result stored for '{key}'")
        return data

    def store(self, key: str, result: Dict[str, Any]) -> Dict[str, Any]:
        """Writes result and returns it as read back from disk"""
        slot = self.claim(key)
        RESULT_JSON.put(slot, result)
        stored: Optional[Dict[str, Any]] = RESULT_JSON.get(slot)
        assert stored is not None
        return stored

    def fetch(self, key: str, compute: Callable[[], Dict[str, Any]]) -> Tuple[Dict[str, Any], bool]:
        """
        The stored result for key and whether it came from the cache. A fresh
        result is returned in its stored form, so cached and fresh runs agree.
        """
        try:
            return self.load(key), True
        except StageCacheMiss:
            pass
        return self.store(key, compute()), False
