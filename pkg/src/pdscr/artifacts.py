"""
Typed files inside a run or cache directory, and the single writer every
run directory goes through
"""

import os
import json
from enum import auto, Enum
from pathlib import Path
from typing import Any, Dict, Optional, Union

from .utils import hash_text, jsonable


class ArtifactType(Enum):
    JSON = auto()
    CSV = auto()
    TEXT = auto()
    SVG = auto()


class ArtifactField:
    """
    One file an artifact is stored in; filename may contain subdirectories
    and str.format placeholders, e.g. 'intraday/{criterion}/scenario_{n:03d}.json'
    """

    def __init__(self, filename: str, atype: ArtifactType):
        self.filename = filename
        self.atype = atype

    def relpath(self, **names: Any) -> str:
        return self.filename.format(**names)

    def encode(self, data: Any) -> str:
        if self.atype == ArtifactType.JSON:
            return json.dumps(jsonable(data), indent=2, sort_keys=True) + "\n"
        elif self.atype in (ArtifactType.CSV, ArtifactType.TEXT, ArtifactType.SVG):
            if not isinstance(data, str):
                raise TypeError(f"{self.filename} expects text, got {type(data).__name__}")
            return data
        else:
            raise ValueError(f"Unsupported artifact type {self.atype}")

    def get(self, from_dir: Union[str, Path], **names: Any) -> Optional[Any]:
        target = os.path.join(str(from_dir), self.relpath(**names))
        if not os.path.exists(target):
            return None
        with open(target, "r") as f:
            contents = f.read()
        if self.atype == ArtifactType.JSON:
            return json.loads(contents)
        return contents

    def put(self, from_dir: Union[str, Path], data: Any, **names: Any) -> str:
        """Writes the artifact, returns the sha256 of the bytes written"""
        target = os.path.join(str(from_dir), self.relpath(**names))
        os.makedirs(os.path.dirname(target), exist_ok=True)
        text = self.encode(data)
        with open(target, "w", newline="\n") as f:
            f.write(text)
        return hash_text(text)


class RunWriter:
    """
    The only thing that writes into a run directory; remembers the hash of
    every artifact for the manifest
    """

    def __init__(self, run_dir: Union[str, Path]):
        self.run_dir = Path(run_dir)
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self.written: Dict[str, str] = {}

    def write(self, field: ArtifactField, data: Any, **names: Any) -> str:
        rel = field.relpath(**names)
        self.written[rel] = field.put(self.run_dir, data, **names)
        return rel

    def read(self, field: ArtifactField, **names: Any) -> Optional[Any]:
        return field.get(self.run_dir, **names)

    def path(self, rel: str) -> Path:
        return self.run_dir / rel
