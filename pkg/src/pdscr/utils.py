import json
from hashlib import sha256
from pathlib import Path
from typing import Union, Any

import numpy as np

# slots are one hour long, so MW and MWh per slot are interchangeable
KWH_PER_MWH = 1000.0


def normalize_path(p: Union[str, Path]) -> Path:
    if isinstance(p, Path):
        return p.expanduser().absolute()
    elif isinstance(p, str):
        return Path(p).expanduser().absolute()
    else:
        raise TypeError("Expected 'str' or 'pathlib.Path', received {}".format(type(p)))


def per_kwh_to_per_mwh(price: float) -> float:
    """
    Converts a tariff in $/kWh to $/MWh

    >>> per_kwh_to_per_mwh(0.15)
    150.0
    """
    return float(price) * KWH_PER_MWH


def jsonable(obj: Any) -> Any:
    """
    Recursively converts numpy values so json.dumps accepts them

    >>> jsonable({"a": np.arange(3), "b": np.float64(1.5)})
    {'a': [0, 1, 2], 'b': 1.5}
    """
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def canonical_json(obj: Any) -> str:
    """
    Stable JSON text, used for hashing and for files that must be byte-identical
    between runs

    >>> canonical_json({"b": 1, "a": [1.0, 2]})
    '{"a":[1.0,2],"b":1}'
    """
    return json.dumps(jsonable(obj), sort_keys=True, separators=(",", ":"))


def hash_text(text: str) -> str:
    """
    >>> hash_text("something")[:12]
    '3fc9b689459d'
    """
    return sha256(text.encode()).hexdigest()


def hash_file(path: Union[str, Path]) -> str:
    return sha256(Path(path).read_bytes()).hexdigest()
