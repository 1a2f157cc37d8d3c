"""Versioned registry of inequality constants with provenance.

Each entry records the asserted value, how it was obtained (the calibration
oracle) and, where relevant, the empirical sup seen on the calibration corpus.
"""
import json
from functools import lru_cache
from pathlib import Path

REGISTRY_PATH = Path(__file__).parent / "data" / "registry.json"


@lru_cache(maxsize=4)
def _load_cached(path):
    with open(path) as fh:
        return json.load(fh)


def load(path=None) -> dict:
    return _load_cached(str(path or REGISTRY_PATH))


def save(registry: dict, path=None):
    path = Path(path or REGISTRY_PATH)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(registry, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _load_cached.cache_clear()


def entry(name, registry=None) -> dict:
    reg = registry if registry is not None else load()
    try:
        return reg["constants"][name]
    except KeyError:
        raise KeyError(f"constant {name!r} missing from registry; run the calibration") from None


def value(name, registry=None) -> float:
    return float(entry(name, registry)["value"])


def c0_key(d, alpha, beta):
    return f"c0[d={d},alpha={alpha:.6g},beta={beta:.6g}]"
