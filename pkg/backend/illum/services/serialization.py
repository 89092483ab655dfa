"""
JSON artifacts for runs, chains, transactions and configurations.

Dataclasses are written as objects tagged with ``$type``; bytes, stars, sets and
non-string-keyed dicts get their own tags. Decoding turns every JSON list back into a
tuple, which is what every model in ``illum.models`` stores.
"""

import dataclasses
import json
import logging
from typing import Any, Dict, Type

from illum.core.config import settings
from illum.core.errors import IllumError
from illum.models import actions, configuration, illum_ast, runs, script, transaction, values
from illum.models.transaction import Blockchain
from illum.models.values import STAR

logger = logging.getLogger(__name__)


class ArtifactError(IllumError):
    code = "ArtifactError"


def _registry() -> Dict[str, Type]:
    found: Dict[str, Type] = {}
    for module in (values, illum_ast, script, transaction, configuration, actions, runs):
        for name, obj in vars(module).items():
            if isinstance(obj, type) and dataclasses.is_dataclass(obj) and obj.__module__ == module.__name__:
                found[name] = obj
    return found


REGISTRY = _registry()


def to_plain(obj: Any) -> Any:
    """Tagged JSON-ready form of ``obj``"""
    if obj is None or isinstance(obj, (bool, str)):
        return obj
    if isinstance(obj, int):
        return obj
    if obj is STAR:
        return {"$star": True}
    if isinstance(obj, bytes):
        return {"$bytes": obj.hex()}
    if isinstance(obj, Blockchain):
        return {"$type": "Blockchain", "entries": [to_plain(e) for e in obj.entries]}
    if isinstance(obj, (tuple, list)):
        return [to_plain(o) for o in obj]
    if isinstance(obj, frozenset):
        return {"$set": sorted((to_plain(o) for o in obj), key=json.dumps)}
    if isinstance(obj, dict):
        if all(isinstance(k, str) for k in obj):
            return {"$dict": {k: to_plain(v) for k, v in obj.items()}}
        return {"$pairs": [[to_plain(k), to_plain(v)] for k, v in obj.items()]}
    if dataclasses.is_dataclass(obj):
        name = type(obj).__name__
        if REGISTRY.get(name) is not type(obj):
            raise ArtifactError(f"unregistered type {name}", code="UnknownType")
        plain = {"$type": name}
        for f in dataclasses.fields(obj):
            if f.name.startswith("_"):
                continue
            plain[f.name] = to_plain(getattr(obj, f.name))
        return plain
    raise ArtifactError(f"cannot serialize {obj!r}", code="UnknownType")


def from_plain(data: Any) -> Any:
    if data is None or isinstance(data, (bool, int, str)):
        return data
    if isinstance(data, list):
        return tuple(from_plain(d) for d in data)
    if not isinstance(data, dict):
        raise ArtifactError(f"unexpected JSON value {data!r}", code="MalformedArtifact")
    if "$star" in data:
        return STAR
    if "$bytes" in data:
        return bytes.fromhex(data["$bytes"])
    if "$set" in data:
        return frozenset(from_plain(d) for d in data["$set"])
    if "$dict" in data:
        return {k: from_plain(v) for k, v in data["$dict"].items()}
    if "$pairs" in data:
        return {from_plain(k): from_plain(v) for k, v in data["$pairs"]}
    name = data.get("$type")
    if name == "Blockchain":
        return Blockchain(from_plain(data.get("entries", [])))
    cls = REGISTRY.get(name)
    if cls is None:
        raise ArtifactError(f"unknown type tag {name!r}", code="MalformedArtifact")
    kwargs = {k: from_plain(v) for k, v in data.items() if k != "$type"}
    try:
        return cls(**kwargs)
    except TypeError as e:
        raise ArtifactError(f"cannot rebuild {name}: {e}", code="MalformedArtifact")


def dumps(obj: Any, kind: str = "") -> str:
    """Canonical JSON text; equal objects give byte-identical artifacts"""
    document = {"kind": kind or type(obj).__name__, "data": to_plain(obj)}
    return json.dumps(document, indent=settings.ARTIFACT_INDENT, sort_keys=True, ensure_ascii=False) + "\n"


def loads(text: str) -> Any:
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ArtifactError(f"invalid JSON: {e}", code="MalformedArtifact")
    if not isinstance(document, dict) or "data" not in document:
        raise ArtifactError("artifact has no data section", code="MalformedArtifact")
    return from_plain(document["data"])


def save(obj: Any, path, kind: str = "") -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(dumps(obj, kind))
    logger.info(f"✅ Wrote {kind or type(obj).__name__} to {path}")


def load(path) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return loads(f.read())
    except OSError as e:
        logger.error(f"❌ Cannot read {path}: {e}")
        raise ArtifactError(f"cannot read {path}: {e.strerror}", code="MissingArtifact")


def save_run(run: Any, program, path, maps=None) -> None:
    """A run artifact also carries the clause table, and the coherence maps when known"""
    document = {"kind": type(run).__name__, "data": to_plain(run), "program": to_plain(program)}
    if maps is not None:
        document["maps"] = to_plain(maps)
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps(document, indent=settings.ARTIFACT_INDENT, sort_keys=True, ensure_ascii=False) + "\n")
    logger.info(f"✅ Wrote {document['kind']} to {path}")


def load_run(path):
    """(run, program, maps) from a run artifact; maps is None when it was not recorded"""
    try:
        with open(path, "r", encoding="utf-8") as f:
            document = json.loads(f.read())
    except OSError as e:
        raise ArtifactError(f"cannot read {path}: {e.strerror}", code="MissingArtifact")
    except json.JSONDecodeError as e:
        raise ArtifactError(f"invalid JSON in {path}: {e}", code="MalformedArtifact")
    if not isinstance(document, dict) or "data" not in document or "program" not in document:
        raise ArtifactError(f"{path} is not a run artifact", code="MalformedArtifact")
    maps = from_plain(document["maps"]) if "maps" in document else None
    return from_plain(document["data"]), from_plain(document["program"]), maps
