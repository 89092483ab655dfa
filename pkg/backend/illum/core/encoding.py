"""
Canonical binary encoding and hashing for ILLUM
"""

import dataclasses
import hashlib
import struct
from typing import Any

from illum.core.config import settings
from illum.core.errors import IllumError
from illum.models.values import MapValue, Participant, STAR, TokenBag

TAG_NONE = 0x00
TAG_INT = 0x01
TAG_BYTES = 0x02
TAG_STR = 0x03
TAG_PARTICIPANT = 0x04
TAG_MAP = 0x05
TAG_LIST = 0x06
TAG_STAR = 0x07
TAG_BAG = 0x08
TAG_NODE = 0x09


class EncodingError(IllumError):
    code = "EncodingError"


def _length(n: int) -> bytes:
    return struct.pack(">I", n)


def _encode_into(obj: Any, out: bytearray) -> None:
    if obj is None:
        out.append(TAG_NONE)
    elif isinstance(obj, bool) or isinstance(obj, int):
        value = int(obj)
        if value < settings.int_min or value > settings.int_max:
            raise EncodingError(f"integer {value} does not fit the canonical encoding")
        out.append(TAG_INT)
        out += struct.pack(">q", value)
    elif isinstance(obj, bytes):
        out.append(TAG_BYTES)
        out += _length(len(obj)) + obj
    elif isinstance(obj, str):
        raw = obj.encode("utf-8")
        out.append(TAG_STR)
        out += _length(len(raw)) + raw
    elif isinstance(obj, Participant):
        raw = obj.name.encode("utf-8")
        out.append(TAG_PARTICIPANT)
        out += _length(len(raw)) + raw
    elif isinstance(obj, MapValue):
        out.append(TAG_MAP)
        out += _length(len(obj.entries))
        for key, val in obj.entries:
            _encode_into(key, out)
            _encode_into(val, out)
    elif obj is STAR:
        out.append(TAG_STAR)
    elif isinstance(obj, TokenBag):
        out.append(TAG_BAG)
        out += _length(len(obj.items))
        for token, amount in obj.items:
            _encode_into(token, out)
            _encode_into(amount, out)
    elif isinstance(obj, (list, tuple)):
        out.append(TAG_LIST)
        out += _length(len(obj))
        for item in obj:
            _encode_into(item, out)
    elif dataclasses.is_dataclass(obj):
        fields = dataclasses.fields(obj)
        out.append(TAG_NODE)
        _encode_into(type(obj).__name__, out)
        out += _length(len(fields))
        for f in fields:
            _encode_into(getattr(obj, f.name), out)
    else:
        raise EncodingError(f"cannot encode {type(obj).__name__}")


def encode(obj: Any) -> bytes:
    """Deterministic, length-prefixed encoding of values, scripts and transactions"""
    out = bytearray()
    _encode_into(obj, out)
    return bytes(out)


def encode_versioned(obj: Any) -> bytes:
    return settings.magic + encode(obj)


def digest(obj: Any) -> bytes:
    return hashlib.sha256(encode(obj)).digest()


def hash_bytes(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def name_hash(name: str) -> int:
    """64-bit signed hash of a qualified clause name"""
    raw = hashlib.sha256(b"clause:" + name.encode("utf-8")).digest()[:8]
    return struct.unpack(">q", raw)[0]
