"""
Value domain shared by ILLUM expressions and UTXO scripts
"""

from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, Mapping, Tuple, Union

from illum.core.config import settings
from illum.core.errors import MapKeyAbsent, Overflow, TypeMismatch


@dataclass(frozen=True, order=True)
class Participant:
    """Opaque participant identity"""
    name: str

    def __str__(self) -> str:
        return self.name if self.name == "Null" else f"@{self.name}"


NULL = Participant("Null")


class _Star:
    """The placeholder for an unfilled external parameter"""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "?"

    def __reduce__(self):
        return (_Star, ())


STAR = _Star()

TYPE_INT = "int"
TYPE_PARTICIPANT = "participant"
TYPE_MAP = "map"
TYPE_BYTES = "bytes"
VALUE_TYPES = (TYPE_INT, TYPE_PARTICIPANT, TYPE_MAP, TYPE_BYTES)


def check_int(value: int) -> int:
    """Reject integers outside the configured signed range"""
    if value < settings.int_min or value > settings.int_max:
        raise Overflow(f"integer {value} outside {settings.INT_BITS}-bit range", value=value)
    return value


def sort_key(value) -> Tuple:
    if isinstance(value, bool):
        return (0, int(value))
    if isinstance(value, int):
        return (0, value)
    if isinstance(value, Participant):
        return (1, value.name)
    if isinstance(value, bytes):
        return (2, value)
    raise TypeMismatch(f"value {value!r} cannot be a map key", value=repr(value))


@dataclass(frozen=True)
class MapValue:
    """Finite key/value association with canonically ordered entries"""
    entries: Tuple[Tuple[object, object], ...] = ()

    @classmethod
    def of(cls, pairs: Union[Mapping, Iterable[Tuple[object, object]]] = ()) -> "MapValue":
        items = pairs.items() if isinstance(pairs, Mapping) else pairs
        merged: Dict[Tuple, Tuple[object, object]] = {}
        for key, val in items:
            merged[sort_key(key)] = (key, val)
        return cls(tuple(merged[k] for k in sorted(merged)))

    def _find(self, key):
        wanted = sort_key(key)
        for k, v in self.entries:
            if sort_key(k) == wanted:
                return True, v
        return False, None

    def contains(self, key) -> bool:
        return self._find(key)[0]

    def lookup(self, key):
        found, value = self._find(key)
        if not found:
            raise MapKeyAbsent(f"key {key} not in map", key=str(key))
        return value

    def get(self, key, default):
        found, value = self._find(key)
        return value if found else default

    def update(self, key, value) -> "MapValue":
        return MapValue.of(list(self.entries) + [(key, value)])

    def items(self) -> Iterator[Tuple[object, object]]:
        return iter(self.entries)

    def map_values(self, fn) -> "MapValue":
        return MapValue.of((fn(k), fn(v)) for k, v in self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __str__(self) -> str:
        inner = ", ".join(f"{format_value(k)} -> {format_value(v)}" for k, v in self.entries)
        return "{" + inner + "}"


EMPTY_MAP = MapValue()

Value = Union[int, Participant, MapValue, bytes, _Star]


def normalize_value(value):
    """Booleans become the integers 1/0"""
    if isinstance(value, bool):
        return int(value)
    return value


def value_type(value) -> str:
    value = normalize_value(value)
    if isinstance(value, int):
        return TYPE_INT
    if isinstance(value, Participant):
        return TYPE_PARTICIPANT
    if isinstance(value, MapValue):
        return TYPE_MAP
    if isinstance(value, bytes):
        return TYPE_BYTES
    if value is STAR:
        return "star"
    raise TypeMismatch(f"not a value: {value!r}", value=repr(value))


def format_value(value) -> str:
    if value is STAR:
        return "?"
    if isinstance(value, bytes):
        return "0x" + value.hex()
    return str(normalize_value(value))


@dataclass(frozen=True)
class TokenBag:
    """Multiset of token amounts, zero entries dropped"""
    items: Tuple[Tuple[str, int], ...] = field(default_factory=tuple)

    @classmethod
    def of(cls, amounts: Union[Mapping[str, int], Iterable[Tuple[str, int]]] = ()) -> "TokenBag":
        pairs = amounts.items() if isinstance(amounts, Mapping) else amounts
        merged: Dict[str, int] = {}
        for token, amount in pairs:
            merged[token] = check_int(merged.get(token, 0) + int(amount))
        return cls(tuple(sorted((t, a) for t, a in merged.items() if a != 0)))

    @classmethod
    def single(cls, amount: int, token: str = None) -> "TokenBag":
        return cls.of([(token or settings.DEFAULT_TOKEN, amount)])

    def amount(self, token: str) -> int:
        for t, a in self.items:
            if t == token:
                return a
        return 0

    @property
    def tokens(self) -> Tuple[str, ...]:
        return tuple(t for t, _ in self.items)

    def __add__(self, other: "TokenBag") -> "TokenBag":
        return TokenBag.of(list(self.items) + list(other.items))

    def __sub__(self, other: "TokenBag") -> "TokenBag":
        return TokenBag.of(list(self.items) + [(t, -a) for t, a in other.items])

    def covers(self, other: "TokenBag") -> bool:
        """self >= other on every token"""
        return all(self.amount(t) >= a for t, a in other.items)

    def is_nonnegative(self) -> bool:
        return all(a >= 0 for _, a in self.items)

    def is_zero(self) -> bool:
        return not self.items

    def to_dict(self) -> Dict[str, int]:
        return dict(self.items)

    def __str__(self) -> str:
        if not self.items:
            return "0"
        return " + ".join(f"{a}:{t}" for t, a in self.items)


ZERO = TokenBag()


def bag_sum(bags: Iterable[TokenBag]) -> TokenBag:
    total = ZERO
    for bag in bags:
        total = total + bag
    return total
