"""
Transactions, outputs and the blockchain for the UTXO model
"""

from dataclasses import dataclass, replace
from functools import cached_property
from typing import Dict, Iterable, Iterator, List, Optional, Tuple

from illum.core.encoding import encode_versioned, hash_bytes
from illum.models.script import Script
from illum.models.values import TokenBag


@dataclass(frozen=True, order=True)
class OutRef:
    """Reference to the ``index``-th (1-based) output of transaction ``tx_id``"""
    tx_id: bytes
    index: int

    def __str__(self) -> str:
        return f"{self.tx_id.hex()[:12]}:{self.index}"


@dataclass(frozen=True)
class Output:
    value: TokenBag
    script: Script
    args: Tuple[object, ...] = ()


@dataclass(frozen=True)
class Transaction:
    inputs: Tuple[OutRef, ...] = ()
    witnesses: Optional[Tuple[Tuple[object, ...], ...]] = ()
    outputs: Tuple[Output, ...] = ()
    abs_lock: int = 0
    rel_locks: Tuple[int, ...] = ()

    @property
    def is_coinbase(self) -> bool:
        return not self.inputs and not self.rel_locks and not self.witnesses

    def stripped(self) -> "Transaction":
        """The transaction with its witness field replaced by bottom"""
        return replace(self, witnesses=None)

    def signing_bytes(self) -> bytes:
        """Versioned encoding of the stripped transaction; signatures and ids cover these bytes"""
        return encode_versioned(self.stripped())

    @cached_property
    def tx_id(self) -> bytes:
        return hash_bytes(self.signing_bytes())

    def with_witnesses(self, witnesses) -> "Transaction":
        return replace(self, witnesses=tuple(tuple(w) for w in witnesses))

    def with_witness_slot(self, input_index: int, slot: int, value) -> "Transaction":
        """Fill one witness slot (both 1-based), padding with empty bytes"""
        current = [list(w) for w in (self.witnesses or tuple(() for _ in self.inputs))]
        while len(current) < len(self.inputs):
            current.append([])
        row = current[input_index - 1]
        while len(row) < slot:
            row.append(b"")
        row[slot - 1] = value
        return self.with_witnesses(current)

    def output(self, index: int) -> Optional[Output]:
        if 1 <= index <= len(self.outputs):
            return self.outputs[index - 1]
        return None


@dataclass(frozen=True)
class ChainEntry:
    tx_id: bytes
    tx: Transaction
    time: int


class _ChainLog:
    """Entries and lookup tables shared by every chain that is a prefix of it"""

    def __init__(self):
        self.entries: List[ChainEntry] = []
        self.positions: Dict[bytes, int] = {}
        self.spends: Dict[OutRef, Tuple[bytes, int]] = {}

    def push(self, entry: ChainEntry):
        position = len(self.entries)
        self.entries.append(entry)
        self.positions[entry.tx_id] = position
        for ref in entry.tx.inputs:
            self.spends[ref] = (entry.tx_id, position)

    def prefix(self, length: int) -> "_ChainLog":
        log = _ChainLog()
        for entry in self.entries[:length]:
            log.push(entry)
        return log


class Blockchain:
    """Append-only sequence of (transaction, time) pairs.

    A chain is a length over a shared log. Extending the longest chain on a log appends to
    it in place; extending an older prefix copies that prefix first, so every chain value
    stays immutable.
    """

    __slots__ = ("_log", "_length")

    def __init__(self, entries: Iterable[ChainEntry] = ()):
        self._log = _ChainLog()
        for entry in entries:
            self._log.push(entry)
        self._length = len(self._log.entries)

    @classmethod
    def _view(cls, log: _ChainLog, length: int) -> "Blockchain":
        chain = cls.__new__(cls)
        chain._log, chain._length = log, length
        return chain

    def extended(self, entry: ChainEntry) -> "Blockchain":
        log = self._log if len(self._log.entries) == self._length else self._log.prefix(self._length)
        log.push(entry)
        return Blockchain._view(log, self._length + 1)

    @property
    def entries(self) -> Tuple[ChainEntry, ...]:
        return tuple(self._log.entries[:self._length])

    @property
    def time(self) -> int:
        return self._log.entries[self._length - 1].time if self._length else 0

    def __len__(self) -> int:
        return self._length

    def __iter__(self) -> Iterator[ChainEntry]:
        return iter(self._log.entries[:self._length])

    def __eq__(self, other) -> bool:
        return isinstance(other, Blockchain) and self.entries == other.entries

    def __hash__(self) -> int:
        return hash((self._length, self._log.entries[self._length - 1].tx_id if self._length else b""))

    def __repr__(self) -> str:
        return f"Blockchain({self._length} entries)"

    def entry(self, tx_id: bytes) -> Optional[ChainEntry]:
        position = self._log.positions.get(tx_id)
        return None if position is None or position >= self._length else self._log.entries[position]

    def outputs(self, tx_id: bytes) -> Tuple[Output, ...]:
        entry = self.entry(tx_id)
        return entry.tx.outputs if entry else ()

    def resolve(self, ref: OutRef) -> Optional[Output]:
        entry = self.entry(ref.tx_id)
        return entry.tx.output(ref.index) if entry else None

    def spent_by(self, ref: OutRef) -> Optional[bytes]:
        spend = self._log.spends.get(ref)
        return spend[0] if spend is not None and spend[1] < self._length else None

    def is_unspent(self, ref: OutRef) -> bool:
        return self.resolve(ref) is not None and self.spent_by(ref) is None
