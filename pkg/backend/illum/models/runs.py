"""
Symbolic and computational runs, and the maps relating them
"""

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple, Union

from illum.models.actions import SymbolicAction
from illum.models.configuration import Configuration, Incomplete
from illum.models.transaction import OutRef, Transaction
from illum.models.values import Participant


@dataclass(frozen=True)
class SymbolicRun:
    """Initial configuration, actions, and the configuration after each action"""
    initial: Configuration
    actions: Tuple[SymbolicAction, ...] = ()
    configurations: Tuple[Configuration, ...] = ()

    @property
    def final(self) -> Configuration:
        return self.configurations[-1] if self.configurations else self.initial

    def __len__(self) -> int:
        return len(self.actions)

    def extended(self, action: SymbolicAction, after: Configuration) -> "SymbolicRun":
        return SymbolicRun(self.initial, self.actions + (action,), self.configurations + (after,))


# Broadcast messages

@dataclass(frozen=True)
class TxMessage:
    tx: Transaction


@dataclass(frozen=True)
class AdvMessage:
    """An incomplete advertisement whose names are replaced by output references"""
    theta: Incomplete


@dataclass(frozen=True)
class WitnessQuadruple:
    tx_id: bytes
    input_index: int
    signature: bytes
    slot: int


@dataclass(frozen=True)
class KeyAnnouncement:
    participant: Participant
    key: bytes


@dataclass(frozen=True)
class OpaqueMessage:
    payload: bytes


Message = Union[TxMessage, AdvMessage, WitnessQuadruple, KeyAnnouncement, OpaqueMessage]


# Computational labels

@dataclass(frozen=True)
class TxLabel:
    tx: Transaction


@dataclass(frozen=True)
class DelayLabel:
    delta: int


@dataclass(frozen=True)
class BroadcastLabel:
    sender: Optional[Participant]
    message: Message


Label = Union[TxLabel, DelayLabel, BroadcastLabel]


@dataclass(frozen=True)
class ComputationalRun:
    labels: Tuple[Label, ...] = ()
    seed: Optional[int] = None

    def __len__(self) -> int:
        return len(self.labels)

    def extended(self, *labels: Label) -> "ComputationalRun":
        return ComputationalRun(self.labels + tuple(labels), self.seed)


@dataclass
class CoherenceMaps:
    """txout: names to outputs; keys: participants to public keys; prev_tx: advertisements to transaction ids"""
    txout: Dict[str, OutRef] = field(default_factory=dict)
    keys: Dict[Participant, bytes] = field(default_factory=dict)
    prev_tx: Dict[object, bytes] = field(default_factory=dict)

    def names_by_output(self) -> Dict[OutRef, str]:
        return {ref: name for name, ref in self.txout.items()}

    def bind(self, name: str, ref: OutRef):
        if ref in self.names_by_output():
            raise ValueError(f"output {ref} is already the image of {self.names_by_output()[ref]}")
        self.txout[name] = ref
