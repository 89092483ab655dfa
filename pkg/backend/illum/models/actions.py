"""
Labels of the ILLUM transition system
"""

from dataclasses import dataclass
from typing import Union

from illum.models.configuration import Advertisement, Incomplete
from illum.models.values import Participant, TokenBag


@dataclass(frozen=True)
class Msg:
    theta: Incomplete
    label = "msg"


@dataclass(frozen=True)
class Adv:
    adv: Advertisement
    label = "adv"


@dataclass(frozen=True)
class AuthIn:
    participant: Participant
    deposit: str
    adv: Advertisement
    label = "auth-in"


@dataclass(frozen=True)
class AuthAct:
    participant: Participant
    adv: Advertisement
    label = "auth-act"


@dataclass(frozen=True)
class Init:
    adv: Advertisement
    label = "init"


@dataclass(frozen=True)
class Call:
    adv: Advertisement
    label = "call"


@dataclass(frozen=True)
class Send:
    adv: Advertisement
    label = "send"


@dataclass(frozen=True)
class Destroy:
    adv: Advertisement
    label = "destroy"


@dataclass(frozen=True)
class Delay:
    delta: int
    label = "delay"


@dataclass(frozen=True)
class AuthJoinAct:
    participant: Participant
    first: str
    second: str
    index: int
    label = "auth-join"


@dataclass(frozen=True)
class Join:
    first: str
    second: str
    label = "join"


@dataclass(frozen=True)
class AuthDivideAct:
    participant: Participant
    deposit: str
    left: TokenBag
    right: TokenBag
    label = "auth-divide"


@dataclass(frozen=True)
class Divide:
    deposit: str
    left: TokenBag
    right: TokenBag
    label = "divide"


@dataclass(frozen=True)
class AuthDonateAct:
    participant: Participant
    deposit: str
    to: Participant
    label = "auth-donate"


@dataclass(frozen=True)
class Donate:
    deposit: str
    to: Participant
    label = "donate"


SymbolicAction = Union[
    Msg, Adv, AuthIn, AuthAct, Init, Call, Send, Destroy, Delay,
    AuthJoinAct, Join, AuthDivideAct, Divide, AuthDonateAct, Donate,
]

CONSUMING_ACTIONS = (Init, Call, Send, Destroy)
DEPOSIT_ACTIONS = (Join, Divide, Donate)
DEPOSIT_AUTH_ACTIONS = (AuthJoinAct, AuthDivideAct, AuthDonateAct)
