"""
Symbolic configurations for ILLUM: deposits, contracts, advertisements, authorizations
"""

from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Tuple, Union

from illum.models.illum_ast import Branch, Process
from illum.models.values import Participant, TokenBag, ZERO, format_value


@dataclass(frozen=True)
class Deposit:
    name: str
    owner: Participant
    value: TokenBag

    def __str__(self) -> str:
        return f"<{self.owner}, {self.value}>@{self.name}"


@dataclass(frozen=True)
class ActiveContract:
    """An active contract; ``clause`` and the argument tuples record the instantiated clause"""
    name: str
    time: int
    process: Process
    balance: TokenBag
    clause: str = ""
    internal: Tuple[object, ...] = ()
    external: Tuple[object, ...] = ()

    def __str__(self) -> str:
        args = ", ".join(format_value(v) for v in self.internal)
        ext = ", ".join(format_value(v) for v in self.external)
        return f"<{self.clause}({args}; {ext}), {self.balance}>@{self.name}|t={self.time}"


# Advertisements. ``w`` is None for the star value.

@dataclass(frozen=True)
class InitAdv:
    clause: str
    internal: Tuple[object, ...]
    external: Tuple[object, ...]
    deposits: Tuple[str, ...]
    w: Optional[TokenBag] = None
    nonce: int = 0

    kind = "init"


@dataclass(frozen=True)
class ContinueAdv:
    branch: Branch
    deposits: Tuple[str, ...]
    w: Optional[TokenBag]
    contract: str
    index: int
    nonce: int = 0

    kind = "continue"


@dataclass(frozen=True)
class DestroyAdv:
    deposits: Tuple[str, ...]
    w: Optional[TokenBag] = None
    nonce: int = 0

    kind = "destroy"


Advertisement = Union[InitAdv, ContinueAdv, DestroyAdv]


@dataclass(frozen=True)
class Incomplete:
    """An incomplete advertisement: stars allowed in externals, empty deposit lists allowed"""
    adv: Advertisement


def w_amount(w: Optional[TokenBag]) -> TokenBag:
    return ZERO if w is None else w


# Authorization payloads

@dataclass(frozen=True)
class AuthDeposit:
    deposit: str
    adv: Advertisement


@dataclass(frozen=True)
class AuthAction:
    contract: str
    adv: Advertisement


@dataclass(frozen=True)
class AuthJoin:
    first: str
    second: str
    index: int
    total: TokenBag


@dataclass(frozen=True)
class AuthDivide:
    deposit: str
    left: TokenBag
    right: TokenBag


@dataclass(frozen=True)
class AuthDonate:
    deposit: str
    to: Participant


AuthPayload = Union[AuthDeposit, AuthAction, AuthJoin, AuthDivide, AuthDonate]


@dataclass(frozen=True)
class Authorization:
    participant: Participant
    payload: AuthPayload


@dataclass(frozen=True)
class Configuration:
    """Immutable symbolic state; every rewrite goes through ``with_`` helpers"""
    deposits: Tuple[Deposit, ...] = ()
    contracts: Tuple[ActiveContract, ...] = ()
    advertisements: Tuple[Union[Advertisement, Incomplete], ...] = ()
    authorizations: Tuple[Authorization, ...] = ()
    destroyed: TokenBag = ZERO
    time: int = 0
    burned: TokenBag = ZERO
    counter: int = 0
    seen: frozenset = field(default_factory=frozenset)

    @classmethod
    def initial(cls, deposits: Iterable[Deposit], time: int = 0) -> "Configuration":
        deposits = tuple(deposits)
        return cls(deposits=deposits, time=time, seen=frozenset(d.name for d in deposits))

    def deposit(self, name: str) -> Optional[Deposit]:
        for d in self.deposits:
            if d.name == name:
                return d
        return None

    def contract(self, name: str) -> Optional[ActiveContract]:
        for c in self.contracts:
            if c.name == name:
                return c
        return None

    def has_advertisement(self, adv) -> bool:
        return adv in self.advertisements

    def has_authorization(self, auth: Authorization) -> bool:
        return auth in self.authorizations

    def fresh_names(self, count: int) -> Tuple["Configuration", Tuple[str, ...]]:
        names = []
        counter = self.counter
        seen = set(self.seen)
        while len(names) < count:
            counter += 1
            candidate = f"x{counter}"
            if candidate not in seen:
                names.append(candidate)
                seen.add(candidate)
        return replace(self, counter=counter, seen=frozenset(seen)), tuple(names)

    def without_deposits(self, names: Iterable[str]) -> "Configuration":
        names = set(names)
        return replace(self, deposits=tuple(d for d in self.deposits if d.name not in names))

    def without_contract(self, name: str) -> "Configuration":
        return replace(self, contracts=tuple(c for c in self.contracts if c.name != name))

    def without_advertisement(self, adv) -> "Configuration":
        return replace(self, advertisements=tuple(a for a in self.advertisements if a != adv))

    def without_authorizations(self, auths: Iterable[Authorization]) -> "Configuration":
        auths = set(auths)
        return replace(self, authorizations=tuple(a for a in self.authorizations if a not in auths))

    def with_deposits(self, deposits: Iterable[Deposit]) -> "Configuration":
        return replace(self, deposits=self.deposits + tuple(deposits))

    def with_contracts(self, contracts: Iterable[ActiveContract]) -> "Configuration":
        return replace(self, contracts=self.contracts + tuple(contracts))

    def with_advertisement(self, adv) -> "Configuration":
        return replace(self, advertisements=self.advertisements + (adv,))

    def with_authorization(self, auth: Authorization) -> "Configuration":
        return replace(self, authorizations=self.authorizations + (auth,))

    def total_value(self) -> TokenBag:
        """Value held in deposits, contracts and the destroyed counter"""
        total = self.destroyed
        for d in self.deposits:
            total = total + d.value
        for c in self.contracts:
            total = total + c.balance
        return total

    def names(self) -> Tuple[str, ...]:
        return tuple(d.name for d in self.deposits) + tuple(c.name for c in self.contracts)

    def __str__(self) -> str:
        parts = [str(d) for d in self.deposits] + [str(c) for c in self.contracts]
        parts.append(f"destroyed={self.destroyed}")
        parts.append(f"t={self.time}")
        return " | ".join(parts)
