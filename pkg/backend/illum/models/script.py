"""
Covenant script language for the UTXO model
"""

from dataclasses import dataclass
from typing import Tuple, Union

from illum.models.values import format_value


@dataclass(frozen=True)
class SConst:
    value: object


@dataclass(frozen=True)
class SBin:
    """Core binary operators: + - = <"""
    op: str
    left: "Script"
    right: "Script"


@dataclass(frozen=True)
class SAnd:
    left: "Script"
    right: "Script"


@dataclass(frozen=True)
class SOr:
    left: "Script"
    right: "Script"


@dataclass(frozen=True)
class SNot:
    arg: "Script"


@dataclass(frozen=True)
class SIndex:
    """e.n with 1-based n"""
    arg: "Script"
    position: int


@dataclass(frozen=True)
class SRtxw:
    pass


@dataclass(frozen=True)
class SSize:
    arg: "Script"


@dataclass(frozen=True)
class SHash:
    arg: "Script"


@dataclass(frozen=True)
class SIf:
    test: "Script"
    then: "Script"
    orelse: "Script"


@dataclass(frozen=True)
class SVersig:
    key: "Script"
    signature: "Script"


@dataclass(frozen=True)
class SAbsAfter:
    time: "Script"
    body: "Script"


@dataclass(frozen=True)
class SRelAfter:
    delta: "Script"
    body: "Script"


@dataclass(frozen=True)
class SCtxo:
    """Field of the output being redeemed; ``field`` is arg or val"""
    field: str


@dataclass(frozen=True)
class SRtxo:
    """Field of the n-th output of the redeeming transaction"""
    index: "Script"
    field: str


@dataclass(frozen=True)
class SInidx:
    pass


@dataclass(frozen=True)
class SInlen:
    tx: str


@dataclass(frozen=True)
class SOutlen:
    tx: str


@dataclass(frozen=True)
class SOutscr:
    """verscr: the index-th redeeming output carries exactly ``script``"""
    script: "Script"
    index: "Script"


@dataclass(frozen=True)
class SOutrec:
    """verrec: the index-th redeeming output carries the current script"""
    index: "Script"


@dataclass(frozen=True)
class SLookup:
    map: "Script"
    key: "Script"


@dataclass(frozen=True)
class SUpdate:
    map: "Script"
    key: "Script"
    value: "Script"


@dataclass(frozen=True)
class SContains:
    map: "Script"
    key: "Script"


@dataclass(frozen=True)
class SGetOr:
    map: "Script"
    key: "Script"
    default: "Script"


@dataclass(frozen=True)
class STokens:
    """A one-token bag of ``amount`` units of ``token``"""
    amount: "Script"
    token: str


@dataclass(frozen=True)
class SBagAdd:
    left: "Script"
    right: "Script"


Script = Union[
    SConst, SBin, SAnd, SOr, SNot, SIndex, SRtxw, SSize, SHash, SIf, SVersig,
    SAbsAfter, SRelAfter, SCtxo, SRtxo, SInidx, SInlen, SOutlen, SOutscr, SOutrec,
    SLookup, SUpdate, SContains, SGetOr, STokens, SBagAdd,
]

S_TRUE = SConst(1)
S_FALSE = SConst(0)


def conj(*parts: Script) -> Script:
    """Right-nested conjunction; true when empty"""
    parts = [p for p in parts if p != S_TRUE]
    if not parts:
        return S_TRUE
    result = parts[-1]
    for part in reversed(parts[:-1]):
        result = SAnd(part, result)
    return result


def switch(cases: Tuple[Tuple[Script, Script], ...], default: Script = S_FALSE) -> Script:
    """if c1 then s1 else if c2 then s2 ... else default"""
    result = default
    for test, body in reversed(tuple(cases)):
        result = SIf(test, body, result)
    return result


def arg(position: int) -> Script:
    return SIndex(SCtxo("arg"), position)


def rarg(output: int, position: int) -> Script:
    return SIndex(SRtxo(SConst(output), "arg"), position)


def format_script(s: Script) -> str:
    """Human-readable rendering used by artifacts and logs"""
    if isinstance(s, SConst):
        return format_value(s.value)
    if isinstance(s, SBin):
        return f"({format_script(s.left)} {s.op} {format_script(s.right)})"
    if isinstance(s, SAnd):
        return f"({format_script(s.left)} and {format_script(s.right)})"
    if isinstance(s, SOr):
        return f"({format_script(s.left)} or {format_script(s.right)})"
    if isinstance(s, SNot):
        return f"not {format_script(s.arg)}"
    if isinstance(s, SIndex):
        return f"{format_script(s.arg)}.{s.position}"
    if isinstance(s, SRtxw):
        return "rtxw"
    if isinstance(s, SSize):
        return f"|{format_script(s.arg)}|"
    if isinstance(s, SHash):
        return f"H({format_script(s.arg)})"
    if isinstance(s, SIf):
        return (
            f"if {format_script(s.test)} then {format_script(s.then)} "
            f"else {format_script(s.orelse)}"
        )
    if isinstance(s, SVersig):
        return f"versig({format_script(s.key)}, {format_script(s.signature)})"
    if isinstance(s, SAbsAfter):
        return f"absAfter {format_script(s.time)} : {format_script(s.body)}"
    if isinstance(s, SRelAfter):
        return f"relAfter {format_script(s.delta)} : {format_script(s.body)}"
    if isinstance(s, SCtxo):
        return f"ctxo.{s.field}"
    if isinstance(s, SRtxo):
        return f"rtxo({format_script(s.index)}).{s.field}"
    if isinstance(s, SInidx):
        return "inidx"
    if isinstance(s, SInlen):
        return f"inlen({s.tx})"
    if isinstance(s, SOutlen):
        return f"outlen({s.tx})"
    if isinstance(s, SOutscr):
        return f"verscr({format_script(s.script)}, {format_script(s.index)})"
    if isinstance(s, SOutrec):
        return f"verrec({format_script(s.index)})"
    if isinstance(s, SLookup):
        return f"{format_script(s.map)}[{format_script(s.key)}]"
    if isinstance(s, SUpdate):
        return f"{format_script(s.map)}[{format_script(s.key)} -> {format_script(s.value)}]"
    if isinstance(s, SContains):
        return f"contains({format_script(s.map)}, {format_script(s.key)})"
    if isinstance(s, SGetOr):
        return f"get({format_script(s.map)}, {format_script(s.key)}, {format_script(s.default)})"
    if isinstance(s, STokens):
        return f"{format_script(s.amount)}:{s.token}"
    if isinstance(s, SBagAdd):
        return f"({format_script(s.left)} ++ {format_script(s.right)})"
    return repr(s)
