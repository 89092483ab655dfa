"""
Strict evaluation of covenant scripts
"""

import logging
from dataclasses import dataclass
from typing import Optional

from illum.core.crypto import verify_signature
from illum.core.encoding import digest, encode
from illum.core.errors import IllumError
from illum.models.script import (
    SAbsAfter, SAnd, SBagAdd, SBin, SConst, SContains, SCtxo, SGetOr, SHash, SIf, SIndex,
    SInidx, SInlen, SLookup, SNot, SOr, SOutlen, SOutrec, SOutscr, SRelAfter, SRtxo, SRtxw,
    SSize, STokens, SUpdate, SVersig, Script,
)
from illum.models.transaction import Blockchain, Output, Transaction
from illum.models.values import MapValue, TokenBag, check_int
from illum.services.expressions import value_size, values_equal

logger = logging.getLogger(__name__)


class _BottomValue:
    def __repr__(self) -> str:
        return "⊥"


BOTTOM = _BottomValue()


class _Bottom(Exception):
    pass


@dataclass(frozen=True)
class ScriptContext:
    """Redeeming transaction, 1-based input index and the output it spends"""
    redeemer: Transaction
    input_index: int
    spent: Output
    spent_tx: Transaction


def context_for(redeemer: Transaction, input_index: int, chain: Blockchain) -> Optional[ScriptContext]:
    if not 1 <= input_index <= len(redeemer.inputs):
        return None
    ref = redeemer.inputs[input_index - 1]
    entry = chain.entry(ref.tx_id)
    if entry is None or entry.tx.output(ref.index) is None:
        return None
    return ScriptContext(redeemer, input_index, entry.tx.output(ref.index), entry.tx)


def _int(value) -> int:
    if isinstance(value, bool):
        return int(value)
    if not isinstance(value, int):
        raise _Bottom()
    return value


def _map(value) -> MapValue:
    if not isinstance(value, MapValue):
        raise _Bottom()
    return value


def _equal(left, right) -> bool:
    if isinstance(left, TokenBag) or isinstance(right, TokenBag):
        if not (isinstance(left, TokenBag) and isinstance(right, TokenBag)):
            raise _Bottom()
        return left == right
    if isinstance(left, tuple) or isinstance(right, tuple):
        if not (isinstance(left, tuple) and isinstance(right, tuple)):
            raise _Bottom()
        return left == right
    return values_equal(left, right)


def _output(ctx: ScriptContext, index) -> Output:
    output = ctx.redeemer.output(_int(index))
    if output is None:
        raise _Bottom()
    return output


def _eval(s: Script, ctx: ScriptContext):
    if isinstance(s, SConst):
        return s.value
    if isinstance(s, SBin):
        left, right = _eval(s.left, ctx), _eval(s.right, ctx)
        if s.op == "=":
            return int(_equal(left, right))
        if s.op == "+":
            return check_int(_int(left) + _int(right))
        if s.op == "-":
            return check_int(_int(left) - _int(right))
        if s.op == "<":
            return int(_int(left) < _int(right))
        raise _Bottom()
    if isinstance(s, SAnd):
        if not _int(_eval(s.left, ctx)):
            return 0
        return int(_int(_eval(s.right, ctx)) != 0)
    if isinstance(s, SOr):
        return 1 if _int(_eval(s.left, ctx)) else int(_int(_eval(s.right, ctx)) != 0)
    if isinstance(s, SNot):
        return int(not _int(_eval(s.arg, ctx)))
    if isinstance(s, SIf):
        return _eval(s.then if _int(_eval(s.test, ctx)) else s.orelse, ctx)
    if isinstance(s, SIndex):
        items = _eval(s.arg, ctx)
        if not isinstance(items, tuple) or not 1 <= s.position <= len(items):
            raise _Bottom()
        return items[s.position - 1]
    if isinstance(s, SRtxw):
        witnesses = ctx.redeemer.witnesses
        if witnesses is None or len(witnesses) < ctx.input_index:
            raise _Bottom()
        return tuple(witnesses[ctx.input_index - 1])
    if isinstance(s, SSize):
        value = _eval(s.arg, ctx)
        return len(value) if isinstance(value, tuple) else value_size(value)
    if isinstance(s, SHash):
        return digest(_eval(s.arg, ctx))
    if isinstance(s, SVersig):
        key, signature = _eval(s.key, ctx), _eval(s.signature, ctx)
        if not isinstance(key, bytes) or not isinstance(signature, bytes):
            raise _Bottom()
        return int(verify_signature(key, signature, ctx.redeemer.signing_bytes()))
    if isinstance(s, SAbsAfter):
        if ctx.redeemer.abs_lock < _int(_eval(s.time, ctx)):
            raise _Bottom()
        return _eval(s.body, ctx)
    if isinstance(s, SRelAfter):
        locks = ctx.redeemer.rel_locks
        if len(locks) < ctx.input_index or locks[ctx.input_index - 1] < _int(_eval(s.delta, ctx)):
            raise _Bottom()
        return _eval(s.body, ctx)
    if isinstance(s, SCtxo):
        return ctx.spent.args if s.field == "arg" else ctx.spent.value
    if isinstance(s, SRtxo):
        output = _output(ctx, _eval(s.index, ctx))
        return output.args if s.field == "arg" else output.value
    if isinstance(s, SInidx):
        return ctx.input_index
    if isinstance(s, SInlen):
        return len((ctx.redeemer if s.tx == "rtx" else ctx.spent_tx).inputs)
    if isinstance(s, SOutlen):
        return len((ctx.redeemer if s.tx == "rtx" else ctx.spent_tx).outputs)
    if isinstance(s, SOutscr):
        return int(encode(_output(ctx, _eval(s.index, ctx)).script) == encode(s.script))
    if isinstance(s, SOutrec):
        return int(encode(_output(ctx, _eval(s.index, ctx)).script) == encode(ctx.spent.script))
    if isinstance(s, SLookup):
        return _map(_eval(s.map, ctx)).lookup(_eval(s.key, ctx))
    if isinstance(s, SUpdate):
        return _map(_eval(s.map, ctx)).update(_eval(s.key, ctx), _eval(s.value, ctx))
    if isinstance(s, SContains):
        return int(_map(_eval(s.map, ctx)).contains(_eval(s.key, ctx)))
    if isinstance(s, SGetOr):
        m = _map(_eval(s.map, ctx))
        key = _eval(s.key, ctx)
        return m.lookup(key) if m.contains(key) else _eval(s.default, ctx)
    if isinstance(s, STokens):
        amount = _int(_eval(s.amount, ctx))
        if amount < 0:
            raise _Bottom()
        return TokenBag.of([(s.token, amount)])
    if isinstance(s, SBagAdd):
        left, right = _eval(s.left, ctx), _eval(s.right, ctx)
        if not isinstance(left, TokenBag) or not isinstance(right, TokenBag):
            raise _Bottom()
        return left + right
    raise _Bottom()


def eval_in_context(s: Script, ctx: ScriptContext):
    """Value of ``s`` or BOTTOM; never raises"""
    try:
        return _eval(s, ctx)
    except (_Bottom, IllumError, RecursionError):
        return BOTTOM


def eval_script(s: Script, redeemer: Transaction, input_index: int, chain: Blockchain):
    """Evaluate ``s`` for the ``input_index``-th (1-based) input of ``redeemer``"""
    ctx = context_for(redeemer, input_index, chain)
    if ctx is None:
        return BOTTOM
    return eval_in_context(s, ctx)


def is_true(value) -> bool:
    return value is not BOTTOM and isinstance(value, int) and value != 0
