"""
Ledger service: signatures, the redeeming relation and blockchain consistency
"""

import logging
from typing import List, Tuple

from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

from illum.core.config import settings
from illum.core.crypto import verify_signature
from illum.core.errors import LedgerError
from illum.models.transaction import Blockchain, ChainEntry, OutRef, Output, Transaction
from illum.models.values import TokenBag, ZERO
from illum.services.script_eval import ScriptContext, eval_in_context, is_true

logger = logging.getLogger(__name__)


def tx_id(tx: Transaction) -> bytes:
    return tx.tx_id


def sign(tx: Transaction, key: Ed25519PrivateKey) -> bytes:
    """Signature over the transaction with every witness nulled"""
    return key.sign(tx.signing_bytes())


def verify(public_key: bytes, signature: bytes, tx: Transaction) -> bool:
    return verify_signature(public_key, signature, tx.signing_bytes())


def _lock_failure(prev_time: int, red: Transaction, in_index: int, time: int) -> str:
    if time < red.abs_lock:
        return f"absolute lock {red.abs_lock} not reached at {time}"
    if len(red.rel_locks) >= in_index and time - prev_time < red.rel_locks[in_index - 1]:
        return f"relative lock {red.rel_locks[in_index - 1]} not reached after {time - prev_time}"
    return ""


def can_redeem(prev: Tuple[Transaction, int, int], red: Tuple[Transaction, int, int]) -> bool:
    """The four redeeming conditions; indexes are 1-based"""
    prev_tx, out_index, prev_time = prev
    red_tx, in_index, time = red
    if not 1 <= in_index <= len(red_tx.inputs):
        return False
    if red_tx.inputs[in_index - 1] != OutRef(prev_tx.tx_id, out_index):
        return False
    output = prev_tx.output(out_index)
    if output is None:
        return False
    if _lock_failure(prev_time, red_tx, in_index, time):
        return False
    return is_true(eval_in_context(output.script, ScriptContext(red_tx, in_index, output, prev_tx)))


def _check_shape(tx: Transaction):
    if tx.inputs:
        witnesses = tx.witnesses or ()
        if len(witnesses) != len(tx.inputs) or len(tx.rel_locks) != len(tx.inputs):
            raise LedgerError(
                "witnesses and relative locks must parallel the inputs", code="MalformedTransaction",
            )
    elif tx.rel_locks or tx.witnesses:
        raise LedgerError("a transaction without inputs carries witnesses", code="MalformedTransaction")
    if tx.abs_lock < 0 or any(lock < 0 for lock in tx.rel_locks):
        raise LedgerError("negative timelock", code="MalformedTransaction")
    for output in tx.outputs:
        if not output.value.is_nonnegative():
            raise LedgerError(f"negative output value {output.value}", code="MalformedTransaction")


def append(chain: Blockchain, tx: Transaction, time: int) -> Blockchain:
    """Return the chain extended with ``(tx, time)``; raises LedgerError with the violated condition"""
    try:
        _check_shape(tx)
        if len(chain) and time < chain.time:
            raise LedgerError(f"time {time} precedes {chain.time}", code="MalformedTransaction")
        if chain.entry(tx.tx_id) is not None:
            raise LedgerError("transaction already on chain", code="MalformedTransaction")
        if not tx.inputs:
            if len(chain):
                raise LedgerError("only the first transaction may have no inputs", code="SecondCoinbase")
            if time != 0:
                raise LedgerError("the initial transaction is appended at time 0", code="MalformedTransaction")
        elif not len(chain):
            raise LedgerError("the first transaction must have no inputs", code="UnknownOutput")

        spent_here = set()
        total_in = ZERO
        for k, ref in enumerate(tx.inputs, start=1):
            entry = chain.entry(ref.tx_id)
            output = entry.tx.output(ref.index) if entry else None
            if output is None:
                raise LedgerError(f"input {k} refers to unknown output {ref}", code="UnknownOutput")
            if ref in spent_here or chain.spent_by(ref) is not None:
                raise LedgerError(f"input {k} spends {ref} twice", code="DoubleSpend")
            failure = _lock_failure(entry.time, tx, k, time)
            if failure:
                raise LedgerError(f"input {k}: {failure}", code="TimelockViolated")
            if not is_true(eval_in_context(output.script, ScriptContext(tx, k, output, entry.tx))):
                raise LedgerError(f"input {k}: script of {ref} not satisfied", code="ScriptFailed")
            spent_here.add(ref)
            total_in = total_in + output.value

        total_out = ZERO
        for output in tx.outputs:
            total_out = total_out + output.value
        if tx.inputs and not total_in.covers(total_out):
            raise LedgerError(f"outputs {total_out} exceed inputs {total_in}", code="ValueCreated")

        if settings.ILLUM_TRACE:
            logger.debug(f"append {tx.tx_id.hex()[:12]} at {time}: {len(tx.inputs)} in, {len(tx.outputs)} out")
        return chain.extended(ChainEntry(tx.tx_id, tx, time))
    except LedgerError as e:
        logger.debug(f"❌ append rejected: {e}")
        raise


def utxo_set(chain: Blockchain) -> List[Tuple[bytes, int, Output]]:
    """Unspent outputs in chain order"""
    result = []
    for entry in chain:
        for index, output in enumerate(entry.tx.outputs, start=1):
            if chain.spent_by(OutRef(entry.tx_id, index)) is None:
                result.append((entry.tx_id, index, output))
    return result


def unspent_value(chain: Blockchain) -> TokenBag:
    total = ZERO
    for _, _, output in utxo_set(chain):
        total = total + output.value
    return total


def build_chain(transactions) -> Blockchain:
    """Append ``(tx, time)`` pairs in order"""
    chain = Blockchain()
    for tx, time in transactions:
        chain = append(chain, tx, time)
    return chain
