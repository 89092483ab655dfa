"""
Compilation of clause tables and advertisements
"""

from dataclasses import replace
from itertools import product

import pytest

from illum.core.encoding import encode, name_hash
from illum.core.errors import CompileError, LedgerError
from illum.models.actions import Adv, AuthIn, Call, Init
from illum.models.configuration import ContinueAdv, InitAdv
from illum.models.runs import TxLabel
from illum.models.transaction import Output, Transaction
from illum.models.script import SAnd, SBin, SConst, SInidx
from illum.models.values import NULL, Participant, TokenBag
from illum.services import ledger
from illum.services.clauses import fill_branch
from illum.services.compiler import (
    CompilerInputs, ContractOutput, DepositOutput, UnknownOutput, compile_advertisement, compile_script,
    compile_unit, contract_output, decode_output, deposit_output, owners_of, participant_key,
    reconstruct_advertisement,
)
from illum.services.script_eval import ScriptContext, eval_in_context, eval_script, is_true
from illum.services.simulator import Lockstep

from tests.conftest import A, B, C

OWNER = Participant("Owner")
T = TokenBag.single


def bid_raised(program, keys):
    """A bids 5, then B raises to 7 and A is paid back; returns the lockstep and the raise"""
    sim = Lockstep(program, keys, (A, B, OWNER)).start([(A, T(5)), (B, T(7))], 0)
    init = InitAdv("Bid", (0,), (5, A), ("z1",))
    for act in (Adv(init), AuthIn(A, "z1", init), Init(init)):
        sim.perform(act)
    branch = fill_branch(sim.config.contract("x1").process[0], [(7, B)])
    raise_ = ContinueAdv(branch, ("z2",), None, "x1", 1)
    sim.perform(Adv(raise_))
    sim.perform(AuthIn(B, "z2", raise_))
    return sim, raise_


class TestCompileUnit:
    def test_reachable_clauses(self, auction_program):
        """The unit lists every clause reachable from its root"""
        unit = compile_unit("Init", auction_program)
        assert unit.reachable == ("Init", "Bid", "Pay")

    def test_first_input_only(self, auction_program):
        """Contract scripts only run as the first input of the redeemer"""
        script = compile_script("Init", auction_program)
        assert isinstance(script, SAnd)
        assert script.left == SBin("=", SInidx(), SConst(1))

    def test_deterministic(self, auction_program):
        """Compiling twice gives byte-identical scripts"""
        assert encode(compile_script("Init", auction_program)) == encode(compile_script("Init", auction_program))

    def test_undefined_root(self, auction_program):
        """The root must be a clause of the table"""
        with pytest.raises(CompileError) as info:
            compile_unit("Nope", auction_program)
        assert info.value.code == "UndefinedClause"


class TestOutputs:
    def test_decode_contract_output(self, auction_program, keys):
        """A Bid output decodes back to its clause and arguments"""
        key_map = keys.key_map([A, B, OWNER])
        script = compile_script("Init", auction_program, key_map)
        output = contract_output(auction_program["Bid"], (0,), (5, A), T(5), script, 0, 1, key_map)
        assert output.args[3:] == (0, 5, keys.public_key(A))
        decoded = decode_output(output, auction_program, owners_of(key_map))
        assert decoded == ContractOutput("Bid", (0,), (5, A), T(5), 0, 1)

    def test_decode_deposit_output(self, auction_program, keys):
        """Deposit outputs decode to their owner"""
        key_map = keys.key_map([A])
        output = deposit_output(key_map[A], T(3), 2, 1)
        assert decode_output(output, auction_program, owners_of(key_map)) == DepositOutput(A, T(3), 2, 1)

    def test_unknown_owner(self, auction_program, keys):
        """A key nobody announced does not decode"""
        output = deposit_output(keys.public_key(B), T(3))
        assert isinstance(decode_output(output, auction_program, owners_of({})), UnknownOutput)

    def test_null_key(self):
        """Null maps to the all-zero key without a key table"""
        assert participant_key(NULL, None) == bytes(32)
        with pytest.raises(CompileError):
            participant_key(A, {})


class TestRigidity:
    def test_honest_redeemer_is_accepted(self, auction_program, keys):
        """The compiled raise spends the Bid contract"""
        sim, raise_ = bid_raised(auction_program, keys)
        sim.perform(Call(raise_))
        tx = sim.rc.labels[-1].tx
        assert len(tx.outputs) == 2
        new_bid, pay = [decode_output(o, auction_program, owners_of(sim.maps.keys)) for o in tx.outputs]
        assert new_bid == ContractOutput("Bid", (5,), (7, B), T(7), 0, 1)
        assert pay == ContractOutput("Pay", (5, A), (), T(5), 0, 1)
        assert [d.name for d in sim.config.deposits] == []

    def forged(self, sim, tx, outputs):
        forged = replace(tx, outputs=outputs)
        spent_ref = forged.inputs[0]
        spent_tx = sim.chain.entry(spent_ref.tx_id).tx
        ctx = ScriptContext(forged, 1, spent_tx.output(spent_ref.index), spent_tx)
        return is_true(eval_in_context(spent_tx.output(spent_ref.index).script, ctx))

    def test_covenant_rejects_altered_outputs(self, auction_program, keys):
        """Changing the refund, the new bid or dropping an output breaks the contract script"""
        sim, raise_ = bid_raised(auction_program, keys)
        sim.perform(Call(raise_))
        tx = sim.rc.labels[-1].tx
        new_bid, pay = tx.outputs
        assert self.forged(sim, tx, (new_bid, pay))
        assert not self.forged(sim, tx, (new_bid, replace(pay, value=T(4))))
        assert not self.forged(sim, tx, (replace(new_bid, args=new_bid.args[:4] + (8,) + new_bid.args[5:]), pay))
        assert not self.forged(sim, tx, (new_bid,))

    def test_chain_rejects_forgery(self, auction_program, keys):
        """The ledger refuses a redeemer whose outputs were altered"""
        sim, raise_ = bid_raised(auction_program, keys)
        before = sim.chain
        sim.perform(Call(raise_))
        tx = next(l.tx for l in reversed(sim.rc.labels) if isinstance(l, TxLabel))
        new_bid, pay = tx.outputs
        forged = replace(tx, outputs=(new_bid, replace(pay, args=pay.args[:4] + (keys.public_key(B),))))
        with pytest.raises(LedgerError):
            ledger.append(before, forged, sim.config.time)


def wait_contract(program, keys, deposits):
    """Lockstep run with X(0; 1) funded by z3 and on chain as x1"""
    sim = Lockstep(program, keys, (A, B, C)).start(deposits, 0)
    init = InitAdv("X", (0,), (1,), ("z3",))
    for act in (Adv(init), AuthIn(C, "z3", init), Init(init)):
        sim.perform(act)
    return sim


def candidate_outputs(sim, keys):
    """Every deposit or X output over values 0..4 tagged with branch 1 or 2"""
    script = sim.chain.resolve(sim.maps.txout["x1"]).script
    outputs = []
    for tag in (1, 2):
        for who in (A, B):
            outputs += [deposit_output(keys.public_key(who), T(v), 0, tag) for v in range(5)]
        outputs += [
            Output(T(v), script, (0, tag, name_hash("X"), a, b))
            for a, b, v in product(range(5), repeat=3)
        ]
    return outputs


def redeemers(sim, keys, output_tuples):
    x1, z1 = sim.maps.txout["x1"], sim.maps.txout["z1"]
    signer = keys.private_key(B)
    for inputs in ((x1,), (x1, z1)):
        for rel in (0, 10):
            for outputs in output_tuples:
                tx = Transaction(inputs=inputs, outputs=outputs, rel_locks=(rel,) + (0,) * (len(inputs) - 1))
                signature = ledger.sign(tx, signer)
                yield tx.with_witnesses([[signature] for _ in inputs])


def accepted_redeemers(sim, keys, program, output_tuples):
    """Redeemers the x1 script accepts; each must reconstruct to a compiled advertisement"""
    script = sim.chain.resolve(sim.maps.txout["x1"]).script
    accepted = 0
    for tx in redeemers(sim, keys, output_tuples):
        if not is_true(eval_script(script, tx, 1, sim.chain)):
            continue
        rebuilt = reconstruct_advertisement(tx, sim.chain, sim.maps.txout, program, sim.maps.keys)
        assert rebuilt is not None, f"accepted redeemer with outputs {tx.outputs} has no advertisement"
        assert rebuilt.adv.contract == "x1"
        accepted += 1
    return accepted


class TestWaitRigidity:
    def test_single_output_redeemers(self, wait_program, keys, wait_deposits):
        """Only send(1:T -> A) after 10 and X(1; b) with b in 2..4 pass, once per input set and lock"""
        sim = wait_contract(wait_program, keys, wait_deposits)
        outputs = candidate_outputs(sim, keys)
        singles = [()] + [(o,) for o in outputs]
        assert accepted_redeemers(sim, keys, wait_program, singles) == 2 + 3 * 4

    def test_compiled_advertisements_are_accepted(self, wait_program, keys, wait_deposits):
        """Every valid filling of the call branch compiles to an accepted redeemer"""
        sim = wait_contract(wait_program, keys, wait_deposits)
        x1 = sim.config.contract("x1")
        script = sim.chain.resolve(sim.maps.txout["x1"]).script
        for b in range(2, 5):
            adv = ContinueAdv(fill_branch(x1.process[1], [(b,)]), (), None, "x1", 2)
            ci = CompilerInputs(adv, sim.maps.txout, sim.maps.keys, (sim.maps.txout["x1"],), 0, (0,),
                                (0,), wait_program, sim.chain)
            tx = compile_advertisement(ci)
            assert isinstance(tx, Transaction)
            tx = tx.with_witnesses([[ledger.sign(tx, keys.private_key(B))]])
            assert is_true(eval_script(script, tx, 1, sim.chain))

    def test_compiled_send_is_accepted(self, wait_program, keys, wait_deposits):
        """The send branch compiles to a redeemer the script and the ledger accept once 10 have passed"""
        sim = wait_contract(wait_program, keys, wait_deposits)
        x1 = sim.config.contract("x1")
        script = sim.chain.resolve(sim.maps.txout["x1"]).script
        adv = ContinueAdv(x1.process[0], (), None, "x1", 1)
        ci = CompilerInputs(adv, sim.maps.txout, sim.maps.keys, (sim.maps.txout["x1"],), 0, (10,),
                            (0,), wait_program, sim.chain)
        tx = compile_advertisement(ci)
        assert isinstance(tx, Transaction)
        assert tx.outputs == (deposit_output(keys.public_key(A), T(1), 0, 1),)
        assert is_true(eval_script(script, tx, 1, sim.chain))
        chain = ledger.append(sim.chain, tx, sim.chain.time + 10)
        assert ledger.unspent_value(chain) == ledger.unspent_value(sim.chain)

        early = CompilerInputs(adv, sim.maps.txout, sim.maps.keys, (sim.maps.txout["x1"],), 0, (9,),
                               (0,), wait_program, sim.chain)
        assert not compile_advertisement(early)

    def test_compiled_deposit_funded_call_is_accepted(self, wait_program, keys, wait_deposits):
        """A call paid for by z1 compiles and is appended, whether z1 is named or passed as w"""
        sim = wait_contract(wait_program, keys, wait_deposits)
        x1 = sim.config.contract("x1")
        script = sim.chain.resolve(sim.maps.txout["x1"]).script
        refs = (sim.maps.txout["x1"], sim.maps.txout["z1"])
        branch = fill_branch(x1.process[1], [(3,)])
        for deposits, w in ((("z1",), None), ((), T(2))):
            adv = ContinueAdv(branch, deposits, w, "x1", 2)
            ci = CompilerInputs(adv, sim.maps.txout, sim.maps.keys, refs, 0, (0, 0), (0,), wait_program, sim.chain)
            tx = compile_advertisement(ci)
            assert isinstance(tx, Transaction)
            assert tx.inputs == refs and len(tx.outputs) == 1 and tx.outputs[0].value == T(3)
            signature = ledger.sign(tx, keys.private_key(B))
            tx = tx.with_witnesses([[signature], [signature]])
            assert is_true(eval_script(script, tx, 1, sim.chain))
            chain = ledger.append(sim.chain, tx, sim.chain.time)
            assert chain.spent_by(refs[1]) == tx.tx_id

        short = ContinueAdv(branch, (), T(1), "x1", 2)
        ci = CompilerInputs(short, sim.maps.txout, sim.maps.keys, refs, 0, (0, 0), (0,), wait_program, sim.chain)
        assert compile_advertisement(ci).reason == "ExtraInputsValue"

    @pytest.mark.slow
    def test_two_output_redeemers(self, wait_program, keys, wait_deposits):
        """No branch of X has two outputs, so no pair of outputs passes"""
        sim = wait_contract(wait_program, keys, wait_deposits)
        outputs = candidate_outputs(sim, keys)
        assert accepted_redeemers(sim, keys, wait_program, list(product(outputs, repeat=2))) == 0
