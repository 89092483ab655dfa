"""
Lockstep runs, run parsing and the coherence and balance checks
"""

from dataclasses import replace

import pytest

from illum.models.actions import Adv, AuthIn, Destroy
from illum.models.configuration import DestroyAdv
from illum.models.runs import (
    BroadcastLabel, ComputationalRun, DelayLabel, OpaqueMessage, TxLabel, TxMessage, WitnessQuadruple,
)
from illum.models.transaction import Transaction
from illum.models.values import TokenBag
from illum.services.coherence import (
    COHERENCE_CASES, CounterExample, canonical_names, check_balance_preservation, check_coherence, parse_run,
)
from illum.services import ledger
from illum.services.compiler import deposit_output
from illum.services.serialization import dumps
from illum.services.simulator import Lockstep, simulate_random

from tests.conftest import A, B, C, wait_actions

PARTICIPANTS = (A, B, C)


@pytest.fixture
def wait_sim(wait_program, keys, wait_deposits):
    sim = Lockstep(wait_program, keys, PARTICIPANTS).start(wait_deposits, 0)
    actions, _ = wait_actions(wait_program)
    for act in actions:
        sim.perform(act)
    return sim


class TestLockstep:
    def test_base_labels(self, wait_program, keys, wait_deposits):
        """A coinbase followed by one key announcement per participant"""
        sim = Lockstep(wait_program, keys, PARTICIPANTS).start(wait_deposits, 0)
        assert isinstance(sim.rc.labels[0], TxLabel)
        assert len(sim.rc) == 1 + len(PARTICIPANTS)
        assert sorted(sim.maps.txout) == ["z1", "z2", "z3"]
        assert sim.maps.keys[A] == keys.public_key(A)

    def test_consuming_actions_append_transactions(self, wait_sim):
        """Init, Call and Send each end with a transaction on the chain"""
        appended = [label for label in wait_sim.rc.labels if isinstance(label, TxLabel)]
        assert len(appended) == 4
        assert len(wait_sim.chain.entries) == 4

    def test_final_deposits_are_mapped(self, wait_sim):
        """x3 is bound to the output paying A"""
        final = wait_sim.config
        assert [d.name for d in final.deposits] == ["z2", "x3"]
        ref = wait_sim.maps.txout["x3"]
        assert wait_sim.chain.resolve(ref).value == TokenBag.single(3)


class TestCoherence:
    def test_honest_run_is_coherent(self, wait_sim, wait_program):
        """The lockstep Wait run passes both checks"""
        assert check_coherence(wait_sim.rs, wait_sim.rc, wait_sim.maps, wait_program)
        assert check_balance_preservation(wait_sim.rs, wait_sim.rc, wait_sim.maps)

    def test_missing_transaction(self, wait_sim, wait_program):
        """Dropping the final transaction leaves Send without a counterpart"""
        truncated = ComputationalRun(wait_sim.rc.labels[:-1], wait_sim.rc.seed)
        result = check_coherence(wait_sim.rs, truncated, wait_sim.maps, wait_program)
        assert isinstance(result, CounterExample)
        assert not result

    def test_extra_delay(self, wait_sim, wait_program):
        """A trailing delay has no symbolic counterpart"""
        extended = wait_sim.rc.extended(DelayLabel(5))
        result = check_coherence(wait_sim.rs, extended, wait_sim.maps, wait_program)
        assert not result
        assert result.to_dict()["reason"]

    def test_opaque_broadcast_is_ignored(self, wait_sim, wait_program):
        """Messages that decode to nothing do not affect coherence"""
        noisy = wait_sim.rc.extended(BroadcastLabel(C, OpaqueMessage(b"\x00garbage")))
        assert check_coherence(wait_sim.rs, noisy, wait_sim.maps, wait_program)

    def test_parse_run(self, wait_sim, wait_program):
        """The parsed symbolic run matches the lockstep one up to renaming"""
        rs, maps = parse_run(wait_sim.rc, wait_program)
        assert len(rs) == len(wait_sim.rs)
        assert rs.final.total_value() == wait_sim.rs.final.total_value()
        assert canonical_names(rs).final.deposits == canonical_names(wait_sim.rs).final.deposits
        assert set(maps.keys) == set(PARTICIPANTS)

    def test_balance_violation(self, wait_sim, wait_program):
        """A map pointing a live deposit at a spent output is reported"""
        wait_sim.maps.txout["x3"] = wait_sim.maps.txout["z1"]
        report = check_balance_preservation(wait_sim.rs, wait_sim.rc, wait_sim.maps)
        assert not report
        assert any(v.term == "x3" for v in report.violations)


class TestRandomRuns:
    @pytest.mark.parametrize("seed", range(5))
    def test_wait(self, wait_program, wait_deposits, seed):
        """Seeded honest walks with adversary noise stay coherent"""
        sim = simulate_random(wait_program, wait_deposits, PARTICIPANTS, seed, 30)
        assert check_coherence(sim.rs, sim.rc, sim.maps, wait_program)
        assert check_balance_preservation(sim.rs, sim.rc, sim.maps)

    @pytest.mark.parametrize("seed", range(3))
    def test_auction(self, auction_program, seed):
        sim = simulate_random(auction_program, [(A, TokenBag.single(5)), (B, TokenBag.single(7))], (A, B), seed, 30)
        assert check_coherence(sim.rs, sim.rc, sim.maps, auction_program)
        assert check_balance_preservation(sim.rs, sim.rc, sim.maps)

    def test_same_seed_same_run(self, wait_program, wait_deposits):
        """Random walks are reproducible from their seed"""
        first = simulate_random(wait_program, wait_deposits, PARTICIPANTS, 7, 20)
        second = simulate_random(wait_program, wait_deposits, PARTICIPANTS, 7, 20)
        assert dumps(first.rc) == dumps(second.rc)

    @pytest.mark.slow
    def test_many_traces(self, wait_program, wait_deposits):
        """Long walks parse back from their transactions and stay coherent"""
        for seed in range(100):
            sim = simulate_random(wait_program, wait_deposits, PARTICIPANTS, seed, 200)
            rs, _ = parse_run(sim.rc, wait_program)
            assert rs.final.total_value() == sim.rs.final.total_value(), f"seed {seed}"
            assert check_coherence(sim.rs, sim.rc, sim.maps, wait_program), f"seed {seed}"
            assert check_balance_preservation(sim.rs, sim.rc, sim.maps), f"seed {seed}"


def positions(rc, kind):
    """Indexes of the labels of one kind: "tx", "broadcast", "witness" or "delay" """
    def matches(label):
        if kind == "tx":
            return isinstance(label, TxLabel) and bool(label.tx.inputs)
        if kind == "delay":
            return isinstance(label, DelayLabel)
        if not isinstance(label, BroadcastLabel):
            return False
        return isinstance(label.message, TxMessage if kind == "broadcast" else WitnessQuadruple)
    return [k for k, label in enumerate(rc.labels) if matches(label)]


def without(rc, *indexes):
    return ComputationalRun(tuple(l for k, l in enumerate(rc.labels) if k not in indexes), rc.seed)


def replaced(rc, index, label):
    labels = list(rc.labels)
    labels[index] = label
    return ComputationalRun(tuple(labels), rc.seed)


def renonced(label):
    """The broadcast transaction with nonce 1 on every output"""
    tx = label.message.tx
    outputs = tuple(replace(o, args=(1,) + o.args[1:]) for o in tx.outputs)
    return BroadcastLabel(label.sender, TxMessage(replace(tx, outputs=outputs)))


@pytest.fixture
def destroy_sim(wait_sim):
    """The Wait run followed by B destroying z2"""
    adv = DestroyAdv(("z2",))
    for act in (Adv(adv), AuthIn(B, "z2", adv), Destroy(adv)):
        wait_sim.perform(act)
    return wait_sim


class TestCounterExampleCases:
    def counterexample(self, sim, rc, program) -> CounterExample:
        result = check_coherence(sim.rs, rc, sim.maps, program)
        assert isinstance(result, CounterExample)
        assert result.case in COHERENCE_CASES
        return result

    def test_case_table(self):
        """The base case, seventeen symbolic steps and two ignorable labels"""
        assert len(set(COHERENCE_CASES)) == 20

    def test_advertised_init_changed(self, wait_sim, wait_program):
        """A renonced Init broadcast induces another advertisement"""
        k = positions(wait_sim.rc, "broadcast")[0]
        result = self.counterexample(wait_sim, replaced(wait_sim.rc, k, renonced(wait_sim.rc.labels[k])), wait_program)
        assert (result.step, result.label_index, result.case) == (0, k, "adv-init")

    def test_advertised_continuation_changed(self, wait_sim, wait_program):
        """A renonced payout broadcast induces another advertisement"""
        k = positions(wait_sim.rc, "broadcast")[-1]
        result = self.counterexample(wait_sim, replaced(wait_sim.rc, k, renonced(wait_sim.rc.labels[k])), wait_program)
        assert (result.step, result.label_index, result.case) == (8, k, "adv-continue")

    def test_init_without_authorization(self, wait_sim, wait_program):
        """Without the z3 witness the Init transaction has no enabled counterpart"""
        witness = positions(wait_sim.rc, "witness")[0]
        rc = without(wait_sim.rc, witness)
        result = self.counterexample(wait_sim, rc, wait_program)
        assert result.case == "init"
        assert result.label_index == positions(rc, "tx")[0]

    def test_call_without_authorizations(self, wait_sim, wait_program):
        """Dropping both witnesses of the bump leaves Call disabled"""
        _, act_witness, in_witness = positions(wait_sim.rc, "witness")
        rc = without(wait_sim.rc, act_witness, in_witness)
        result = self.counterexample(wait_sim, rc, wait_program)
        assert result.case == "call"
        assert result.label_index == positions(rc, "tx")[1]

    def test_destroy_without_authorization(self, destroy_sim, wait_program):
        """The destroy transaction needs B's authorization of z2"""
        witness = positions(destroy_sim.rc, "witness")[-1]
        result = self.counterexample(destroy_sim, without(destroy_sim.rc, witness), wait_program)
        assert result.case == "destroy"

    def test_destroy_is_coherent(self, destroy_sim, wait_program):
        assert check_coherence(destroy_sim.rs, destroy_sim.rc, destroy_sim.maps, wait_program)

    def test_shorter_delay(self, wait_sim, wait_program):
        """A delay of 9 where 10 was expected"""
        k = positions(wait_sim.rc, "delay")[0]
        result = self.counterexample(wait_sim, replaced(wait_sim.rc, k, DelayLabel(9)), wait_program)
        assert (result.step, result.label_index, result.case) == (7, k, "delay")

    def test_dangling_transaction(self, wait_sim, wait_program, keys):
        """A transaction spending x3 that was never broadcast fits no case"""
        ref = wait_sim.maps.txout["x3"]
        tx = Transaction(inputs=(ref,), outputs=(deposit_output(keys.public_key(B), TokenBag.single(3)),), rel_locks=(0,))
        tx = tx.with_witnesses([[ledger.sign(tx, keys.private_key(A))]])
        rc = wait_sim.rc.extended(TxLabel(tx))
        result = self.counterexample(wait_sim, rc, wait_program)
        assert (result.label_index, result.case) == (len(rc) - 1, "unrelated-tx")
        assert "never advertised" in result.reason

    def test_missing_send(self, wait_sim, wait_program):
        """The last symbolic step is named when its transaction is missing"""
        result = self.counterexample(wait_sim, without(wait_sim.rc, len(wait_sim.rc) - 1), wait_program)
        assert result.case == "send"

    def test_trailing_delay(self, wait_sim, wait_program):
        result = self.counterexample(wait_sim, wait_sim.rc.extended(DelayLabel(5)), wait_program)
        assert result.case == "delay"
