"""
Lowered contracts executed on lockstep runs, against the reference interpreter
"""

import random

import pytest

from illum.core.errors import ModifierUnsatisfied, Revert, ScenarioError
from illum.models.values import TokenBag
from illum.services.coherence import check_balance_preservation, check_coherence
from illum.services.compiler import compile_unit
from illum.services.hellum_codegen import gen_clauses, run_name
from illum.services.hellum_driver import HellumDriver
from illum.services.hellum_interp import deploy, interp_call, state_arguments
from illum.services.hellum_normalize import normalize_contract, prove_balance
from illum.services.hellum_parser import parse_contract
from illum.services.hellum_typecheck import typecheck

from tests.conftest import A, B, lower, read_contract

T = TokenBag.single


def clause_state(state, tokens):
    """Interpreter state laid out like the arguments of a waiting clause"""
    return state_arguments(state) + tuple(state.balances.amount(t) for t in tokens)


@pytest.fixture
def driver(crowdfund):
    d = HellumDriver(crowdfund, [(A, T(50)), (B, T(50))])
    assert d.deploy(A, (A, 10, 30)).ok
    return d


class TestDriver:
    def test_deploy_state(self, crowdfund, driver):
        """The waiting contract holds the constructor's final state"""
        expected = clause_state(deploy(crowdfund.typed, (A, 10, 30)).state, crowdfund.typed.tokens)
        assert driver.config.contract(driver.contract).internal == expected
        assert driver.chain_state().clause == "constructor_next"

    def test_deploy_twice(self, driver):
        with pytest.raises(ScenarioError):
            driver.deploy(A, (A, 10, 30))

    def test_deposit_divides_payer_funds(self, driver):
        """The payer's 50:T deposit is split to pay exactly 12:T"""
        outcome = driver.call(A, "deposit", (A, 12), paid=T(12), time=1)
        assert outcome.ok
        assert outcome.state[-1] == 12
        assert sorted(d.value.amount("T") for d in driver.config.deposits if d.owner == A) == [38]

    def test_revert_emits_nothing(self, driver):
        """A failed require leaves both runs untouched"""
        before = len(driver.sim.rc)
        outcome = driver.call(B, "deposit", (B, 5), paid=T(5))
        assert not outcome.ok
        assert isinstance(outcome.error, Revert)
        assert len(driver.sim.rc) == before

    def test_deadline(self, driver):
        outcome = driver.call(A, "finalize", (), time=9)
        assert isinstance(outcome.error, ModifierUnsatisfied)

    def test_crowdfund_refunds(self, driver):
        """Target missed: each funder withdraws what they put in"""
        assert driver.call(A, "deposit", (A, 12), paid=T(12), time=1).ok
        assert driver.call(B, "deposit", (B, 10), paid=T(10), time=2).ok
        finalized = driver.call(A, "finalize", (), time=10)
        assert finalized.ok and finalized.transfers == ()
        stolen = driver.call(A, "withdraw", (B,), auths=frozenset({A}))
        assert isinstance(stolen.error, ModifierUnsatisfied)
        assert driver.call(A, "withdraw", (A,), auths=frozenset({A})).transfers == ((A, T(12)),)
        assert driver.call(B, "withdraw", (B,), auths=frozenset({B})).transfers == ((B, T(10)),)
        sim = driver.sim
        assert check_coherence(sim.rs, sim.rc, sim.maps, driver.program)
        assert check_balance_preservation(sim.rs, sim.rc, sim.maps)

    def test_not_a_continuation(self, driver):
        outcome = driver.call(A, "withdraw", (A,), auths=frozenset({A}))
        assert isinstance(outcome.error, ModifierUnsatisfied)


def _crowdfund_calls(rng: random.Random, count: int):
    calls, time = [], 0
    for _ in range(count):
        time += rng.randrange(4)
        who = rng.choice((A, B))
        kind = rng.randrange(3)
        if kind == 0:
            amount = rng.choice((5, 10, 12))
            calls.append((who, "deposit", (who, amount), T(amount), frozenset(), time))
        elif kind == 1:
            calls.append((who, "finalize", (), T(0), frozenset(), time))
        else:
            auths = frozenset({rng.choice((A, B))})
            calls.append((who, "withdraw", (who,), T(0), auths, time))
    return calls


def _auction_calls(rng: random.Random, count: int):
    calls, time = [], 0
    for _ in range(count):
        time += rng.randrange(4)
        if rng.random() < 0.75:
            who, amount = rng.choice((A, B)), rng.choice((3, 6, 9, 14))
            calls.append((who, "place", (who, amount), T(amount), frozenset(), time))
        else:
            calls.append((A, "close", (), T(0), frozenset({rng.choice((A, B))}), time))
    return calls


def _differential(lowered, constructor, calls, seed: int, count: int = 12):
    typed = lowered.typed
    rng = random.Random(seed)
    driver = HellumDriver(lowered, [(A, T(200)), (B, T(200))], seed=seed)
    state = deploy(typed, constructor).state
    assert driver.deploy(A, constructor).ok
    for payer, name, args, paid, auths, time in calls(rng, count):
        outcome = driver.call(payer, name, args, paid, auths, time)
        try:
            result = interp_call(typed, state, name, args, paid, auths, time)
        except (Revert, ModifierUnsatisfied) as e:
            assert not outcome.ok, f"seed {seed}: {name}{args} failed only in the interpreter"
            assert type(outcome.error) is type(e), f"seed {seed}: {name}{args}"
            continue
        assert outcome.ok, f"seed {seed}: {name}{args} failed only on clauses: {outcome.error}"
        assert outcome.transfers == result.transfers
        state = result.state
        if not state.terminated:
            assert outcome.state == clause_state(state, typed.tokens)
    sim = driver.sim
    assert check_coherence(sim.rs, sim.rc, sim.maps, driver.program)
    assert check_balance_preservation(sim.rs, sim.rc, sim.maps)


@pytest.fixture
def auction():
    return lower("auction.hll")


class TestDifferential:
    @pytest.mark.parametrize("seed", range(5))
    def test_crowdfund(self, crowdfund, seed):
        """Random call sequences agree with the interpreter"""
        _differential(crowdfund, (A, 10, 30), _crowdfund_calls, seed)

    @pytest.mark.parametrize("seed", range(5))
    def test_auction(self, auction, seed):
        """Outbid refunds and the owner payout agree with the interpreter"""
        _differential(auction, (A, 10), _auction_calls, seed)

    @pytest.mark.slow
    def test_many_sequences(self, crowdfund, auction):
        for seed in range(500):
            _differential(crowdfund, (A, 10, 30), _crowdfund_calls, seed)
            _differential(auction, (A, 10), _auction_calls, seed)


SPEND_SOURCE = """
contract Spend {
    uint total;

    function take(uint p) input(p:T) {
        p = p - 5;
        total = total + p;
    } next(take)
}
"""


class TestUintParameters:
    def test_reassigned_parameter_stays_unsigned(self):
        """p = p - 5 reverts below 5 on both levels"""
        lowered = gen_clauses(typecheck(parse_contract(SPEND_SOURCE)))
        typed = lowered.typed
        driver = HellumDriver(lowered, [(A, T(20))])
        assert driver.deploy(A, ()).ok
        state = deploy(typed, ()).state
        with pytest.raises(Revert):
            interp_call(typed, state, "take", (3,), paid=T(3))
        outcome = driver.call(A, "take", (3,), paid=T(3))
        assert isinstance(outcome.error, Revert)
        result = interp_call(typed, state, "take", (8,), paid=T(8))
        assert result.state.get("total") == 3
        outcome = driver.call(A, "take", (8,), paid=T(8))
        assert outcome.ok and outcome.state == clause_state(result.state, typed.tokens)


# Benchmark contracts: random call sequences per contract

def _auth(rng: random.Random):
    return frozenset({rng.choice((A, B))})


def _vault_calls(rng: random.Random, count: int):
    calls, time = [], 0
    for _ in range(count):
        time += rng.randrange(5)
        kind = rng.randrange(4)
        if kind == 0:
            who, x = rng.choice((A, B)), rng.choice((3, 7, 10))
            calls.append((who, "deposit", (x,), T(x), frozenset(), time))
        elif kind == 1:
            args = (rng.choice((A, B)), rng.choice((2, 5, 30)), time + rng.choice((0, 5, 8, 20)))
            calls.append((A, "request", args, T(0), _auth(rng), time))
        elif kind == 2:
            calls.append((rng.choice((A, B)), "finalize", (), T(0), frozenset(), time))
        else:
            calls.append((B, "cancel", (), T(0), _auth(rng), time))
    return calls


def _voting_calls(rng: random.Random, count: int):
    calls, time = [], 0
    for _ in range(count):
        time += rng.randrange(3)
        who = rng.choice((A, B))
        kind = rng.randrange(4)
        if kind == 0:
            calls.append((A, "register", (who,), T(0), _auth(rng), time))
        elif kind == 1:
            calls.append((who, "vote", (who, rng.choice((1, 2, 3))), T(1), _auth(rng), time))
        elif kind == 2:
            calls.append((who, "close", (), T(0), frozenset(), time))
        else:
            calls.append((who, "reclaim", (who,), T(0), _auth(rng), time))
    return calls


def _vesting_calls(rng: random.Random, count: int):
    calls, time = [], 0
    for _ in range(count):
        time += rng.randrange(4)
        kind = rng.randrange(3)
        if kind == 0:
            x = rng.choice((2, 3, 5))
            calls.append((A, "fund", (x,), T(x), frozenset(), time))
        else:
            calls.append((B, ("claim", "release")[kind - 1], (), T(0), frozenset(), time))
    return calls


def _escrow_calls(rng: random.Random, count: int):
    calls, time = [], 0
    for _ in range(count):
        time += rng.randrange(5)
        kind = rng.randrange(5)
        if kind == 0:
            calls.append((A, "pay", (), T(8), _auth(rng), time))
        elif kind == 1:
            calls.append((A, "arbitrate", (rng.choice((3, 8, 9)),), T(0), _auth(rng), time))
        elif kind == 4:
            calls.append((A, "reclaim", (), T(0), frozenset(), time))
        else:
            calls.append((B, ("confirm", "refund")[kind - 2], (), T(0), _auth(rng), time))
    return calls


def _king_calls(rng: random.Random, count: int):
    calls, time = [], 0
    for _ in range(count):
        time += rng.randrange(4)
        if rng.random() < 0.8:
            who, x = rng.choice((A, B)), rng.choice((2, 4, 7, 11, 16))
            calls.append((who, "dethrone", (who, x), T(x), frozenset(), time))
        else:
            calls.append((rng.choice((A, B)), "crown", (), T(0), frozenset(), time))
    return calls


def _splitter_calls(rng: random.Random, count: int):
    calls, time = [], 0
    for _ in range(count):
        time += rng.randrange(3)
        who = rng.choice((A, B))
        if rng.random() < 0.5:
            x = rng.choice((4, 5))
            calls.append((who, "pay", (x,), T(x), frozenset(), time))
        else:
            calls.append((who, "release", (who,), T(0), _auth(rng), time))
    return calls


BENCHMARKS = {
    "vault.hll": ((A, B, 5), _vault_calls),
    "voting.hll": ((A, 12), _voting_calls),
    "vesting.hll": ((B, 6, 15, 4), _vesting_calls),
    "escrow.hll": ((A, B, A, 8, 20), _escrow_calls),
    "king.hll": ((1, 15), _king_calls),
    "splitter.hll": ((A, B, 2, 3), _splitter_calls),
}


class TestBenchmarks:
    @pytest.mark.parametrize("name", sorted(BENCHMARKS))
    def test_pipeline(self, name):
        """Each contract typechecks, normalizes with preserved balances and compiles to one script"""
        typed = typecheck(parse_contract(read_contract(name), name))
        normal_forms = normalize_contract(typed)
        assert [nf.name for nf in normal_forms] == ["constructor"] + [f.name for f in typed.contract.callable]
        assert all(prove_balance(nf) for nf in normal_forms)
        lowered = gen_clauses(typed)
        unit = compile_unit(lowered.root, lowered.program)
        assert {run_name(f.name) for f in typed.contract.callable} <= set(unit.reachable)

    @pytest.mark.parametrize("seed", range(3))
    @pytest.mark.parametrize("name", sorted(BENCHMARKS))
    def test_differential(self, name, seed):
        """Random call sequences agree with the interpreter"""
        constructor, calls = BENCHMARKS[name]
        _differential(lower(name), constructor, calls, seed)

    @pytest.mark.slow
    @pytest.mark.parametrize("name", sorted(BENCHMARKS))
    def test_many_sequences(self, name):
        constructor, calls = BENCHMARKS[name]
        lowered = lower(name)
        for seed in range(100):
            _differential(lowered, constructor, calls, seed, count=20)
