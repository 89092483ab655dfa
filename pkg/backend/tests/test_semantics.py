"""
Clause instantiation and the symbolic transition rules
"""

import pytest

from illum.core.errors import (
    ArityMismatch, GuardFalse, InvalidAdvertisement, MissingAuthorization, NegativeFunding,
    RuleNotEnabled, StarPresent, TypeMismatch,
)
from illum.models.actions import (
    Adv, AuthAct, AuthDivideAct, AuthDonateAct, AuthIn, AuthJoinAct, Call, Delay, Divide, Donate,
    Init, Join, Send,
)
from illum.models.configuration import Configuration, ContinueAdv, Deposit, InitAdv
from illum.models.values import NULL, STAR, Participant, TokenBag, ZERO
from illum.services.clauses import branch_matches, fill_branch, instantiate
from illum.services.illum_syntax import parse_program
from illum.services import semantics
from illum.services.semantics import enabled_actions, replay, step

from tests.conftest import A, B, C, wait_actions, wait_start

T = TokenBag.single


class TestInstantiate:
    def test_funding_and_closed_process(self, wait_program):
        """X(0; 1) is funded with 1:T and its process mentions no parameter"""
        inst = instantiate(wait_program["X"], (0,), (1,))
        assert inst.funding == T(1)
        send = inst.process[0].terminal.items[0]
        assert send.amount.value == 1

    def test_guard_false(self, wait_program):
        """X(5; 1) violates b > a"""
        with pytest.raises(GuardFalse):
            instantiate(wait_program["X"], (5,), (1,))

    def test_star_is_not_a_value(self, wait_program):
        """An unfilled placeholder cannot instantiate a clause"""
        with pytest.raises(StarPresent):
            instantiate(wait_program["X"], (0,), (STAR,))

    def test_arity_and_types(self, auction_program):
        """Wrong argument counts and types are rejected"""
        with pytest.raises(ArityMismatch):
            instantiate(auction_program["Bid"], (0,), (5,))
        with pytest.raises(TypeMismatch):
            instantiate(auction_program["Bid"], (0,), (5, 7))

    def test_negative_funding(self):
        """Funding amounts must be non-negative"""
        program = parse_program("clause X(v;) = {v:T} send(v:T -> @A)")
        with pytest.raises(NegativeFunding):
            instantiate(program["X"], (-1,), ())

    def test_branch_matching(self, wait_program):
        """A filled branch matches its declaration, a partially filled one does not"""
        declared = wait_program["X"].process[1]
        assert branch_matches(fill_branch(declared, [(3,)]), declared)
        assert not branch_matches(declared, declared)


class TestWaitRun:
    def test_final_deposits(self, wait_program):
        """B keeps z2 and A receives the 3:T sent by x2"""
        _, g = wait_actions(wait_program)
        assert [(d.name, d.owner, d.value) for d in g.deposits] == [("z2", B, T(3)), ("x3", A, T(3))]
        assert not g.contracts
        assert g.time == 10
        assert g.burned == ZERO

    def test_value_is_preserved(self, wait_program):
        """No step changes the total value"""
        _, g = wait_actions(wait_program)
        assert g.total_value() + g.burned == wait_start().total_value()

    def test_fresh_names(self, wait_program):
        """Each consuming step takes the next x name"""
        actions, _ = wait_actions(wait_program)
        run = replay(wait_start(), actions, wait_program)
        assert run.configurations[2].contracts[0].name == "x1"
        assert run.configurations[6].contracts[0].name == "x2"

    def test_relative_timelock(self, wait_program):
        """The send branch waits 10 units after the contract became active"""
        actions, _ = wait_actions(wait_program)
        run = replay(wait_start(), actions[:7], wait_program)
        early = ContinueAdv(run.final.contract("x2").process[0], (), None, "x2", 1)
        with pytest.raises(InvalidAdvertisement) as info:
            step(run.final, Adv(early), wait_program)
        assert info.value.cause.code == "TimelockNotExpired"

    def test_call_needs_action_authorization(self, wait_program):
        """Calling without B's auth-act names the missing authorization"""
        actions, _ = wait_actions(wait_program)
        g = replay(wait_start(), actions[:4], wait_program).final
        g = step(g, AuthIn(B, "z1", actions[3].adv), wait_program)
        with pytest.raises(MissingAuthorization):
            step(g, Call(actions[3].adv), wait_program)


class TestAdvertisements:
    def bid(self, auction_program):
        g = Configuration.initial([Deposit("z1", A, T(5))])
        init = InitAdv("Bid", (0,), (5, A), ("z1",))
        for act in (Adv(init), AuthIn(A, "z1", init), Init(init)):
            g = step(g, act, auction_program)
        return g

    def test_absolute_timelock(self, auction_program):
        """The owner's branch is not valid before time 1000"""
        g = self.bid(auction_program)
        g = step(g, Delay(999), auction_program)
        adv = ContinueAdv(g.contract("x1").process[1], (), None, "x1", 2)
        with pytest.raises(InvalidAdvertisement) as info:
            step(g, Adv(adv), auction_program)
        assert info.value.cause.code == "TimelockNotExpired"
        g = step(g, Delay(1), auction_program)
        assert adv in step(g, Adv(adv), auction_program).advertisements

    def test_insufficient_funds(self, auction_program):
        """A deposit that does not cover the funding makes the advertisement invalid"""
        g = Configuration.initial([Deposit("z1", A, T(4))])
        with pytest.raises(InvalidAdvertisement) as info:
            step(g, Adv(InitAdv("Bid", (0,), (5, A), ("z1",))), auction_program)
        assert info.value.cause.code == "InsufficientFunds"

    def test_guard_in_advertisement(self, auction_program):
        """A Null bidder fails the guard of Bid"""
        g = Configuration.initial([Deposit("z1", A, T(5))])
        with pytest.raises(InvalidAdvertisement) as info:
            step(g, Adv(InitAdv("Bid", (0,), (5, NULL), ("z1",))), auction_program)
        assert info.value.cause.code == "GuardFalse"

    def test_missing_deposit(self, auction_program):
        """Deposits must be in the configuration"""
        g = Configuration.initial([Deposit("z1", A, T(5))])
        with pytest.raises(InvalidAdvertisement) as info:
            step(g, Adv(InitAdv("Bid", (0,), (5, A), ("z9",))), auction_program)
        assert info.value.cause.code == "MissingDeposit"

    def test_auth_in_by_non_owner(self, auction_program):
        """Only the owner of a deposit can commit it"""
        g = Configuration.initial([Deposit("z1", A, T(5))])
        init = InitAdv("Bid", (0,), (5, A), ("z1",))
        g = step(g, Adv(init), auction_program)
        with pytest.raises(RuleNotEnabled):
            step(g, AuthIn(B, "z1", init), auction_program)

    def test_advertisement_only_once(self, auction_program):
        """The same advertisement cannot be added twice"""
        g = Configuration.initial([Deposit("z1", A, T(5))])
        init = InitAdv("Bid", (0,), (5, A), ("z1",))
        g = step(g, Adv(init), auction_program)
        with pytest.raises(RuleNotEnabled):
            step(g, Adv(init), auction_program)


class TestDepositRules:
    def test_join(self, wait_program):
        """Two authorizations join deposits of one owner"""
        g = wait_start()
        for i in (1, 2):
            g = step(g, AuthJoinAct(B, "z1", "z2", i), wait_program)
        g = step(g, Join("z1", "z2"), wait_program)
        assert [(d.name, d.owner, d.value) for d in g.deposits] == [("z3", C, T(1)), ("x1", B, T(5))]

    def test_join_needs_both_authorizations(self, wait_program):
        """One authorization is not enough"""
        g = step(wait_start(), AuthJoinAct(B, "z1", "z2", 1), wait_program)
        with pytest.raises(MissingAuthorization):
            step(g, Join("z1", "z2"), wait_program)

    def test_divide(self, wait_program):
        """A deposit splits into two of the same owner"""
        g = step(wait_start(), AuthDivideAct(B, "z2", T(1), T(2)), wait_program)
        g = step(g, Divide("z2", T(1), T(2)), wait_program)
        assert [d.value for d in g.deposits if d.owner == B] == [T(2), T(1), T(2)]

    def test_divide_must_add_up(self, wait_program):
        """The two parts must sum to the deposit"""
        with pytest.raises(RuleNotEnabled):
            step(wait_start(), AuthDivideAct(B, "z2", T(1), T(1)), wait_program)

    def test_donate(self, wait_program):
        """A donation moves a deposit to another participant"""
        g = step(wait_start(), AuthDonateAct(C, "z3", A), wait_program)
        g = step(g, Donate("z3", A), wait_program)
        assert g.deposits[-1].owner == A
        assert g.deposits[-1].value == T(1)

    def test_delay_must_be_positive(self, wait_program):
        """Zero delays are not steps"""
        with pytest.raises(RuleNotEnabled):
            step(wait_start(), Delay(0), wait_program)


class TestEnabledActions:
    def test_every_enabled_action_steps(self, wait_program):
        """enabled_actions lists only actions that apply"""
        actions, _ = wait_actions(wait_program)
        g = replay(wait_start(), actions[:4], wait_program).final
        for act in enabled_actions(g, wait_program):
            step(g, act, wait_program)

    def test_pending_authorizations_are_offered(self, wait_program):
        """With the bump advertised, B can authorize it"""
        actions, _ = wait_actions(wait_program)
        g = replay(wait_start(), actions[:4], wait_program).final
        offered = enabled_actions(g, wait_program)
        assert AuthAct(B, actions[3].adv) in offered
        assert AuthIn(B, "z1", actions[3].adv) in offered
        assert Delay(1) in offered

    def test_failing_candidate_is_skipped(self, wait_program, monkeypatch):
        """An evaluation error while trying one candidate leaves the others listed"""
        actions, _ = wait_actions(wait_program)
        g = replay(wait_start(), actions[:4], wait_program).final
        real_step = semantics._step

        def flaky(g, act, program):
            if isinstance(act, AuthAct):
                raise TypeMismatch("versig on a participant")
            return real_step(g, act, program)

        monkeypatch.setattr(semantics, "_step", flaky)
        offered = enabled_actions(g, wait_program)
        assert not any(isinstance(act, AuthAct) for act in offered)
        assert AuthIn(B, "z1", actions[3].adv) in offered
