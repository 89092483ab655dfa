"""
HeLLUM: parsing, typing, the reference interpreter, normal forms and lowering
"""

from dataclasses import replace

import pytest

from illum.core.errors import (
    AfterUsesParameter, HellumTypeError, ModifierUnsatisfied, NextTargetsConstructor, ParseError,
    Revert, ViewHasEffect,
)
from illum.models.hellum_ast import BalancePre, Function, SimAssign
from illum.models.values import TokenBag
from illum.services.hellum_codegen import deployment_arguments, gen_clauses
from illum.services.hellum_interp import deploy, interp_call, state_arguments
from illum.services.hellum_normalize import chain_form, normalize_function, prove_balance
from illum.services.hellum_parser import (
    parse_body, parse_contract, print_contract, print_expr, print_sim_assign, print_stmt,
)
from illum.services.hellum_typecheck import typecheck

from tests.conftest import A, B, lower, read_contract

T = TokenBag.single

FOLD_SOURCE = """
contract Test {
    int x;
    int y;
    address a;

    function f(int z) {
        y = x + balance(T);
        x = z;
        a.transfer(x:T);
        a.transfer(y:T);
        y = balance(T) + z;
    }
}
"""

VIEW_SOURCE = """
contract Doubler {
    int x;

    function bump(int v) {
        x = twice(v);
    } next(bump)

    function twice(int v) view returns (int) {
        return v + v;
    }
}
"""


def chain_of(body: str):
    return chain_form(Function("f", (), (), parse_body(body)))


def typed_of(source: str):
    return typecheck(parse_contract(source))


class TestParse:
    @pytest.mark.parametrize("name", [
        "auction.hll", "crowdfund.hll", "test.hll", "vault.hll", "voting.hll", "vesting.hll",
        "escrow.hll", "king.hll", "splitter.hll",
    ])
    def test_print_round_trip(self, name):
        """Printing then parsing a bundled contract gives it back"""
        contract = parse_contract(read_contract(name), name)
        assert parse_contract(print_contract(contract)) == contract

    def test_modifiers_and_next(self):
        contract = parse_contract(read_contract("crowdfund.hll"))
        finalize = contract.function("finalize")
        assert [print_expr(t) for t in finalize.afters] == ["deadline"]
        assert finalize.next == ("withdraw",)
        deposit = contract.function("deposit")
        assert [print_expr(m.amount) for m in deposit.inputs] == ["x"]

    def test_default_constructor(self):
        """A contract without a constructor gets an empty one"""
        contract = parse_contract(FOLD_SOURCE)
        assert contract.constructor.params == ()
        assert contract.constructor.body == ()

    def test_error_position(self):
        with pytest.raises(ParseError) as info:
            parse_contract("contract C {\n    int x\n}")
        assert info.value.line == 3

    def test_unknown_type(self):
        with pytest.raises(ParseError):
            parse_contract("contract C { float x; }")


class TestTypecheck:
    def test_tokens_collected(self):
        assert typed_of(read_contract("crowdfund.hll")).tokens == ("T",)

    def test_after_reads_parameter(self):
        """after() may only read state"""
        with pytest.raises(AfterUsesParameter):
            typed_of("contract C { function f(int t) after(t) { } }")

    def test_next_names_constructor(self):
        with pytest.raises(NextTargetsConstructor):
            typed_of("contract C { function f() { } next(constructor) }")

    def test_view_with_effect(self):
        """A view is a single return without modifiers"""
        with pytest.raises(ViewHasEffect):
            typed_of("contract C { int x; function v() view returns (int) { x = 1; return x; } }")
        with pytest.raises(ViewHasEffect):
            typed_of("contract C { address a; function v() auth(a) view returns (int) { return 1; } }")

    def test_type_errors(self):
        with pytest.raises(HellumTypeError):
            typed_of("contract C { int x; function f() { x = true; } }")
        with pytest.raises(HellumTypeError):
            typed_of("contract C { function f() { y = 1; } }")
        with pytest.raises(HellumTypeError):
            typed_of("contract C { int bal_T; }")

    def test_map_only_as_state(self):
        with pytest.raises(HellumTypeError):
            typed_of("contract C { function f(mapping(int => int) m) { } }")


class TestInterpreter:
    @pytest.fixture
    def typed(self):
        return typed_of(read_contract("crowdfund.hll"))

    @pytest.fixture
    def funded(self, typed):
        state = deploy(typed, (A, 10, 30)).state
        state = interp_call(typed, state, "deposit", (A, 12), paid=T(12), time=1).state
        return interp_call(typed, state, "deposit", (B, 10), paid=T(10), time=2).state

    def test_small_deposit_reverts(self, typed):
        state = deploy(typed, (A, 10, 30)).state
        with pytest.raises(Revert):
            interp_call(typed, state, "deposit", (B, 5), paid=T(5))

    def test_missing_payment(self, typed):
        state = deploy(typed, (A, 10, 30)).state
        with pytest.raises(ModifierUnsatisfied):
            interp_call(typed, state, "deposit", (B, 12), paid=T(11))

    def test_finalize_waits_for_deadline(self, typed, funded):
        with pytest.raises(ModifierUnsatisfied):
            interp_call(typed, funded, "finalize", (), time=9)

    def test_target_missed(self, typed, funded):
        """22 < 30: finalize pays nothing and opens withdrawals"""
        result = interp_call(typed, funded, "finalize", (), time=10)
        assert result.transfers == ()
        assert result.state.balances == T(22)
        assert result.state.continuations == ("withdraw",)

    def test_withdrawals(self, typed, funded):
        state = interp_call(typed, funded, "finalize", (), time=10).state
        with pytest.raises(ModifierUnsatisfied):
            interp_call(typed, state, "withdraw", (B,), auths=frozenset({A}))
        first = interp_call(typed, state, "withdraw", (A,), auths=frozenset({A}))
        assert first.transfers == ((A, T(12)),)
        second = interp_call(typed, first.state, "withdraw", (B,), auths=frozenset({B}))
        assert second.transfers == ((B, T(10)),)
        assert second.state.balances == TokenBag()

    def test_not_a_continuation(self, typed, funded):
        """deposit is closed once finalize has run"""
        state = interp_call(typed, funded, "finalize", (), time=10).state
        with pytest.raises(ModifierUnsatisfied):
            interp_call(typed, state, "deposit", (B, 10), paid=T(10))

    def test_views(self):
        typed = typed_of(VIEW_SOURCE)
        state = deploy(typed, ()).state
        assert interp_call(typed, state, "bump", (4,)).state.get("x") == 8

    def test_state_arguments(self, typed, funded):
        """Booleans become integers and maps keep their entries"""
        args = state_arguments(funded)
        assert args[:3] == (A, 10, 30)
        assert args[3].get(A, 0) == 12


class TestNormalForms:
    def test_requirements_hoisted(self):
        """A requirement after an assignment reads the assigned value"""
        chain = chain_of("x = x + y; require x < 500;")
        assert print_expr(chain.require) == "x+y<500"
        assert [print_stmt(s)[0] for s in chain.branches[0].commands] == ["x = x+y;"]

    def test_conditionals_flattened(self):
        chain = chain_of("if (x <= 9) { if (x > 5) { } else { } } else { }")
        guards = [None if b.guard is None else print_expr(b.guard) for b in chain.branches]
        assert guards == ["x<=9 && x>5", "x<=9", None]

    def test_requirements_in_arms(self):
        """Each arm's requirement is guarded by the arms before it"""
        chain = chain_of(
            "if (x < 2) { require x > 0; } else if (x < 4) { require x > 2; } else { require x < 8; }"
        )
        assert print_expr(chain.require) == (
            "((x<2 && x>0) || (x>=2 && (x<4 && x>2))) || ((x>=2 && x>=4) && x<8)"
        )

    def test_folding(self):
        typed = typed_of(FOLD_SOURCE)
        nf = normalize_function(typed.contract.function("f"), typed)
        branch = nf.branches[0]
        assert print_sim_assign(branch.assignment) == (
            "x,y,a,bal_T_fin = z,((balance_pre(T)-z)-(x+balance_pre(T)))+z,a,"
            "(balance_pre(T)-z)-(x+balance_pre(T))"
        )
        assert [print_stmt(t)[0] for t in branch.transfers] == [
            "a.transfer(z:T);", "a.transfer(x+balance_pre(T):T);",
        ]

    def test_balance_proof(self):
        """z3 accepts the folded balance and rejects a tampered one"""
        typed = typed_of(FOLD_SOURCE)
        nf = normalize_function(typed.contract.function("f"), typed)
        assert prove_balance(nf)
        branch = nf.branches[0]
        values = branch.assignment.values[:-1] + (BalancePre("T"),)
        forged = replace(branch, assignment=SimAssign(branch.assignment.targets, values))
        assert not prove_balance(replace(nf, branches=(forged,)))


class TestLowering:
    def test_clause_names(self):
        """g has an empty next() so it gets no g_next"""
        lowered = lower("test.hll")
        names = [c.name for c in lowered.program.clauses]
        assert names == ["constructor_run", "constructor_next", "f_run", "f_next", "g_run", "Check", "Pay"]
        assert lowered.root == "constructor_run"

    def test_run_clause_shape(self):
        lowered = lower("test.hll")
        f_run = lowered.program["f_run"]
        assert [p.name for p in f_run.internal] == ["x", "y", "a", "bal_T"]
        assert [p.name for p in f_run.external] == ["z"]
        assert len(f_run.process) == 2

    def test_next_branches(self):
        """f_next offers f and g; g carries no after decoration here"""
        f_next = lower("test.hll").program["f_next"]
        assert [b.terminal.calls[0].name for b in f_next.process] == ["f_run", "g_run"]

    def test_deployment_arguments(self, crowdfund):
        """Zero state followed by zero balances"""
        args = deployment_arguments(crowdfund)
        assert len(args) == len(crowdfund.program["constructor_run"].internal)
        assert args[-1] == 0

    def test_views_are_inlined(self):
        lowered = gen_clauses(typed_of(VIEW_SOURCE))
        names = [c.name for c in lowered.program.clauses]
        assert "bump_run" in names
        assert not any(n.startswith("twice") for n in names)

    def test_multiple_tokens(self):
        """One Pay clause per token"""
        source = "contract Two { address a; function f() { a.transfer(balance(T):T); a.transfer(balance(U):U); } }"
        names = [c.name for c in gen_clauses(typed_of(source)).program.clauses]
        assert "Pay_T" in names and "Pay_U" in names
