"""
Shared fixtures: bundled contracts, keys and a hand-driven Wait run
"""

from pathlib import Path

import pytest

from illum.core.crypto import KeyManager
from illum.models.actions import Adv, AuthAct, AuthIn, Call, Delay, Init, Send
from illum.models.configuration import Configuration, ContinueAdv, Deposit, InitAdv
from illum.models.values import Participant, TokenBag
from illum.services.clauses import check_program, fill_branch
from illum.services.hellum_codegen import gen_clauses
from illum.services.hellum_parser import parse_contract
from illum.services.hellum_typecheck import typecheck
from illum.services.illum_syntax import parse_program
from illum.services.semantics import step

DATA_DIR = Path(__file__).resolve().parents[2] / "data"

A, B, C = Participant("A"), Participant("B"), Participant("C")


def read_contract(name: str) -> str:
    return (DATA_DIR / "contracts" / name).read_text(encoding="utf-8")


def load_program(name: str):
    return check_program(parse_program(read_contract(name), name))


def lower(name: str):
    return gen_clauses(typecheck(parse_contract(read_contract(name), name)))


@pytest.fixture
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture
def keys() -> KeyManager:
    return KeyManager("tests")


@pytest.fixture
def wait_program():
    return load_program("wait.ill")


@pytest.fixture
def auction_program():
    return load_program("auction.ill")


@pytest.fixture
def crowdfund():
    return lower("crowdfund.hll")


@pytest.fixture
def wait_deposits():
    """B holds z1 (2:T) and z2 (3:T), C holds z3 (1:T)"""
    return [(B, TokenBag.single(2)), (B, TokenBag.single(3)), (C, TokenBag.single(1))]


def wait_start() -> Configuration:
    T = TokenBag.single
    return Configuration.initial([Deposit("z1", B, T(2)), Deposit("z2", B, T(3)), Deposit("z3", C, T(1))])


def wait_actions(program):
    """The worked Wait run; returns the actions and the final configuration"""
    g = wait_start()
    actions = []

    def do(act):
        nonlocal g
        g = step(g, act, program)
        actions.append(act)

    init = InitAdv("X", (0,), (1,), ("z3",))
    do(Adv(init))
    do(AuthIn(C, "z3", init))
    do(Init(init))
    branch = fill_branch(g.contract("x1").process[1], [(3,)])
    bump = ContinueAdv(branch, ("z1",), None, "x1", 2)
    do(Adv(bump))
    do(AuthAct(B, bump))
    do(AuthIn(B, "z1", bump))
    do(Call(bump))
    do(Delay(10))
    payout = ContinueAdv(g.contract("x2").process[0], (), None, "x2", 1)
    do(Adv(payout))
    do(Send(payout))
    return actions, g
