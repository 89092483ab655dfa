"""
Scenario replay.

A scenario names its participants with their initial deposits, an optional contract file
and a list of steps. HeLLUM contracts are driven call by call through the lowered clauses,
with the reference interpreter run alongside; a call accepted by one and rejected by the
other stops the replay. Clause files are driven by raw symbolic actions or by a seeded
honest random walk. Every replay extends one Lockstep, so both runs come out together.
"""

import json
import logging
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from pydantic import ValidationError

from illum.core.config import settings
from illum.core.crypto import KeyManager
from illum.core.errors import IllumError, RuleNotEnabled, ScenarioError
from illum.models.actions import (
    Adv, AuthAct, AuthDivideAct, AuthDonateAct, AuthIn, AuthJoinAct, Call, Delay, Destroy,
    Divide, Donate, Init, Join, Msg, Send, SymbolicAction,
)
from illum.models.configuration import ContinueAdv, DestroyAdv, Incomplete, InitAdv
from illum.models.illum_ast import Program
from illum.models.runs import CoherenceMaps, ComputationalRun, SymbolicRun
from illum.models.scenario import Scenario, Step
from illum.models.values import NULL, Participant, TokenBag
from illum.services.clauses import check_program, fill_branch
from illum.services.hellum_codegen import LoweredContract, gen_clauses
from illum.services.hellum_driver import HellumDriver
from illum.services.hellum_interp import HllState, deploy, interp_call, state_arguments
from illum.services.hellum_parser import parse_contract
from illum.services.hellum_typecheck import typecheck
from illum.services.illum_syntax import parse_program
from illum.services.simulator import Lockstep, random_walk

logger = logging.getLogger(__name__)

Contract = Union[LoweredContract, Program]


def load_scenario(path) -> Scenario:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
        return Scenario.model_validate(data)
    except OSError as e:
        raise ScenarioError(f"cannot read {path}: {e.strerror}", code="MissingScenario")
    except (json.JSONDecodeError, ValidationError) as e:
        logger.error(f"❌ Invalid scenario {path}: {e}")
        raise ScenarioError(f"invalid scenario {path}: {e}", code="MalformedScenario")


def load_contract(path) -> Contract:
    """A .hll file lowered to clauses, or a .ill clause table"""
    path = Path(path)
    try:
        source = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ScenarioError(f"cannot read {path}: {e.strerror}", code="MissingContract")
    if path.suffix == ".hll":
        return gen_clauses(typecheck(parse_contract(source, str(path))))
    if path.suffix == ".ill":
        return check_program(parse_program(source, str(path)))
    raise ScenarioError(f"unknown contract format {path.suffix}", code="UnknownFormat")


# Values written in scenario files

def scenario_value(value: Any, strings: bool = False):
    """``@A`` is a participant, ``Null`` the null one, ``0x..`` bytes; other strings only for HeLLUM"""
    if isinstance(value, (bool, int)):
        return value
    if isinstance(value, str):
        if value == "Null":
            return NULL
        if value.startswith("@"):
            return Participant(value[1:])
        if value.startswith("0x"):
            return bytes.fromhex(value[2:])
        if strings:
            return value.encode("utf-8")
    raise ScenarioError(f"cannot read value {value!r}", code="BadArguments")


def _values(items: Sequence, strings: bool = False) -> Tuple:
    return tuple(scenario_value(v, strings) for v in items)


def initial_deposits(scenario: Scenario) -> List[Tuple[Participant, TokenBag]]:
    return [
        (Participant(p.name), TokenBag.of(bag))
        for p in scenario.participants
        for bag in p.deposits
    ]


@dataclass
class StepReport:
    index: int
    kind: str
    ok: bool
    detail: str = ""
    error: Optional[str] = None

    def to_dict(self) -> Dict[str, object]:
        return {"step": self.index, "kind": self.kind, "ok": self.ok, "detail": self.detail, "error": self.error}


@dataclass
class ScenarioResult:
    scenario: Scenario
    seed: int
    program: Program
    sim: Lockstep
    reports: List[StepReport] = field(default_factory=list)
    state: Optional[HllState] = None

    @property
    def symbolic(self) -> SymbolicRun:
        return self.sim.rs

    @property
    def computational(self) -> ComputationalRun:
        return self.sim.rc

    @property
    def maps(self) -> CoherenceMaps:
        return self.sim.maps

    def summary(self) -> Dict[str, object]:
        g = self.sim.config
        return {
            "scenario": self.scenario.name,
            "seed": self.seed,
            "steps": [r.to_dict() for r in self.reports],
            "time": g.time,
            "deposits": [{"name": d.name, "owner": d.owner.name, "value": d.value.to_dict()} for d in g.deposits],
            "contracts": [{"name": c.name, "clause": c.clause, "balance": c.balance.to_dict()} for c in g.contracts],
            "symbolic_actions": len(self.sim.rs),
            "computational_labels": len(self.sim.rc),
        }


class _ActionReader:
    """Raw symbolic actions written as ``{"action": ..., "fields": {...}}``.

    Advertisements get an ``id`` so later steps can authorize and fire them.
    """

    def __init__(self, program: Program):
        self.program = program
        self.advs: Dict[str, object] = {}

    def _adv(self, fields: Dict[str, Any]):
        key = fields.get("adv")
        if key not in self.advs:
            raise ScenarioError(f"unknown advertisement {key!r}", code="UnknownAdvertisement")
        return self.advs[key]

    @staticmethod
    def _bag(fields: Dict[str, Any], name: str) -> TokenBag:
        return TokenBag.of(fields.get(name, {}))

    def _remember(self, fields: Dict[str, Any], adv) -> Adv:
        self.advs[fields.get("id", f"adv{len(self.advs)}")] = adv
        return Adv(adv)

    def read(self, action: str, fields: Dict[str, Any], sim: Lockstep) -> SymbolicAction:
        deposits = tuple(fields.get("deposits", ()))
        nonce = fields.get("nonce", 0)
        if action == "adv-init":
            adv = InitAdv(
                fields["clause"], _values(fields.get("internal", ())), _values(fields.get("external", ())),
                deposits, None, nonce,
            )
            return self._remember(fields, adv)
        if action == "adv-continue":
            contract = sim.config.contract(fields["contract"])
            if contract is None:
                raise ScenarioError(f"no active contract {fields['contract']}", code="UnknownContract")
            index = fields.get("branch", 1)
            externals = [_values(e) for e in fields.get("externals", ())]
            branch = fill_branch(contract.process[index - 1], externals)
            return self._remember(fields, ContinueAdv(branch, deposits, None, contract.name, index, nonce))
        if action == "adv-destroy":
            return self._remember(fields, DestroyAdv(deposits, None, nonce))
        simple = {"init": Init, "call": Call, "send": Send, "destroy": Destroy}
        if action in simple:
            return simple[action](self._adv(fields))
        if action == "msg":
            return Msg(Incomplete(self._adv(fields)))
        if action == "auth-in":
            return AuthIn(Participant(fields["participant"]), fields["deposit"], self._adv(fields))
        if action == "auth-act":
            return AuthAct(Participant(fields["participant"]), self._adv(fields))
        if action == "auth-join":
            return AuthJoinAct(Participant(fields["participant"]), fields["first"], fields["second"], fields.get("index", 1))
        if action == "join":
            return Join(fields["first"], fields["second"])
        if action == "auth-divide":
            return AuthDivideAct(
                Participant(fields["participant"]), fields["deposit"],
                self._bag(fields, "left"), self._bag(fields, "right"),
            )
        if action == "divide":
            return Divide(fields["deposit"], self._bag(fields, "left"), self._bag(fields, "right"))
        if action == "auth-donate":
            return AuthDonateAct(Participant(fields["participant"]), fields["deposit"], Participant(fields["to"]))
        if action == "donate":
            return Donate(fields["deposit"], Participant(fields["to"]))
        raise ScenarioError(f"unknown action {action!r}", code="UnknownAction")


class ScenarioRunner:
    def __init__(self, scenario: Scenario, contract: Optional[Contract], seed: int):
        self.scenario = scenario
        self.seed = seed
        self.rng = random.Random(seed)
        deposits = initial_deposits(scenario)
        participants = tuple(Participant(p.name) for p in scenario.participants)
        self.driver: Optional[HellumDriver] = None
        self.state: Optional[HllState] = None
        if isinstance(contract, LoweredContract):
            self.driver = HellumDriver(contract, deposits, participants, seed)
            self.sim = self.driver.sim
            self.program = contract.program
        else:
            self.program = contract if contract is not None else Program(())
            keys = KeyManager(f"{settings.KEY_SEED}:{seed}")
            self.sim = Lockstep(self.program, keys, participants).start(deposits, seed)
        self.reader = _ActionReader(self.program)
        self.reports: List[StepReport] = []

    def run(self) -> ScenarioResult:
        for index, step in enumerate(self.scenario.steps):
            self.reports.append(self._step(index, step))
        logger.info(f"✅ Scenario {self.scenario.name} replayed: {len(self.sim.rs)} symbolic actions")
        return ScenarioResult(self.scenario, self.seed, self.program, self.sim, self.reports, self.state)

    def _step(self, index: int, step: Step) -> StepReport:
        if step.kind == "delay":
            self.sim.perform(Delay(step.delta))
            return StepReport(index, "delay", True, f"+{step.delta}")
        if step.kind in ("deploy", "call"):
            return self._hellum(index, step)
        if self.driver is not None:
            raise ScenarioError(f"step {index}: {step.kind} steps need a clause file", code="WrongContractKind", step=index)
        if step.kind == "random":
            before = len(self.sim.rs)
            random_walk(self.sim, self.rng, step.steps)
            return StepReport(index, "random", True, f"{len(self.sim.rs) - before} actions")
        act = self.reader.read(step.action, step.fields, self.sim)
        try:
            self.sim.perform(act)
        except RuleNotEnabled as e:
            logger.error(f"❌ Step {index} ({act.label}) is not enabled: {e.message}")
            raise ScenarioError(
                f"step {index}: {act.label} is not enabled: {e.message}",
                code="StepFailed", step=index, rule=e.rule, premise=e.premise,
            )
        return StepReport(index, act.label, True)

    def _hellum(self, index: int, step: Step) -> StepReport:
        if self.driver is None:
            raise ScenarioError(f"step {index}: {step.kind} needs a HeLLUM contract", code="WrongContractKind", step=index)
        typed = self.driver.lowered.typed
        caller = Participant(step.caller)
        args = _values(step.args, strings=True)
        paid = TokenBag.of(step.paid)
        auths = frozenset(Participant(a) for a in step.auths)
        self.driver.advance(step.time if step.time is not None else self.sim.config.time)
        time = self.sim.config.time

        expected_error: Optional[IllumError] = None
        result = None
        try:
            if step.kind == "deploy":
                result = deploy(typed, args, paid, auths, time)
            else:
                if self.state is None:
                    raise ScenarioError(f"step {index}: call before deploy", code="NotDeployed", step=index)
                result = interp_call(typed, self.state, step.function, args, paid, auths, time)
        except ScenarioError:
            raise
        except IllumError as e:
            expected_error = e

        if step.kind == "deploy":
            outcome = self.driver.deploy(caller, args, paid, auths)
            label = "deploy"
        else:
            outcome = self.driver.call(caller, step.function, args, paid, auths)
            label = f"call {step.function}"

        if outcome.ok != (expected_error is None):
            reference = "accepts" if expected_error is None else f"rejects ({expected_error.code})"
            clauses = "accept" if outcome.ok else f"reject ({outcome.error.code})"
            raise ScenarioError(
                f"step {index}: the interpreter {reference} {label}, the clauses {clauses}",
                code="Divergence", step=index,
            )
        if outcome.ok:
            expected = state_arguments(result.state) + tuple(result.state.balances.amount(t) for t in typed.tokens)
            if tuple(outcome.state) != expected and not outcome.terminated:
                raise ScenarioError(f"step {index}: {label} stores different states", code="Divergence", step=index)
            self.state = result.state
            if step.expect:
                raise ScenarioError(f"step {index}: {label} succeeded, expected {step.expect}", code="UnexpectedSuccess", step=index)
            return StepReport(index, label, True, f"{len(outcome.transfers)} transfers")
        if step.expect and step.expect != outcome.error.code:
            raise ScenarioError(
                f"step {index}: {label} failed with {outcome.error.code}, expected {step.expect}",
                code="UnexpectedError", step=index,
            )
        if not step.expect:
            raise ScenarioError(
                f"step {index}: {label} failed: {outcome.error.code}: {outcome.error.message}",
                code="StepFailed", step=index, cause=outcome.error.code,
            )
        return StepReport(index, label, False, outcome.error.message, outcome.error.code)


def run_scenario(scenario: Scenario, seed: int, base_dir=None) -> ScenarioResult:
    """Replay ``scenario``; equal (scenario, seed) pairs give equal runs"""
    contract = None
    if scenario.contract:
        path = Path(scenario.contract)
        if not path.is_absolute() and base_dir is not None:
            path = Path(base_dir) / path
        contract = load_contract(path)
    return ScenarioRunner(scenario, contract, seed).run()
