"""
Executes HeLLUM deployments and calls on the lowered clauses.

Each call is planned on the symbolic level first: the payer's deposit is divided to the
exact input, the waiting ``g_next`` contract continues into ``f_run``, ``f_run`` takes the
one arm whose ``Check`` holds, and the ``Check`` and ``Pay`` contracts are fired. Only a
plan that goes through is replayed on a Lockstep, so a failing call emits no labels.
"""

import logging
from dataclasses import dataclass
from typing import FrozenSet, List, Optional, Sequence, Tuple

from illum.core.config import settings
from illum.core.crypto import KeyManager
from illum.core.errors import (
    EvalError, IllumError, InstantiationError, ModifierUnsatisfied, Revert, RuleNotEnabled, ScenarioError,
)
from illum.models.actions import (
    Adv, AuthAct, AuthDivideAct, AuthIn, Call, Delay, Divide, Init, Send, SymbolicAction,
)
from illum.models.configuration import ActiveContract, Configuration, ContinueAdv, InitAdv
from illum.models.illum_ast import CallTerm, Program
from illum.models.transaction import Blockchain
from illum.models.values import Participant, TokenBag, ZERO
from illum.services.clauses import fill_branch, instantiate
from illum.services.compiler import ContractOutput, decode_output, owners_of
from illum.services.hellum_codegen import LoweredContract, deployment_arguments, next_name, run_name
from illum.services.hellum_interp import to_clause_value
from illum.services.semantics import created_names, step, validate_advertisement
from illum.services.simulator import Lockstep

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DriverOutcome:
    """Result of one deployment or call at the clause level"""
    ok: bool
    error: Optional[IllumError] = None
    state: Tuple[object, ...] = ()
    transfers: Tuple[Tuple[Participant, TokenBag], ...] = ()
    terminated: bool = False


class _Plan:
    """Symbolic dry run: applies actions to a configuration without emitting labels"""

    def __init__(self, g: Configuration, program: Program):
        self.g = g
        self.program = program
        self.actions: List[SymbolicAction] = []

    def do(self, act: SymbolicAction) -> Tuple[str, ...]:
        after = step(self.g, act, self.program)
        created = created_names(self.g, after)
        self.g = after
        self.actions.append(act)
        return created


def _instantiation_failure(e: IllumError) -> IllumError:
    if e.code == "GuardFalse":
        return Revert(f"guard failed: {e.message}")
    if e.code in ("TypeMismatch", "ArityMismatch"):
        return ScenarioError(e.message, code="BadArguments")
    return ModifierUnsatisfied(e.message)


def _step_failure(e: RuleNotEnabled) -> IllumError:
    cause = getattr(e, "cause", None)
    if cause is not None and cause.code == "GuardFalse":
        return Revert(f"guard failed: {cause.message}")
    return ModifierUnsatisfied(e.message)


class HellumDriver:
    """Runs a lowered contract on a lockstep pair of runs"""

    def __init__(self, lowered: LoweredContract, deposits: Sequence[Tuple[Participant, TokenBag]],
                 participants: Optional[Sequence[Participant]] = None, seed: int = 0):
        self.lowered = lowered
        people = tuple(participants) if participants else tuple(sorted({p for p, _ in deposits}))
        keys = KeyManager(f"{settings.KEY_SEED}:{seed}")
        self.sim = Lockstep(lowered.program, keys, people).start(deposits, seed)
        self.contract: Optional[str] = None
        self.deployed = False

    @property
    def program(self) -> Program:
        return self.lowered.program

    @property
    def config(self) -> Configuration:
        return self.sim.config

    @property
    def chain(self) -> Blockchain:
        return self.sim.chain

    def advance(self, time: int):
        if time > self.config.time:
            self.sim.perform(Delay(time - self.config.time))

    # Planning

    def _fund(self, plan: _Plan, payer: Participant, needed: TokenBag, required: bool) -> Tuple[str, ...]:
        """A deposit of ``payer`` holding exactly ``needed``, divided off a larger one if necessary"""
        if needed.is_zero() and not required:
            return ()
        owned = [d for d in plan.g.deposits if d.owner == payer]
        for d in owned:
            if d.value == needed:
                return (d.name,)
        for d in owned:
            if d.value.covers(needed):
                rest = d.value - needed
                plan.do(AuthDivideAct(payer, d.name, needed, rest))
                left, _ = plan.do(Divide(d.name, needed, rest))
                return (left,)
        raise ModifierUnsatisfied(f"{payer} holds no deposit covering {needed}")

    def _settle(self, plan: _Plan, run: str, function: str, auths: FrozenSet[Participant]):
        """Take the enabled arm of ``run``, then fire its Check and Pay contracts"""
        contract = plan.g.contract(run)
        chosen = None
        for j, branch in enumerate(contract.process, start=1):
            adv = ContinueAdv(branch, (), None, run, j, 0)
            try:
                validate_advertisement(plan.g, adv, self.program)
            except IllumError:
                continue
            chosen = adv
            break
        if chosen is None:
            raise Revert(f"no arm of {contract.clause} applies")
        plan.do(Adv(chosen))
        for who in dict.fromkeys(e.value for e in chosen.branch.auths):
            if who not in auths:
                raise ModifierUnsatisfied(f"{contract.clause} needs authorization by {who}")
            plan.do(AuthAct(who, chosen))
        created = plan.do(Call(chosen))
        transfers = []
        for name in created:
            spawned = plan.g.contract(name)
            if spawned.clause == next_name(function):
                continue
            adv = ContinueAdv(spawned.process[0], (), None, name, 1, 0)
            plan.do(Adv(adv))
            paid = plan.do(Send(adv))
            transfers += [(plan.g.deposit(y).owner, plan.g.deposit(y).value) for y in paid]
        follow = next((n for n in created if plan.g.contract(n).clause == next_name(function)), None)
        return follow, tuple(transfers)

    def _needed(self, clause_name: str, internal, args, balance: TokenBag) -> TokenBag:
        try:
            inst = instantiate(self.program[clause_name], internal, tuple(args))
        except (InstantiationError, EvalError) as e:
            raise _instantiation_failure(e)
        return inst.funding - balance

    def _execute(self, plan: _Plan, follow: Optional[str], transfers) -> DriverOutcome:
        for act in plan.actions:
            self.sim.perform(act)
        self.contract = follow
        state = self.config.contract(follow).internal if follow else ()
        return DriverOutcome(True, None, state, transfers, follow is None)

    # Operations

    def deploy(self, payer: Participant, args: Sequence, paid: TokenBag = ZERO,
               auths: FrozenSet[Participant] = frozenset(), time: Optional[int] = None) -> DriverOutcome:
        if self.deployed:
            raise ScenarioError("contract already deployed")
        args = tuple(to_clause_value(a) for a in args)
        if time is not None:
            self.advance(time)
        internal = deployment_arguments(self.lowered)
        try:
            needed = self._needed(self.lowered.root, internal, args, ZERO)
            if not paid.covers(needed):
                raise ModifierUnsatisfied(f"constructor needs {needed}, paid {paid}")
            plan = _Plan(self.config, self.program)
            deposits = self._fund(plan, payer, needed, required=True)
            adv = InitAdv(self.lowered.root, internal, tuple(args), deposits, None, 0)
            plan.do(Adv(adv))
            for z in deposits:
                plan.do(AuthIn(payer, z, adv))
            (x,) = plan.do(Init(adv))
            follow, transfers = self._settle(plan, x, "constructor", auths)
        except RuleNotEnabled as e:
            return self._failed(_step_failure(e))
        except (Revert, ModifierUnsatisfied) as e:
            return self._failed(e)
        self.deployed = True
        outcome = self._execute(plan, follow, transfers)
        logger.info(f"✅ Deployed {self.lowered.typed.name}")
        return outcome

    def call(self, payer: Participant, name: str, args: Sequence, paid: TokenBag = ZERO,
             auths: FrozenSet[Participant] = frozenset(), time: Optional[int] = None) -> DriverOutcome:
        args = tuple(to_clause_value(a) for a in args)
        if time is not None:
            self.advance(time)
        if self.contract is None:
            return self._failed(ModifierUnsatisfied("no active contract"))
        waiting: ActiveContract = self.config.contract(self.contract)
        index = next(
            (j for j, b in enumerate(waiting.process, start=1)
             if isinstance(b.terminal, CallTerm) and b.terminal.calls[0].name == run_name(name)),
            None,
        )
        if index is None:
            return self._failed(ModifierUnsatisfied(f"{name} is not a continuation of {waiting.clause}"))
        try:
            needed = self._needed(run_name(name), waiting.internal, args, waiting.balance)
            if not paid.covers(needed):
                raise ModifierUnsatisfied(f"{name} needs {needed}, paid {paid}")
            plan = _Plan(self.config, self.program)
            deposits = self._fund(plan, payer, needed, required=False)
            branch = fill_branch(waiting.process[index - 1], [tuple(args)])
            adv = ContinueAdv(branch, deposits, None, waiting.name, index, 0)
            plan.do(Adv(adv))
            for z in deposits:
                plan.do(AuthIn(payer, z, adv))
            (run,) = plan.do(Call(adv))
            follow, transfers = self._settle(plan, run, name, auths)
        except RuleNotEnabled as e:
            return self._failed(_step_failure(e))
        except (Revert, ModifierUnsatisfied) as e:
            return self._failed(e)
        return self._execute(plan, follow, transfers)

    def _failed(self, error: IllumError) -> DriverOutcome:
        logger.debug(f"call rejected: {error.code}: {error.message}")
        return DriverOutcome(False, error)

    # Chain view

    def chain_state(self) -> Optional[ContractOutput]:
        """The waiting contract as decoded from its output on the chain"""
        if self.contract is None:
            return None
        ref = self.sim.maps.txout[self.contract]
        output = self.chain.resolve(ref)
        decoded = decode_output(output, self.program, owners_of(self.sim.maps.keys))
        return decoded if isinstance(decoded, ContractOutput) else None

