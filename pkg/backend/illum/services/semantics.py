"""
Operational semantics of ILLUM: advertisement validity and the transition relation
"""

import logging
from dataclasses import dataclass, replace
from typing import List, Optional, Tuple

from illum.core.config import settings
from illum.core.errors import (
    AdvertisementError, EvalError, IllumError, InstantiationError, InvalidAdvertisement,
    MissingAuthorization, RuleNotEnabled,
)
from illum.models.actions import (
    Adv, AuthAct, AuthDivideAct, AuthDonateAct, AuthIn, AuthJoinAct, Call, Delay, Destroy,
    Divide, Donate, Init, Join, Msg, Send, SymbolicAction,
)
from illum.models.configuration import (
    ActiveContract, AuthAction, AuthDeposit, AuthDivide, AuthDonate, AuthJoin, Authorization,
    Configuration, ContinueAdv, Deposit, DestroyAdv, Incomplete, InitAdv, w_amount,
)
from illum.models.illum_ast import CallTerm, Const, Program, SendTerm
from illum.models.runs import SymbolicRun
from illum.models.values import NULL, Participant, TokenBag, ZERO, bag_sum
from illum.services.clauses import InstantiatedClause, branch_matches, instantiate

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ValidAdvertisement:
    """What a valid advertisement consumes and produces"""
    available: TokenBag
    produced: Tuple[object, ...]
    contract: Optional[ActiveContract] = None

    @property
    def produced_value(self) -> TokenBag:
        return bag_sum(p.funding if isinstance(p, InstantiatedClause) else p[0] for p in self.produced)


def _deposits_value(g: Configuration, names) -> TokenBag:
    if len(set(names)) != len(names):
        raise AdvertisementError("deposit listed twice", code="MissingDeposit", deposits=list(names))
    total = ZERO
    for name in names:
        deposit = g.deposit(name)
        if deposit is None:
            raise AdvertisementError(f"deposit {name} not in configuration", code="MissingDeposit", deposit=name)
        total = total + deposit.value
    return total


def _check_destroyed(g: Configuration, w) -> TokenBag:
    w = w_amount(w)
    if not w.is_nonnegative() or not g.destroyed.covers(w):
        raise AdvertisementError(
            f"destroyed counter {g.destroyed} does not cover {w}", code="InsufficientDestroyed",
        )
    return w


def _instantiate(program: Program, name: str, internal, external) -> InstantiatedClause:
    clause = program.get(name)
    if clause is None:
        raise AdvertisementError(f"undefined clause {name}", code="UndefinedClause", clause=name)
    try:
        return instantiate(clause, internal, external)
    except (InstantiationError, EvalError) as e:
        raise AdvertisementError(e.message, code=e.code, clause=name)


def _const(e):
    return e.value if isinstance(e, Const) else e


def validate_advertisement(g: Configuration, a, program: Program) -> ValidAdvertisement:
    """Raise AdvertisementError (its code names the failing check) unless ``a`` is valid in ``g``"""
    if isinstance(a, Incomplete):
        raise AdvertisementError("incomplete advertisements are never valid", code="Incomplete")
    if isinstance(a, InitAdv):
        if not a.deposits:
            raise AdvertisementError("initial advertisement without deposits", code="MissingDeposit")
        u = _deposits_value(g, a.deposits)
        w = _check_destroyed(g, a.w)
        inst = _instantiate(program, a.clause, a.internal, a.external)
        if not (u + w).covers(inst.funding):
            raise AdvertisementError(
                f"deposits {u} + {w} do not cover {inst.funding}", code="InsufficientFunds",
            )
        return ValidAdvertisement(u + w, (inst,))
    if isinstance(a, DestroyAdv):
        if not a.deposits:
            raise AdvertisementError("destroy advertisement without deposits", code="MissingDeposit")
        u = _deposits_value(g, a.deposits)
        w = _check_destroyed(g, a.w)
        return ValidAdvertisement(u + w, ())
    if isinstance(a, ContinueAdv):
        u = _deposits_value(g, a.deposits)
        contract = g.contract(a.contract)
        if contract is None:
            raise AdvertisementError(f"contract {a.contract} not in configuration", code="MissingContract")
        w = _check_destroyed(g, a.w)
        if not 1 <= a.index <= len(contract.process) or not branch_matches(a.branch, contract.process[a.index - 1]):
            raise AdvertisementError(
                f"branch does not match branch {a.index} of {a.contract}", code="BranchMismatch",
            )
        for t in a.branch.afters:
            if _const(t) > g.time:
                raise AdvertisementError(f"after({_const(t)}) at time {g.time}", code="TimelockNotExpired")
        for delta in a.branch.after_rels:
            if _const(delta) > g.time - contract.time:
                raise AdvertisementError(
                    f"afterRel({_const(delta)}) at {g.time - contract.time} since activation",
                    code="TimelockNotExpired",
                )
        available = u + w + contract.balance
        terminal = a.branch.terminal
        if isinstance(terminal, SendTerm):
            produced = []
            for item in terminal.items:
                amount = _const(item.amount)
                if amount < 0:
                    raise AdvertisementError(f"negative send {amount}", code="InsufficientFunds")
                produced.append((TokenBag.of([(item.token, amount)]), _const(item.recipient)))
            produced = tuple(produced)
        else:
            produced = tuple(
                _instantiate(program, call.name, [_const(e) for e in call.internal], [_const(e) for e in call.external])
                for call in terminal.calls
            )
        result = ValidAdvertisement(available, produced, contract)
        if not available.covers(result.produced_value):
            raise AdvertisementError(
                f"available {available} does not cover {result.produced_value}", code="InsufficientFunds",
            )
        return result
    raise AdvertisementError(f"not an advertisement: {a!r}", code="InvalidAdvertisement")


def _valid(rule: str, g: Configuration, a, program: Program) -> ValidAdvertisement:
    try:
        return validate_advertisement(g, a, program)
    except AdvertisementError as e:
        raise InvalidAdvertisement(rule, e)


def _present(rule: str, g: Configuration, a):
    if not g.has_advertisement(a):
        raise RuleNotEnabled(rule, "advertisement not in configuration")


def _deposit_auths(rule: str, g: Configuration, a) -> List[Authorization]:
    auths = []
    for name in a.deposits:
        owner = g.deposit(name).owner
        auth = Authorization(owner, AuthDeposit(name, a))
        if not g.has_authorization(auth):
            raise MissingAuthorization(rule, str(owner), name)
        auths.append(auth)
    return auths


def _action_auths(rule: str, g: Configuration, a: ContinueAdv) -> List[Authorization]:
    auths = []
    for who in dict.fromkeys(_const(e) for e in a.branch.auths):
        auth = Authorization(who, AuthAction(a.contract, a))
        if not g.has_authorization(auth):
            raise MissingAuthorization(rule, str(who), a.contract)
        auths.append(auth)
    return auths


def _consume(g: Configuration, a, auths, spent: TokenBag, created: TokenBag) -> Configuration:
    g = g.without_advertisement(a).without_authorizations(auths).without_deposits(a.deposits)
    w = w_amount(a.w)
    return replace(g, destroyed=g.destroyed - w, burned=g.burned + (spent - created))


def _owned_deposit(rule: str, g: Configuration, name: str, owner: Participant) -> Deposit:
    deposit = g.deposit(name)
    if deposit is None:
        raise RuleNotEnabled(rule, f"deposit {name} not in configuration")
    if deposit.owner != owner:
        raise RuleNotEnabled(rule, f"deposit {name} is not owned by {owner}")
    return deposit


def _add_auth(rule: str, g: Configuration, auth: Authorization) -> Configuration:
    if g.has_authorization(auth):
        raise RuleNotEnabled(rule, "authorization already present")
    return g.with_authorization(auth)


def step(g: Configuration, act: SymbolicAction, program: Program) -> Configuration:
    """Apply one labelled transition; raises RuleNotEnabled naming the failed premise"""
    result = _step(g, act, program)
    if settings.ILLUM_TRACE:
        logger.debug(f"step {act.label}: {result}")
    return result


def _step(g: Configuration, act: SymbolicAction, program: Program) -> Configuration:
    if isinstance(act, Msg):
        if not isinstance(act.theta, Incomplete):
            raise RuleNotEnabled("msg", "message is not an incomplete advertisement")
        if g.has_advertisement(act.theta):
            raise RuleNotEnabled("msg", "message already present")
        return g.with_advertisement(act.theta)

    if isinstance(act, Adv):
        if isinstance(act.adv, Incomplete):
            raise RuleNotEnabled("adv", "advertisement is incomplete")
        if g.has_advertisement(act.adv):
            raise RuleNotEnabled("adv", "advertisement already present")
        _valid("adv", g, act.adv, program)
        return g.with_advertisement(act.adv)

    if isinstance(act, AuthIn):
        _present("auth-in", g, act.adv)
        _valid("auth-in", g, act.adv, program)
        if act.deposit not in act.adv.deposits:
            raise RuleNotEnabled("auth-in", f"advertisement is not funded with {act.deposit}")
        _owned_deposit("auth-in", g, act.deposit, act.participant)
        return _add_auth("auth-in", g, Authorization(act.participant, AuthDeposit(act.deposit, act.adv)))

    if isinstance(act, AuthAct):
        _present("auth-act", g, act.adv)
        if not isinstance(act.adv, ContinueAdv):
            raise RuleNotEnabled("auth-act", "not a continuation advertisement")
        _valid("auth-act", g, act.adv, program)
        if act.participant not in [_const(e) for e in act.adv.branch.auths]:
            raise RuleNotEnabled("auth-act", f"branch has no auth({act.participant}) decoration")
        return _add_auth("auth-act", g, Authorization(act.participant, AuthAction(act.adv.contract, act.adv)))

    if isinstance(act, Init):
        if not isinstance(act.adv, InitAdv):
            raise RuleNotEnabled("init", "not an initial advertisement")
        _present("init", g, act.adv)
        valid = _valid("init", g, act.adv, program)
        auths = _deposit_auths("init", g, act.adv)
        inst = valid.produced[0]
        g2 = _consume(g, act.adv, auths, valid.available, inst.funding)
        g2, (x,) = g2.fresh_names(1)
        contract = ActiveContract(x, g.time, inst.process, inst.funding, inst.name, inst.internal, inst.external)
        return g2.with_contracts([contract])

    if isinstance(act, (Call, Send)):
        rule = act.label
        a = act.adv
        if not isinstance(a, ContinueAdv):
            raise RuleNotEnabled(rule, "not a continuation advertisement")
        wanted = CallTerm if isinstance(act, Call) else SendTerm
        if not isinstance(a.branch.terminal, wanted):
            raise RuleNotEnabled(rule, f"advertised branch does not end in {rule}")
        _present(rule, g, a)
        valid = _valid(rule, g, a, program)
        auths = _deposit_auths(rule, g, a) + _action_auths(rule, g, a)
        g2 = _consume(g, a, auths, valid.available, valid.produced_value).without_contract(a.contract)
        g2, names = g2.fresh_names(len(valid.produced))
        if isinstance(act, Call):
            return g2.with_contracts(
                ActiveContract(y, g.time, inst.process, inst.funding, inst.name, inst.internal, inst.external)
                for y, inst in zip(names, valid.produced)
            )
        return g2.with_deposits(
            Deposit(y, recipient, value) for y, (value, recipient) in zip(names, valid.produced)
        )

    if isinstance(act, Destroy):
        a = act.adv
        if not isinstance(a, DestroyAdv):
            raise RuleNotEnabled("destroy", "not a destroy advertisement")
        _present("destroy", g, a)
        valid = _valid("destroy", g, a, program)
        auths = _deposit_auths("destroy", g, a)
        g2 = _consume(g, a, auths, ZERO, ZERO)
        return replace(g2, destroyed=g2.destroyed + valid.available)

    if isinstance(act, Delay):
        if act.delta <= 0:
            raise RuleNotEnabled("delay", "delay must be positive")
        return replace(g, time=g.time + act.delta)

    if isinstance(act, AuthJoinAct):
        if act.first == act.second or act.index not in (1, 2):
            raise RuleNotEnabled("auth-join", "join needs two distinct deposits and index 1 or 2")
        d1 = _owned_deposit("auth-join", g, act.first, act.participant)
        d2 = _owned_deposit("auth-join", g, act.second, act.participant)
        payload = AuthJoin(act.first, act.second, act.index, d1.value + d2.value)
        return _add_auth("auth-join", g, Authorization(act.participant, payload))

    if isinstance(act, Join):
        d1, d2 = g.deposit(act.first), g.deposit(act.second)
        if d1 is None or d2 is None or act.first == act.second:
            raise RuleNotEnabled("join", "deposits not in configuration")
        if d1.owner != d2.owner:
            raise RuleNotEnabled("join", "deposits have different owners")
        total = d1.value + d2.value
        auths = [Authorization(d1.owner, AuthJoin(act.first, act.second, i, total)) for i in (1, 2)]
        for auth in auths:
            if not g.has_authorization(auth):
                raise MissingAuthorization("join", str(d1.owner), f"{act.first},{act.second}")
        g2 = g.without_authorizations(auths).without_deposits([act.first, act.second])
        g2, (y,) = g2.fresh_names(1)
        return g2.with_deposits([Deposit(y, d1.owner, total)])

    if isinstance(act, AuthDivideAct):
        deposit = _owned_deposit("auth-divide", g, act.deposit, act.participant)
        if not (act.left.is_nonnegative() and act.right.is_nonnegative()) or act.left + act.right != deposit.value:
            raise RuleNotEnabled("auth-divide", f"{act.left} + {act.right} is not {deposit.value}")
        return _add_auth("auth-divide", g, Authorization(act.participant, AuthDivide(act.deposit, act.left, act.right)))

    if isinstance(act, Divide):
        deposit = g.deposit(act.deposit)
        if deposit is None:
            raise RuleNotEnabled("divide", f"deposit {act.deposit} not in configuration")
        auth = Authorization(deposit.owner, AuthDivide(act.deposit, act.left, act.right))
        if not g.has_authorization(auth):
            raise MissingAuthorization("divide", str(deposit.owner), act.deposit)
        g2 = g.without_authorizations([auth]).without_deposits([act.deposit])
        g2, (y1, y2) = g2.fresh_names(2)
        return g2.with_deposits([Deposit(y1, deposit.owner, act.left), Deposit(y2, deposit.owner, act.right)])

    if isinstance(act, AuthDonateAct):
        _owned_deposit("auth-donate", g, act.deposit, act.participant)
        return _add_auth("auth-donate", g, Authorization(act.participant, AuthDonate(act.deposit, act.to)))

    if isinstance(act, Donate):
        deposit = g.deposit(act.deposit)
        if deposit is None:
            raise RuleNotEnabled("donate", f"deposit {act.deposit} not in configuration")
        auth = Authorization(deposit.owner, AuthDonate(act.deposit, act.to))
        if not g.has_authorization(auth):
            raise MissingAuthorization("donate", str(deposit.owner), act.deposit)
        g2 = g.without_authorizations([auth]).without_deposits([act.deposit])
        g2, (y,) = g2.fresh_names(1)
        return g2.with_deposits([Deposit(y, act.to, deposit.value)])

    raise RuleNotEnabled("step", f"unknown action {act!r}")


def created_names(before: Configuration, after: Configuration) -> Tuple[str, ...]:
    """Names present after a step but not before, in creation order"""
    old = set(before.names())
    return tuple(n for n in after.names() if n not in old)


def participants_of(g: Configuration) -> List[Participant]:
    seen = {d.owner for d in g.deposits}
    for c in g.contracts:
        for v in c.internal + c.external:
            if isinstance(v, Participant):
                seen.add(v)
    seen.discard(NULL)
    return sorted(seen)


def _candidates(g: Configuration) -> List[SymbolicAction]:
    acts: List[SymbolicAction] = []
    for a in g.advertisements:
        if isinstance(a, Incomplete):
            continue
        for name in a.deposits:
            deposit = g.deposit(name)
            if deposit is not None:
                acts.append(AuthIn(deposit.owner, name, a))
        if isinstance(a, ContinueAdv):
            for who in dict.fromkeys(_const(e) for e in a.branch.auths):
                acts.append(AuthAct(who, a))
            acts.append(Call(a) if isinstance(a.branch.terminal, CallTerm) else Send(a))
        elif isinstance(a, InitAdv):
            acts.append(Init(a))
        else:
            acts.append(Destroy(a))
    for auth in g.authorizations:
        p = auth.payload
        if isinstance(p, AuthJoin):
            acts.append(Join(p.first, p.second))
        elif isinstance(p, AuthDivide):
            acts.append(Divide(p.deposit, p.left, p.right))
        elif isinstance(p, AuthDonate):
            acts.append(Donate(p.deposit, p.to))
    people = participants_of(g)
    for d1 in g.deposits:
        for d2 in g.deposits:
            if d1.name != d2.name and d1.owner == d2.owner:
                acts.extend(AuthJoinAct(d1.owner, d1.name, d2.name, i) for i in (1, 2))
        for other in people:
            if other != d1.owner:
                acts.append(AuthDonateAct(d1.owner, d1.name, other))
    return acts


def enabled_actions(g: Configuration, program: Program) -> List[SymbolicAction]:
    """Non-delay actions enabled in ``g`` built from its own terms, plus delay(1)"""
    enabled: List[SymbolicAction] = []
    for act in dict.fromkeys(_candidates(g)):
        try:
            _step(g, act, program)
        except IllumError as e:
            logger.debug(f"skipping {type(act).__name__}: {e.code}: {e.message}")
            continue
        enabled.append(act)
    enabled.append(Delay(1))
    return enabled


def replay(initial: Configuration, actions, program: Program) -> "SymbolicRun":
    """Re-derive every configuration of a symbolic run"""
    run = SymbolicRun(initial)
    g = initial
    for act in actions:
        g = step(g, act, program)
        run = run.extended(act, g)
    return run
