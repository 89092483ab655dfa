"""
Lockstep execution of ILLUM actions at the symbolic and computational levels.

Every symbolic action is applied with the transition relation and mirrored by the
labels an honest participant would produce: advertisement transactions are compiled and
broadcast, authorizations become witness quadruples, consuming actions append the
witnessed transaction. A seeded random walk drives honest participants, and a scripted
adversary interleaves labels that must not disturb coherence.
"""

import logging
import random
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

from illum.core.config import settings
from illum.core.crypto import KeyManager
from illum.core.errors import AdvertisementError, IllumError, RuleNotEnabled, RunError
from illum.models.actions import (
    Adv, AuthAct, AuthDivideAct, AuthDonateAct, AuthIn, AuthJoinAct, Call, Delay, Destroy,
    Divide, Donate, Init, Join, Msg, Send, SymbolicAction,
)
from illum.models.configuration import (
    Configuration, ContinueAdv, Deposit, DestroyAdv, Incomplete, InitAdv,
)
from illum.models.illum_ast import CallTerm, Const, Program, is_star
from illum.models.runs import (
    AdvMessage, BroadcastLabel, CoherenceMaps, ComputationalRun, DelayLabel, KeyAnnouncement,
    OpaqueMessage, SymbolicRun, TxLabel, TxMessage, WitnessQuadruple,
)
from illum.models.transaction import Blockchain, OutRef, Transaction
from illum.models.values import (
    EMPTY_MAP, NULL, Participant, TYPE_BYTES, TYPE_MAP, TYPE_PARTICIPANT, TokenBag, ZERO,
)
from illum.services import ledger
from illum.services.clauses import fill_branch
from illum.services.compiler import (
    CompileFailure, CompilerInputs, compile_advertisement, deposit_output, destroy_transaction,
    divide_transaction, donate_transaction, join_transaction, nonces_for,
)
from illum.services.semantics import created_names, enabled_actions, step, validate_advertisement

logger = logging.getLogger(__name__)


def _const(e):
    return e.value if isinstance(e, Const) else e


@dataclass
class Lockstep:
    """Symbolic run, computational run and the maps relating them, extended together"""
    program: Program
    keys: KeyManager
    participants: Tuple[Participant, ...]
    rs: Optional[SymbolicRun] = None
    rc: ComputationalRun = field(default_factory=ComputationalRun)
    chain: Blockchain = field(default_factory=Blockchain)
    maps: CoherenceMaps = field(default_factory=CoherenceMaps)
    pending: Dict[object, Transaction] = field(default_factory=dict)
    deposit_ops: Dict[Tuple, Transaction] = field(default_factory=dict)

    @property
    def config(self) -> Configuration:
        return self.rs.final

    def _emit(self, *labels):
        self.rc = self.rc.extended(*labels)

    def _key(self, participant: Participant) -> bytes:
        return self.keys.public_key(participant)

    # Base case

    def start(self, deposits: Sequence[Tuple[Participant, TokenBag]], seed: Optional[int] = None):
        """Coinbase paying every initial deposit, then one key announcement per participant"""
        outputs = tuple(deposit_output(self._key(owner), value) for owner, value in deposits)
        coinbase = Transaction(outputs=outputs)
        self.chain = ledger.append(self.chain, coinbase, 0)
        self.rc = ComputationalRun((TxLabel(coinbase),), seed)
        for p in self.participants:
            self.maps.keys[p] = self._key(p)
            self._emit(BroadcastLabel(p, KeyAnnouncement(p, self.maps.keys[p])))
        initial = []
        for k, (owner, value) in enumerate(deposits, start=1):
            name = f"z{k}"
            initial.append(Deposit(name, owner, value))
            self.maps.bind(name, OutRef(coinbase.tx_id, k))
        self.rs = SymbolicRun(Configuration.initial(initial, 0))
        logger.debug(f"Started lockstep run with {len(initial)} deposits, {len(self.participants)} participants")
        return self

    # Symbolic and computational steps

    def perform(self, act: SymbolicAction) -> Configuration:
        """Apply ``act`` symbolically and emit its computational counterpart"""
        before = self.config
        if isinstance(act, Adv) and isinstance(act.adv, ContinueAdv):
            if act.adv.branch.outputs == 0 and act.adv.nonce != 0:
                raise RuleNotEnabled("adv", "advertisements of branches without outputs carry nonce 0")
        after = step(before, act, self.program)
        labels = self._labels(act, before)
        self.rs = self.rs.extended(act, after)
        self._emit(*labels)
        if isinstance(act, (Init, Call, Send, Join, Divide, Donate)):
            tx = labels[-1].tx
            for k, name in enumerate(created_names(before, after), start=1):
                self.maps.bind(name, OutRef(tx.tx_id, k))
        if settings.ILLUM_TRACE:
            logger.debug(f"lockstep {act.label}: {after}")
        return after

    def _labels(self, act: SymbolicAction, g: Configuration) -> List[object]:
        if isinstance(act, Delay):
            return [DelayLabel(act.delta)]
        if isinstance(act, Msg):
            return [BroadcastLabel(None, AdvMessage(self._encoded_theta(act.theta)))]
        if isinstance(act, Adv):
            tx = self._advertised_tx(act.adv, g)
            self.pending[act.adv] = tx
            self.maps.prev_tx[act.adv] = tx.tx_id
            return [BroadcastLabel(None, TxMessage(tx))]
        if isinstance(act, AuthIn):
            tx = self.pending[act.adv]
            j = tx.inputs.index(self.maps.txout[act.deposit]) + 1
            return [self._witness(act.participant, act.adv, j, (1,))]
        if isinstance(act, AuthAct):
            auths = [_const(e) for e in act.adv.branch.auths]
            slots = tuple(k for k, who in enumerate(auths, start=1) if who == act.participant)
            return [self._witness(act.participant, act.adv, 1, slots)]
        if isinstance(act, (Init, Call, Send, Destroy)):
            tx = self.pending.pop(act.adv)
            return [self._append(tx, g.time)]
        if isinstance(act, (AuthJoinAct, AuthDivideAct, AuthDonateAct)):
            return self._deposit_auth(act, g)
        if isinstance(act, (Join, Divide, Donate)):
            key = self._op_key(act)
            tx = self.deposit_ops.pop(key)
            return [self._append(tx, g.time)]
        raise RunError(f"no computational counterpart for {act!r}", code="InconsistentRun")

    def _append(self, tx: Transaction, time: int) -> TxLabel:
        try:
            self.chain = ledger.append(self.chain, tx, time)
        except IllumError as e:
            logger.error(f"❌ Lockstep append failed: {e}")
            raise RunError(f"computational step failed: {e.message}", code="InconsistentRun", cause=e.code)
        return TxLabel(tx)

    def _encoded_theta(self, theta: Incomplete) -> Incomplete:
        txout = self.maps.txout
        adv = theta.adv
        adv = replace(adv, deposits=tuple(txout.get(z, z) for z in adv.deposits))
        if isinstance(adv, ContinueAdv):
            adv = replace(adv, contract=txout.get(adv.contract, adv.contract))
        return Incomplete(adv)

    def _advertised_tx(self, adv, g: Configuration) -> Transaction:
        inputs = []
        if isinstance(adv, ContinueAdv):
            inputs.append(self.maps.txout[adv.contract])
        inputs += [self.maps.txout[z] for z in adv.deposits]
        if adv.w is not None:
            raise RunError("honest participants do not spend destroyed funds", code="InconsistentRun")
        if isinstance(adv, DestroyAdv):
            return destroy_transaction(adv, self.maps.txout, inputs, self.chain)
        t_abs, t_rel = 0, tuple(0 for _ in inputs)
        outputs = 1
        if isinstance(adv, ContinueAdv):
            t_abs = max((_const(t) for t in adv.branch.afters), default=0)
            t_rel = (max((_const(d) for d in adv.branch.after_rels), default=0),) + t_rel[1:]
            outputs = adv.branch.outputs
        ci = CompilerInputs(
            adv, self.maps.txout, self.maps.keys, tuple(inputs), t_abs, t_rel,
            nonces_for(adv, outputs), self.program, self.chain,
        )
        tx = compile_advertisement(ci)
        if isinstance(tx, CompileFailure):
            raise RunError(f"advertisement does not compile: {tx.reason}", code="InconsistentRun", reason=tx.reason)
        return tx

    def _witness(self, who: Participant, adv, input_index: int, slots: Tuple[int, ...]) -> BroadcastLabel:
        tx = self.pending[adv]
        signature = ledger.sign(tx, self.keys.private_key(who))
        for slot in slots:
            tx = tx.with_witness_slot(input_index, slot, signature)
        self.pending[adv] = tx
        return BroadcastLabel(who, WitnessQuadruple(tx.tx_id, input_index, signature, slots[0]))

    @staticmethod
    def _op_key(act) -> Tuple:
        if isinstance(act, (AuthJoinAct, Join)):
            return ("join", act.first, act.second)
        if isinstance(act, (AuthDivideAct, Divide)):
            return ("divide", act.deposit, act.left, act.right)
        return ("donate", act.deposit, act.to)

    def _deposit_auth(self, act, g: Configuration) -> List[object]:
        key = self._op_key(act)
        labels: List[object] = []
        tx = self.deposit_ops.get(key)
        if tx is None:
            txout = self.maps.txout
            if isinstance(act, AuthJoinAct):
                total = g.deposit(act.first).value + g.deposit(act.second).value
                tx = join_transaction(txout[act.first], txout[act.second], self._key(act.participant), total)
            elif isinstance(act, AuthDivideAct):
                tx = divide_transaction(txout[act.deposit], self._key(act.participant), act.left, act.right)
            else:
                tx = donate_transaction(txout[act.deposit], self._key(act.to), g.deposit(act.deposit).value)
            labels.append(BroadcastLabel(act.participant, TxMessage(tx)))
        input_index = act.index if isinstance(act, AuthJoinAct) else 1
        signature = ledger.sign(tx, self.keys.private_key(act.participant))
        tx = tx.with_witness_slot(input_index, 1, signature)
        self.deposit_ops[key] = tx
        labels.append(BroadcastLabel(act.participant, WitnessQuadruple(tx.tx_id, input_index, signature, 1)))
        return labels

    # Adversary moves that leave the symbolic run unchanged

    def adversary_noise(self, rng: random.Random) -> BroadcastLabel:
        choice = rng.randrange(3)
        if choice == 0:
            label = BroadcastLabel(None, OpaqueMessage(bytes(rng.randrange(256) for _ in range(8))))
        elif choice == 1 and self.participants:
            p = rng.choice(self.participants)
            label = BroadcastLabel(None, KeyAnnouncement(p, bytes(rng.randrange(256) for _ in range(32))))
        elif self.pending:
            adv = rng.choice(list(self.pending))
            tx = self.pending[adv]
            label = BroadcastLabel(None, WitnessQuadruple(tx.tx_id, 1, bytes(64), 1))
        else:
            junk = Transaction(outputs=(deposit_output(bytes(32), ZERO),))
            label = BroadcastLabel(None, TxMessage(junk))
        self._emit(label)
        return label


# Honest random strategies

def _domain(type_: str, participants: Sequence[Participant]) -> List[object]:
    if type_ == TYPE_PARTICIPANT:
        return list(participants) + [NULL]
    if type_ == TYPE_MAP:
        return [EMPTY_MAP]
    if type_ == TYPE_BYTES:
        return [b"", b"\x01"]
    return list(range(0, 5))


def _valid(g: Configuration, adv, program: Program) -> bool:
    try:
        validate_advertisement(g, adv, program)
        return True
    except (AdvertisementError, IllumError):
        return False


def _funded(g: Configuration, make, program: Program, rng: random.Random):
    """Try the advertisement with no deposits, then with each single deposit"""
    candidates = [()] + [(d.name,) for d in rng.sample(list(g.deposits), len(g.deposits))]
    for deposits in candidates:
        adv = make(deposits)
        if adv is not None and _valid(g, adv, program):
            return adv
    return None


def propose_advertisements(g: Configuration, program: Program, participants: Sequence[Participant],
                           rng: random.Random, tries: int = 4) -> List[object]:
    """Random valid Init, Continue and Destroy advertisements for ``g``"""
    proposals = []
    roots = list(program.clauses)
    for _ in range(tries):
        clause = rng.choice(roots)
        internal = tuple(rng.choice(_domain(p.type, participants)) for p in clause.internal)
        external = tuple(rng.choice(_domain(p.type, participants)) for p in clause.external)
        nonce = rng.randrange(4)
        adv = _funded(
            g, lambda ds: InitAdv(clause.name, internal, external, ds, None, nonce) if ds else None, program, rng,
        )
        if adv is not None:
            proposals.append(adv)
    for contract in g.contracts:
        for j, declared in enumerate(contract.process, start=1):
            externals = []
            if isinstance(declared.terminal, CallTerm):
                for call in declared.terminal.calls:
                    callee = program[call.name]
                    slots = [p for p, e in zip(callee.external, call.external) if is_star(e)]
                    externals.append([rng.choice(_domain(p.type, participants)) for p in slots])
            branch = fill_branch(declared, externals)
            nonce = rng.randrange(4) if branch.outputs else 0
            adv = _funded(g, lambda ds: ContinueAdv(branch, ds, None, contract.name, j, nonce), program, rng)
            if adv is not None:
                proposals.append(adv)
    if g.deposits and rng.random() < 0.2:
        d = rng.choice(g.deposits)
        proposals.append(DestroyAdv((d.name,), None, rng.randrange(4)))
    return [a for a in proposals if not g.has_advertisement(a)]


def _divisions(g: Configuration, rng: random.Random) -> List[SymbolicAction]:
    acts = []
    for d in g.deposits:
        for token, amount in d.value.items:
            if amount >= 2:
                left = TokenBag.of([(token, rng.randrange(1, amount))])
                acts.append(AuthDivideAct(d.owner, d.name, left, d.value - left))
    return acts


def honest_step(sim: Lockstep, rng: random.Random) -> Optional[SymbolicAction]:
    """Pick and perform one enabled honest action; None when nothing applies"""
    g = sim.config
    options: List[SymbolicAction] = [
        a for a in enabled_actions(g, sim.program) if not isinstance(a, Msg)
    ]
    options += [Adv(a) for a in propose_advertisements(g, sim.program, sim.participants, rng)]
    options += _divisions(g, rng)
    if rng.random() < 0.1:
        for adv in list(sim.pending)[:1]:
            options.append(Msg(Incomplete(adv)))
    rng.shuffle(options)
    for act in options:
        try:
            sim.perform(act)
            return act
        except RuleNotEnabled as e:
            logger.debug(f"skip {act.label}: {e}")
            continue
    return None


def random_walk(sim: Lockstep, rng: random.Random, steps: int, adversary_rate: float = 0.1) -> Lockstep:
    """Interleave honest steps with adversary noise for ``steps`` iterations"""
    steps = min(steps, settings.SIM_MAX_STEPS)
    for _ in range(steps):
        if rng.random() < adversary_rate:
            sim.adversary_noise(rng)
            continue
        if honest_step(sim, rng) is None:
            sim.perform(Delay(1))
    logger.info(f"✅ Random walk finished: {len(sim.rs)} symbolic actions, {len(sim.rc)} labels")
    return sim


def simulate_random(program: Program, deposits: Sequence[Tuple[Participant, TokenBag]],
                    participants: Sequence[Participant], seed: int, steps: int) -> Lockstep:
    rng = random.Random(seed)
    sim = Lockstep(program, KeyManager(str(seed)), tuple(participants)).start(deposits, seed)
    return random_walk(sim, rng, steps)
