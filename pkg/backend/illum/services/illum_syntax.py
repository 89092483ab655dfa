"""
Text format for ILLUM clause files (.ill): parser and pretty-printer
"""

import logging
from typing import List, Tuple

from illum.core.config import settings
from illum.models.illum_ast import (
    After, AfterRel, Auth, BinOp, Branch, CallTerm, ClauseCall, ClauseDef, Cond, Const, Contains,
    EmptyMap, Expr, FundingItem, GetOr, Hash, Lookup, Not, Param, Program, SendItem, SendTerm,
    Size, STAR_SLOT, TRUE, Update, Var, is_star,
)
from illum.models.values import NULL, STAR, MapValue, Participant, VALUE_TYPES
from illum.services.lexer import TokenStream, tokenize, unescape

logger = logging.getLogger(__name__)

SYMBOLS = (
    "(", ")", "{", "}", "[", "]", ",", ";", ":", ".", "?", "@", "|",
    "+", "-", "==", "!=", "<=", ">=", "<", ">", "=", "->", "&&", "||", "!",
)

PARAM_TYPES = VALUE_TYPES + ("bool",)

_COMPARE = {"==": "==", "=": "==", "!=": "!=", "<": "<", "<=": "<=", ">": ">", ">=": ">="}


class _IllParser:
    def __init__(self, source: str, source_name: str):
        self.ts = TokenStream(tokenize(source, SYMBOLS, source_name), source_name)

    # Program structure

    def program(self) -> Program:
        clauses = []
        while not self.ts.at_end():
            clauses.append(self.clause())
        return Program(tuple(clauses))

    def clause(self) -> ClauseDef:
        self.ts.expect("clause")
        name = self.ts.expect_kind("NAME", "clause name").value
        self.ts.expect("(")
        internal = self.params((";", ")"))
        external: Tuple[Param, ...] = ()
        if self.ts.accept(";"):
            external = self.params((")",))
        self.ts.expect(")")
        self.ts.expect("=")
        funding, guard = self.precondition()
        branches = [self.branch()]
        while self.ts.accept("+"):
            branches.append(self.branch())
        return ClauseDef(name, internal, external, funding, guard, tuple(branches))

    def params(self, stop) -> Tuple[Param, ...]:
        params: List[Param] = []
        if self.ts.peek().value in stop:
            return ()
        while True:
            token = self.ts.expect_kind("NAME", "parameter name")
            type_ = "int"
            if self.ts.accept(":"):
                type_token = self.ts.expect_kind("NAME", "parameter type")
                if type_token.value not in PARAM_TYPES:
                    self.ts.error(f"unknown type {type_token.value}", type_token)
                type_ = type_token.value
            params.append(Param(token.value, type_))
            if not self.ts.accept(","):
                return tuple(params)

    def precondition(self) -> Tuple[Tuple[FundingItem, ...], Expr]:
        self.ts.expect("{")
        funding: List[FundingItem] = []
        guard: Expr = TRUE
        if not self.ts.at("if") and not self.ts.at("}"):
            while True:
                amount = self.expr()
                token = settings.DEFAULT_TOKEN
                if self.ts.accept(":"):
                    token = self.ts.expect_kind("NAME", "token id").value
                funding.append(FundingItem(amount, token))
                if not self.ts.accept(","):
                    break
        if self.ts.accept("if"):
            guard = self.expr()
        self.ts.expect("}")
        return tuple(funding), guard

    def branch(self) -> Branch:
        decorations = []
        while self.ts.peek().value in ("auth", "after", "afterRel") and self.ts.at("(", 1):
            keyword = self.ts.next().value
            self.ts.expect("(")
            arg = self.expr()
            self.ts.expect(")")
            self.ts.expect(".")
            decorations.append({"auth": Auth, "after": After, "afterRel": AfterRel}[keyword](arg))
        if self.ts.accept("call"):
            self.ts.expect("(")
            calls = [self.callee()]
            while self.ts.accept(","):
                calls.append(self.callee())
            self.ts.expect(")")
            return Branch(tuple(decorations), CallTerm(tuple(calls)))
        if self.ts.accept("send"):
            self.ts.expect("(")
            items = []
            if not self.ts.at(")"):
                items.append(self.send_item())
                while self.ts.accept(","):
                    items.append(self.send_item())
            self.ts.expect(")")
            return Branch(tuple(decorations), SendTerm(tuple(items)))
        self.ts.error(f"expected call or send, found {self.ts.peek()}")

    def callee(self) -> ClauseCall:
        name = self.ts.expect_kind("NAME", "clause name").value
        self.ts.expect("(")
        internal = self.expr_list(slots=False)
        external: Tuple[Expr, ...] = ()
        if self.ts.accept(";"):
            external = self.expr_list(slots=True)
        self.ts.expect(")")
        return ClauseCall(name, internal, external)

    def expr_list(self, slots: bool) -> Tuple[Expr, ...]:
        items: List[Expr] = []
        if self.ts.at(")") or self.ts.at(";"):
            return ()
        while True:
            if slots and self.ts.accept("?"):
                items.append(STAR_SLOT)
            else:
                items.append(self.expr())
            if not self.ts.accept(","):
                return tuple(items)

    def send_item(self) -> SendItem:
        amount = self.expr()
        token = settings.DEFAULT_TOKEN
        if self.ts.accept(":"):
            token = self.ts.expect_kind("NAME", "token id").value
        self.ts.expect("->")
        return SendItem(amount, token, self.expr())

    # Expressions, lowest precedence first

    def expr(self) -> Expr:
        left = self.conjunction()
        while self.ts.accept("or") or self.ts.accept("||"):
            left = BinOp("or", left, self.conjunction())
        return left

    def conjunction(self) -> Expr:
        left = self.negation()
        while self.ts.accept("and") or self.ts.accept("&&"):
            left = BinOp("and", left, self.negation())
        return left

    def negation(self) -> Expr:
        if self.ts.accept("not") or self.ts.accept("!"):
            return Not(self.negation())
        return self.comparison()

    def comparison(self) -> Expr:
        left = self.additive()
        token = self.ts.peek()
        if token.kind == "SYM" and token.value in _COMPARE:
            self.ts.next()
            return BinOp(_COMPARE[token.value], left, self.additive())
        return left

    def additive(self) -> Expr:
        left = self.postfix()
        while self.ts.peek().kind == "SYM" and self.ts.peek().value in ("+", "-"):
            op = self.ts.next().value
            left = BinOp(op, left, self.postfix())
        return left

    def postfix(self) -> Expr:
        e = self.primary()
        while self.ts.accept("["):
            key = self.expr()
            if self.ts.accept("->"):
                e = Update(e, key, self.expr())
            else:
                e = Lookup(e, key)
            self.ts.expect("]")
        return e

    def primary(self) -> Expr:
        ts = self.ts
        token = ts.peek()
        if token.kind == "INT":
            ts.next()
            return Const(int(token.value))
        if token.kind == "HEX":
            ts.next()
            return Const(bytes.fromhex(token.value[2:]))
        if token.kind == "STRING":
            ts.next()
            return Const(unescape(token.value))
        if ts.accept("-"):
            return Const(-int(ts.expect_kind("INT", "integer").value))
        if ts.accept("@"):
            return Const(Participant(ts.expect_kind("NAME", "participant name").value))
        if ts.accept("("):
            e = self.expr()
            ts.expect(")")
            return e
        if ts.accept("|"):
            e = self.expr()
            ts.expect("|")
            return Size(e)
        if token.kind != "NAME":
            ts.error(f"expected an expression, found {token}")
        ts.next()
        word = token.value
        if word == "Null":
            return Const(NULL)
        if word == "true":
            return Const(1)
        if word == "false":
            return Const(0)
        if word == "emptymap":
            return EmptyMap()
        if word == "if":
            test = self.expr()
            ts.expect("then")
            then = self.expr()
            ts.expect("else")
            return Cond(test, then, self.expr())
        if word in ("H", "contains", "get") and ts.at("("):
            ts.next()
            args = [self.expr()]
            while ts.accept(","):
                args.append(self.expr())
            ts.expect(")")
            arity = {"H": 1, "contains": 2, "get": 3}[word]
            if len(args) != arity:
                ts.error(f"{word} takes {arity} arguments", token)
            if word == "H":
                return Hash(args[0])
            if word == "contains":
                return Contains(*args)
            return GetOr(*args)
        return Var(word)


def parse_program(source: str, source_name: str = "") -> Program:
    """Parse a .ill clause file"""
    try:
        program = _IllParser(source, source_name).program()
        logger.debug(f"Parsed {len(program.clauses)} clauses from {source_name or 'source'}")
        return program
    except Exception as e:
        logger.error(f"❌ Failed to parse {source_name or 'ILLUM source'}: {e}")
        raise


def parse_expr(source: str) -> Expr:
    parser = _IllParser(source, "")
    e = parser.expr()
    if not parser.ts.at_end():
        parser.ts.error(f"unexpected {parser.ts.peek()}")
    return e


# Printing

def format_const(value) -> str:
    if value is STAR:
        return "?"
    if isinstance(value, Participant):
        return "Null" if value == NULL else f"@{value.name}"
    if isinstance(value, bytes):
        return "0x" + value.hex()
    if isinstance(value, MapValue):
        text = "emptymap"
        for k, v in value.items():
            text += f"[{format_const(k)} -> {format_const(v)}]"
        return text
    return str(int(value))


def _operand(e: Expr) -> str:
    text = format_expr(e)
    return f"({text})" if isinstance(e, (BinOp, Cond, Not)) else text


def format_expr(e: Expr) -> str:
    """Print an expression; compound operands are parenthesized"""
    if isinstance(e, Const):
        return format_const(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, BinOp):
        return f"{_operand(e.left)} {e.op} {_operand(e.right)}"
    if isinstance(e, Not):
        return f"not {_operand(e.arg)}"
    if isinstance(e, Size):
        return f"|{format_expr(e.arg)}|"
    if isinstance(e, Hash):
        return f"H({format_expr(e.arg)})"
    if isinstance(e, Cond):
        return f"if {format_expr(e.test)} then {format_expr(e.then)} else {format_expr(e.orelse)}"
    if isinstance(e, Lookup):
        return f"{_operand(e.map)}[{format_expr(e.key)}]"
    if isinstance(e, Update):
        return f"{_operand(e.map)}[{format_expr(e.key)} -> {format_expr(e.value)}]"
    if isinstance(e, Contains):
        return f"contains({format_expr(e.map)}, {format_expr(e.key)})"
    if isinstance(e, GetOr):
        return f"get({format_expr(e.map)}, {format_expr(e.key)}, {format_expr(e.default)})"
    if isinstance(e, EmptyMap):
        return "emptymap"
    return repr(e)


def _format_params(params) -> str:
    return ", ".join(p.name if p.type == "int" else f"{p.name}: {p.type}" for p in params)


def format_branch(branch: Branch) -> str:
    parts = []
    for d in branch.decorations:
        if isinstance(d, Auth):
            parts.append(f"auth({format_expr(d.who)}).")
        elif isinstance(d, After):
            parts.append(f"after({format_expr(d.time)}).")
        else:
            parts.append(f"afterRel({format_expr(d.delta)}).")
    if isinstance(branch.terminal, CallTerm):
        calls = []
        for call in branch.terminal.calls:
            internal = ", ".join(format_expr(e) for e in call.internal)
            external = ", ".join("?" if is_star(e) else format_expr(e) for e in call.external)
            calls.append(f"{call.name}({internal}; {external})" if call.external else f"{call.name}({internal};)")
        parts.append(f"call({', '.join(calls)})")
    else:
        items = ", ".join(
            f"{format_expr(i.amount)}:{i.token} -> {format_expr(i.recipient)}" for i in branch.terminal.items
        )
        parts.append(f"send({items})")
    return "".join(parts)


def format_clause(clause: ClauseDef) -> str:
    header = f"clause {clause.name}({_format_params(clause.internal)}; {_format_params(clause.external)})"
    funding = ", ".join(f"{format_expr(f.amount)}:{f.token}" for f in clause.funding)
    if clause.guard != TRUE:
        funding = f"{funding} if {format_expr(clause.guard)}" if funding else f"if {format_expr(clause.guard)}"
    branches = "\n    + ".join(format_branch(b) for b in clause.process)
    return f"{header} =\n    {{{funding}}}\n    {branches}"


def format_program(program: Program) -> str:
    """Pretty-print a clause table; parse_program(format_program(p)) == p"""
    return "\n\n".join(format_clause(c) for c in program.clauses) + "\n"
