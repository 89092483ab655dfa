"""
Text format for HeLLUM contracts (.hll): parser and pretty-printer
"""

import logging
from typing import List, Optional, Tuple

from illum.core.config import settings
from illum.models.hellum_ast import (
    BASE_TYPES, AfterMod, Assign, AuthMod, Balance, BalancePre, Binary, BoolLit, ChainForm,
    Function, HExpr, HllContract, HParam, HType, IfStmt, InputMod, IntLit, LocalDecl, LogicalNot,
    MapAssign, MapRead, MapType, MapWrite, Modifier, Name, NormalFormFunction, NullLit, Require,
    Return, SimAssign, StateVar, Stmt, StrLit, Transfer, ViewCall, op_class,
)
from illum.services.lexer import TokenStream, tokenize

logger = logging.getLogger(__name__)

SYMBOLS = (
    "(", ")", "{", "}", "[", "]", ",", ";", ":", ".",
    "+", "-", "==", "!=", "<=", ">=", "<", ">", "=", "=>", "->", "&&", "||", "!",
)

_COMPARE = ("==", "!=", "<", "<=", ">", ">=")


class _HllParser:
    def __init__(self, source: str, source_name: str):
        self.ts = TokenStream(tokenize(source, SYMBOLS, source_name), source_name)

    def contract(self) -> HllContract:
        ts = self.ts
        ts.expect("contract")
        name = ts.expect_kind("NAME", "contract name").value
        ts.expect("{")
        variables: List[StateVar] = []
        constructor: Optional[Function] = None
        functions: List[Function] = []
        while not ts.accept("}"):
            if ts.at("constructor"):
                token = ts.peek()
                if constructor is not None:
                    ts.error("duplicate constructor", token)
                constructor = self.function()
            elif ts.at("function"):
                functions.append(self.function())
            else:
                type_ = self.type_ref()
                var = ts.expect_kind("NAME", "state variable name").value
                ts.expect(";")
                variables.append(StateVar(var, type_))
        if not ts.at_end():
            ts.error(f"unexpected {ts.peek()} after contract")
        if constructor is None:
            constructor = Function("constructor", (), (), ())
        return HllContract(name, tuple(variables), constructor, tuple(functions))

    def type_ref(self) -> HType:
        ts = self.ts
        if ts.accept("mapping"):
            ts.expect("(")
            key = self.base_type()
            ts.expect("=>")
            value = self.base_type()
            ts.expect(")")
            return MapType(key, value)
        return self.base_type()

    def base_type(self) -> str:
        token = self.ts.expect_kind("NAME", "type")
        if token.value not in BASE_TYPES:
            self.ts.error(f"unknown type {token.value}", token)
        return token.value

    def at_type(self) -> bool:
        token = self.ts.peek()
        return token.kind == "NAME" and (token.value in BASE_TYPES or token.value == "mapping")

    def function(self) -> Function:
        ts = self.ts
        token = ts.next()
        name = "constructor" if token.value == "constructor" else ts.expect_kind("NAME", "function name").value
        ts.expect("(")
        params: List[HParam] = []
        if not ts.at(")"):
            while True:
                type_ = self.type_ref()
                params.append(HParam(ts.expect_kind("NAME", "parameter name").value, type_))
                if not ts.accept(","):
                    break
        ts.expect(")")
        modifiers: List[Modifier] = []
        view, returns = False, None
        while True:
            if ts.accept("view"):
                view = True
            elif ts.accept("returns"):
                ts.expect("(")
                returns = self.type_ref()
                ts.expect(")")
            elif ts.at("after") and ts.at("(", 1):
                ts.next()
                ts.expect("(")
                modifiers.append(AfterMod(self.expr()))
                ts.expect(")")
            elif ts.at("auth") and ts.at("(", 1):
                ts.next()
                ts.expect("(")
                modifiers.append(AuthMod(self.expr()))
                ts.expect(")")
            elif ts.at("input") and ts.at("(", 1):
                ts.next()
                ts.expect("(")
                amount = self.expr()
                ts.expect(":")
                modifiers.append(InputMod(amount, ts.expect_kind("NAME", "token id").value))
                ts.expect(")")
            else:
                break
        body = self.block()
        next_: Optional[Tuple[str, ...]] = None
        if ts.accept("next"):
            ts.expect("(")
            targets: List[str] = []
            if not ts.at(")"):
                targets.append(ts.expect_kind("NAME", "function name").value)
                while ts.accept(","):
                    targets.append(ts.expect_kind("NAME", "function name").value)
            ts.expect(")")
            next_ = tuple(targets)
        return Function(name, tuple(params), tuple(modifiers), body, next_, view, returns, token.line)

    def block(self) -> Tuple[Stmt, ...]:
        self.ts.expect("{")
        stmts: List[Stmt] = []
        while not self.ts.accept("}"):
            stmts.append(self.statement())
        return tuple(stmts)

    def statement(self) -> Stmt:
        ts = self.ts
        if ts.accept("if"):
            ts.expect("(")
            test = self.expr()
            ts.expect(")")
            then = self.block()
            orelse: Tuple[Stmt, ...] = ()
            if ts.accept("else"):
                orelse = (self.statement(),) if ts.at("if") else self.block()
            return IfStmt(test, then, orelse)
        if ts.accept("require"):
            test = self.expr()
            ts.expect(";")
            return Require(test)
        if ts.accept("return"):
            value = self.expr()
            ts.expect(";")
            return Return(value)
        if (self.at_type() and ts.peek(1).kind == "NAME") or ts.at("mapping"):
            type_ = self.type_ref()
            name = ts.expect_kind("NAME", "variable name").value
            value = self.expr() if ts.accept("=") else None
            ts.expect(";")
            return LocalDecl(type_, name, value)
        if ts.peek().kind == "NAME" and ts.at("=", 1):
            target = ts.next().value
            ts.next()
            value = self.expr()
            ts.expect(";")
            return Assign(target, value)
        if ts.peek().kind == "NAME" and ts.at("[", 1):
            # m[k] = e, unless it is m[k].transfer(...)
            start = ts.pos
            target = ts.next().value
            ts.next()
            key = self.expr()
            ts.expect("]")
            if ts.accept("="):
                value = self.expr()
                ts.expect(";")
                return MapAssign(target, key, value)
            ts.pos = start
        recipient = self.postfix()
        ts.expect(".")
        ts.expect("transfer")
        ts.expect("(")
        amount = self.expr()
        token = settings.DEFAULT_TOKEN
        if ts.accept(":"):
            token = ts.expect_kind("NAME", "token id").value
        ts.expect(")")
        ts.expect(";")
        return Transfer(recipient, amount, token)

    # Expressions, lowest precedence first

    def expr(self) -> HExpr:
        left = self.conjunction()
        while self.ts.accept("||"):
            left = Binary("||", left, self.conjunction())
        return left

    def conjunction(self) -> HExpr:
        left = self.negation()
        while self.ts.accept("&&"):
            left = Binary("&&", left, self.negation())
        return left

    def negation(self) -> HExpr:
        if self.ts.accept("!"):
            return LogicalNot(self.negation())
        return self.comparison()

    def comparison(self) -> HExpr:
        left = self.additive()
        token = self.ts.peek()
        if token.kind == "SYM" and token.value in _COMPARE:
            self.ts.next()
            return Binary(token.value, left, self.additive())
        return left

    def additive(self) -> HExpr:
        left = self.postfix()
        while self.ts.peek().kind == "SYM" and self.ts.peek().value in ("+", "-"):
            op = self.ts.next().value
            left = Binary(op, left, self.postfix())
        return left

    def postfix(self) -> HExpr:
        e = self.primary()
        while self.ts.accept("["):
            key = self.expr()
            if self.ts.accept("->"):
                e = MapWrite(e, key, self.expr())
            else:
                e = MapRead(e, key)
            self.ts.expect("]")
        return e

    def primary(self) -> HExpr:
        ts = self.ts
        token = ts.peek()
        if token.kind == "INT":
            ts.next()
            return IntLit(int(token.value))
        if token.kind == "STRING":
            ts.next()
            return StrLit(token.value[1:-1].replace('\\"', '"').replace("\\\\", "\\"))
        if ts.accept("-"):
            return IntLit(-int(ts.expect_kind("INT", "integer").value))
        if ts.accept("("):
            e = self.expr()
            ts.expect(")")
            return e
        if token.kind != "NAME":
            ts.error(f"expected an expression, found {token}")
        ts.next()
        word = token.value
        if word == "true":
            return BoolLit(True)
        if word == "false":
            return BoolLit(False)
        if word == "Null":
            return NullLit()
        if word in ("balance", "balance_pre") and ts.at("("):
            ts.next()
            tok = ts.expect_kind("NAME", "token id").value
            ts.expect(")")
            return Balance(tok) if word == "balance" else BalancePre(tok)
        if ts.accept("("):
            args: List[HExpr] = []
            if not ts.at(")"):
                args.append(self.expr())
                while ts.accept(","):
                    args.append(self.expr())
            ts.expect(")")
            return ViewCall(word, tuple(args))
        return Name(word)


def parse_contract(source: str, source_name: str = "") -> HllContract:
    """Parse a .hll contract"""
    try:
        contract = _HllParser(source, source_name).contract()
        logger.debug(f"Parsed contract {contract.name} with {len(contract.functions)} functions")
        return contract
    except Exception as e:
        logger.error(f"❌ Failed to parse {source_name or 'HeLLUM source'}: {e}")
        raise


def parse_hll_expr(source: str) -> HExpr:
    parser = _HllParser(source, "")
    e = parser.expr()
    if not parser.ts.at_end():
        parser.ts.error(f"unexpected {parser.ts.peek()}")
    return e


def parse_body(source: str) -> Tuple[Stmt, ...]:
    """Statements of a function body given without braces"""
    parser = _HllParser("{" + source + "}", "")
    body = parser.block()
    if not parser.ts.at_end():
        parser.ts.error(f"unexpected {parser.ts.peek()}")
    return body


# Printing

_BINDING = {"logic": 0, "compare": 1, "arith": 2}


def _child(e: HExpr, parent_op: str) -> str:
    text = print_expr(e)
    parent = _BINDING[op_class(parent_op)]
    if isinstance(e, Binary) and _BINDING[op_class(e.op)] <= parent:
        return f"({text})"
    if isinstance(e, LogicalNot) and parent > 0:
        return f"({text})"
    return text


def _atom(e: HExpr) -> str:
    text = print_expr(e)
    if isinstance(e, (Binary, LogicalNot)):
        return f"({text})"
    return text


def print_expr(e: HExpr) -> str:
    """Print an expression; a binary operand of the same or a looser operator class is parenthesized"""
    if isinstance(e, IntLit):
        return str(e.value) if e.value >= 0 else f"(-{-e.value})"
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, StrLit):
        escaped = e.value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(e, NullLit):
        return "Null"
    if isinstance(e, Name):
        return e.name
    if isinstance(e, Balance):
        return f"balance({e.token})"
    if isinstance(e, BalancePre):
        return f"balance_pre({e.token})"
    if isinstance(e, MapRead):
        return f"{_atom(e.base)}[{print_expr(e.key)}]"
    if isinstance(e, MapWrite):
        return f"{_atom(e.base)}[{print_expr(e.key)} -> {print_expr(e.value)}]"
    if isinstance(e, LogicalNot):
        return f"!{_atom(e.arg)}"
    if isinstance(e, ViewCall):
        return f"{e.name}({', '.join(print_expr(a) for a in e.args)})"
    if isinstance(e, Binary):
        sep = f" {e.op} " if op_class(e.op) == "logic" else e.op
        return f"{_child(e.left, e.op)}{sep}{_child(e.right, e.op)}"
    return repr(e)


def _print_type(t: HType) -> str:
    return str(t)


def print_stmt(s: Stmt, indent: str = "") -> List[str]:
    if isinstance(s, LocalDecl):
        init = f" = {print_expr(s.value)}" if s.value is not None else ""
        return [f"{indent}{_print_type(s.type)} {s.name}{init};"]
    if isinstance(s, Assign):
        return [f"{indent}{s.target} = {print_expr(s.value)};"]
    if isinstance(s, MapAssign):
        return [f"{indent}{s.target}[{print_expr(s.key)}] = {print_expr(s.value)};"]
    if isinstance(s, Require):
        return [f"{indent}require {print_expr(s.test)};"]
    if isinstance(s, Return):
        return [f"{indent}return {print_expr(s.value)};"]
    if isinstance(s, Transfer):
        return [f"{indent}{_atom(s.recipient)}.transfer({print_expr(s.amount)}:{s.token});"]
    lines = [f"{indent}if ({print_expr(s.test)}) {{"]
    for inner in s.then:
        lines += print_stmt(inner, indent + "    ")
    if s.orelse:
        lines.append(f"{indent}}} else {{")
        for inner in s.orelse:
            lines += print_stmt(inner, indent + "    ")
    lines.append(f"{indent}}}")
    return lines


def _print_modifier(m: Modifier) -> str:
    if isinstance(m, AfterMod):
        return f"after({print_expr(m.time)})"
    if isinstance(m, AuthMod):
        return f"auth({print_expr(m.who)})"
    return f"input({print_expr(m.amount)}:{m.token})"


def _print_function(f: Function) -> List[str]:
    params = ", ".join(f"{_print_type(p.type)} {p.name}" for p in f.params)
    head = "constructor" if f.is_constructor else f"function {f.name}"
    extras = [_print_modifier(m) for m in f.modifiers]
    if f.view:
        extras.append("view")
    if f.returns is not None:
        extras.append(f"returns ({_print_type(f.returns)})")
    suffix = (" " + " ".join(extras)) if extras else ""
    lines = [f"    {head}({params}){suffix} {{"]
    for s in f.body:
        lines += print_stmt(s, "        ")
    tail = "    }"
    if f.next is not None:
        tail += f" next({', '.join(f.next)})"
    lines.append(tail)
    return lines


def print_contract(contract: HllContract) -> str:
    """Pretty-print a contract; parse_contract(print_contract(c)) == c"""
    lines = [f"contract {contract.name} {{"]
    for v in contract.variables:
        lines.append(f"    {_print_type(v.type)} {v.name};")
    for f in (contract.constructor,) + contract.functions:
        lines.append("")
        lines += _print_function(f)
    lines.append("}")
    return "\n".join(lines) + "\n"


# Normal forms

def print_sim_assign(a: SimAssign) -> str:
    return f"{','.join(a.targets)} = {','.join(print_expr(v) for v in a.values)}"


def print_chain(chain: ChainForm) -> str:
    lines = [f"require {print_expr(chain.require)};"]
    for i, branch in enumerate(chain.branches):
        if branch.guard is None:
            opener = "{" if len(chain.branches) == 1 else "else {"
        else:
            opener = f"{'if' if i == 0 else 'else if'} ({print_expr(branch.guard)}) {{"
        lines.append(opener)
        for s in branch.commands:
            lines += print_stmt(s, "    ")
        lines.append("}")
    return "\n".join(lines)


def print_normal_form(nf: NormalFormFunction) -> str:
    lines = [f"// {nf.name}", f"require {print_expr(nf.require)};"]
    for i, branch in enumerate(nf.branches):
        if branch.guard is None:
            opener = "{" if len(nf.branches) == 1 else "else {"
        else:
            opener = f"{'if' if i == 0 else 'else if'} ({print_expr(branch.guard)}) {{"
        lines.append(opener)
        for t in branch.transfers:
            lines += print_stmt(t, "    ")
        lines.append(f"    {print_sim_assign(branch.assignment)};")
        lines.append("}")
    return "\n".join(lines)
