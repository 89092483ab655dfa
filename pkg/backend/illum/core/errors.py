"""
Domain errors for ILLUM
"""

from typing import Any, Dict, Optional


class IllumError(Exception):
    """Base class for every toolchain error.

    ``code`` is the machine-readable error name used in reports and exit
    diagnostics; ``details`` carries the offending values.
    """

    code: str = "IllumError"

    def __init__(self, message: str = "", code: Optional[str] = None, **details: Any):
        self.code = code or self.code
        self.details: Dict[str, Any] = details
        super().__init__(message or self.code)

    @property
    def message(self) -> str:
        return str(self.args[0]) if self.args else self.code

    def to_dict(self) -> Dict[str, Any]:
        return {
            "error": self.code,
            "message": self.message,
            "details": {k: _plain(v) for k, v in self.details.items()},
        }


def _plain(value: Any) -> Any:
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    return str(value)


# Expressions

class EvalError(IllumError):
    code = "EvalError"


class UnboundParameter(EvalError):
    code = "UnboundParameter"


class TypeMismatch(EvalError):
    code = "TypeMismatch"


class Overflow(EvalError):
    code = "Overflow"


class MapKeyAbsent(EvalError):
    code = "MapKeyAbsent"


# Clause instantiation

class InstantiationError(IllumError):
    code = "InstantiationError"


class StarPresent(InstantiationError):
    code = "StarPresent"


class GuardFalse(InstantiationError):
    code = "GuardFalse"


class NegativeFunding(InstantiationError):
    code = "NegativeFunding"


class ArityMismatch(InstantiationError):
    code = "ArityMismatch"


class ProgramError(IllumError):
    """Ill-formed clause table (duplicate names, undeclared parameters)"""

    code = "ProgramError"


# Advertisements and transitions

class AdvertisementError(IllumError):
    """An advertisement is not valid in a configuration; ``code`` names the check"""

    code = "InvalidAdvertisement"


class RuleNotEnabled(IllumError):
    """A transition rule's premise does not hold; ``premise`` names it"""

    code = "RuleNotEnabled"

    def __init__(self, rule: str, premise: str, **details: Any):
        super().__init__(f"{rule}: {premise}", premise=premise, rule=rule, **details)
        self.rule = rule
        self.premise = premise


class MissingAuthorization(RuleNotEnabled):
    code = "MissingAuthorization"

    def __init__(self, rule: str, who: str, target: str, **details: Any):
        super().__init__(rule, f"missing authorization by {who} on {target}", **details)


class InvalidAdvertisement(RuleNotEnabled):
    code = "InvalidAdvertisement"

    def __init__(self, rule: str, cause: AdvertisementError):
        super().__init__(rule, f"advertisement not valid ({cause.code})", cause=cause.code)
        self.cause = cause


# Ledger

class LedgerError(IllumError):
    code = "LedgerError"


# Compiler

class CompileError(IllumError):
    code = "CompileError"


# Source files

class ParseError(IllumError):
    code = "ParseError"

    def __init__(self, message: str, line: int = 0, column: int = 0, source: str = ""):
        where = f"{source}:" if source else ""
        super().__init__(f"{where}{line}:{column}: {message}", line=line, column=column)
        self.line = line
        self.column = column


class HellumTypeError(IllumError):
    code = "TypeError"


class AfterUsesParameter(HellumTypeError):
    code = "AfterUsesParameter"


class NextTargetsConstructor(HellumTypeError):
    code = "NextTargetsConstructor"


class ViewHasEffect(HellumTypeError):
    code = "ViewHasEffect"


class Revert(IllumError):
    code = "Revert"


class ModifierUnsatisfied(IllumError):
    code = "ModifierUnsatisfied"


# Runs and coherence

class RunError(IllumError):
    code = "RunError"


class ScenarioError(IllumError):
    code = "ScenarioError"
