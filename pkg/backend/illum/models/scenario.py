"""
Scenario files replayed by ``illum simulate``
"""

from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field, model_validator


class ParticipantSpec(BaseModel):
    name: str = Field(..., min_length=1)
    deposits: List[Dict[str, int]] = Field(default_factory=list, description="One token bag per initial deposit")


class Step(BaseModel):
    """One scenario step.

    ``deploy`` and ``call`` drive a HeLLUM contract; ``illum`` performs one raw symbolic
    action on a clause file; ``random`` runs a seeded honest walk.
    """

    kind: Literal["deploy", "call", "delay", "illum", "random"]

    # deploy / call
    caller: Optional[str] = None
    function: Optional[str] = None
    args: List[Any] = Field(default_factory=list)
    paid: Dict[str, int] = Field(default_factory=dict)
    auths: List[str] = Field(default_factory=list)
    time: Optional[int] = Field(None, ge=0)
    expect: Optional[str] = Field(None, description="Expected error code; the step must fail with it")

    # delay
    delta: int = Field(0, ge=0)

    # illum
    action: Optional[str] = None
    fields: Dict[str, Any] = Field(default_factory=dict)

    # random
    steps: int = Field(0, ge=0)

    @model_validator(mode="after")
    def _required_fields(self):
        if self.kind in ("deploy", "call") and not self.caller:
            raise ValueError(f"{self.kind} step needs a caller")
        if self.kind == "call" and not self.function:
            raise ValueError("call step needs a function")
        if self.kind == "illum" and not self.action:
            raise ValueError("illum step needs an action")
        return self


class Scenario(BaseModel):
    name: str = "scenario"
    contract: Optional[str] = Field(None, description="Path to a .hll or .ill file, relative to the scenario")
    root: Optional[str] = Field(None, description="Root clause for .ill contracts")
    participants: List[ParticipantSpec] = Field(default_factory=list)
    steps: List[Step] = Field(default_factory=list)

    @model_validator(mode="after")
    def _unique_participants(self):
        names = [p.name for p in self.participants]
        if len(names) != len(set(names)):
            raise ValueError("participant names must be unique")
        return self
