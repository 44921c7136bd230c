"""Sets of counterfactual explanations returned for one failure case."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .core import action_from_json, action_to_json
from .properties import PropertyVector


@dataclass(frozen=True)
class Counterfactual:
    actions: tuple
    properties: PropertyVector

    def to_json(self) -> dict:
        return {"actions": [action_to_json(a) for a in self.actions], "properties": self.properties.to_json()}

    @classmethod
    def from_json(cls, data: dict) -> "Counterfactual":
        return cls(tuple(action_from_json(a) for a in data["actions"]),
                   PropertyVector.from_json(data["properties"]))


@dataclass
class ExplanationSet:
    """Valid counterfactuals for one case.  An empty ``members`` list means
    the method found nothing, which is a legal outcome."""

    case_id: str
    method: str
    members: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    @property
    def found(self) -> bool:
        return bool(self.members)

    def __len__(self) -> int:
        return len(self.members)

    def to_json(self) -> dict:
        return {
            "case_id": self.case_id,
            "method": self.method,
            "found": self.found,
            "counterfactuals": [m.to_json() for m in self.members],
            "metadata": self.metadata,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, data: dict) -> "ExplanationSet":
        return cls(data["case_id"], data["method"],
                   [Counterfactual.from_json(m) for m in data["counterfactuals"]],
                   dict(data.get("metadata", {})))

    @classmethod
    def loads(cls, text: str) -> "ExplanationSet":
        return cls.from_json(json.loads(text))
