"""Verdict reports shared by the studies and the command line."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any


@dataclass
class Check:
    name: str
    ok: bool
    detail: Any = None

    def to_json(self) -> dict:
        out: dict[str, Any] = {"name": self.name, "verdict": "pass" if self.ok else "fail"}
        if self.detail is not None:
            out["detail"] = self.detail
        return out


@dataclass
class Report:
    kind: str
    subject: str
    params: dict = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)
    sections: dict = field(default_factory=dict)
    timing: dict | None = None

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def check(self, name: str, ok: bool, detail: Any = None) -> bool:
        self.checks.append(Check(name, bool(ok), detail))
        return bool(ok)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.ok]

    def to_json(self, include_timing: bool = False) -> dict:
        out = {
            "kind": self.kind,
            "subject": self.subject,
            "params": self.params,
            "verdict": "pass" if self.ok else "fail",
            "checks": [c.to_json() for c in self.checks],
            "sections": self.sections,
        }
        if include_timing and self.timing is not None:
            out["timing"] = self.timing
        return out

    def dumps(self, include_timing: bool = False) -> str:
        return json.dumps(self.to_json(include_timing), indent=2, ensure_ascii=False) + "\n"

    def to_text(self) -> str:
        lines = [f"{self.kind} {self.subject}: {'PASS' if self.ok else 'FAIL'}"]
        if self.params:
            lines.append("  params: " + ", ".join(f"{k}={v}" for k, v in self.params.items()))
        for c in self.checks:
            mark = "ok  " if c.ok else "FAIL"
            detail = ""
            if isinstance(c.detail, str):
                detail = f"  ({c.detail})"
            elif c.detail is not None:
                detail = "  " + json.dumps(c.detail, ensure_ascii=False)
            lines.append(f"  [{mark}] {c.name}{detail}")
        return "\n".join(lines) + "\n"
