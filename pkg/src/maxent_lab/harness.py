"""Run records and output-directory handling shared by the CLI and the suite."""
import json
import os
from dataclasses import asdict, dataclass, field
from typing import Dict, List

from maxent_lab.errors import ValidationError

OUT_ENV = "MAXENT_LAB_OUT"


@dataclass
class RunRecord:
    command: str
    config_hash: str
    seed: int
    wall_time_ms: float = 0.0
    outputs: List[str] = field(default_factory=list)
    summary: Dict[str, object] = field(default_factory=dict)

    def to_json(self, with_time=True):
        d = asdict(self)
        if not with_time:
            d.pop("wall_time_ms")
        return d


class OutputDir:
    """Every file a command writes goes through here and stays under ``root``."""

    def __init__(self, root):
        self.root = os.path.realpath(root)
        self.written = []

    @classmethod
    def resolve(cls, configured, override=None):
        """Explicit ``override`` first, then $MAXENT_LAB_OUT, then the config value."""
        return cls(override or os.environ.get(OUT_ENV) or configured)

    def path(self, name):
        if not name or os.path.isabs(name):
            raise ValidationError(f"output name {name!r} must be a relative path")
        full = os.path.realpath(os.path.join(self.root, name))
        if os.path.commonpath([full, self.root]) != self.root or full == self.root:
            raise ValidationError(f"output {name!r} escapes the output directory")
        return full

    def write_text(self, name, text):
        full = self.path(name)
        os.makedirs(os.path.dirname(full), exist_ok=True)
        with open(full, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        self.written.append(name)
        return full

    def write_json(self, name, obj):
        return self.write_text(name, dumps(obj))


def dumps(obj):
    """Canonical pretty JSON; floats use the shortest round-trip repr."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"
