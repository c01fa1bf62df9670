from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum, unique
from typing import Dict


@unique
class Verbosity(str, Enum):
    DEBUG = "debug"
    INFO = "info"
    WARNING = "warning"
    ERROR = "error"

    @property
    def is_debug(self) -> bool:
        return self <= self.DEBUG

    def __int__(self) -> int:
        return _LEVELS[self.value]

    # str comparisons would order the names alphabetically
    def __lt__(self, other: object) -> bool:
        if isinstance(other, Verbosity):
            return int(self) < int(other)
        return NotImplemented

    def __le__(self, other: object) -> bool:
        if isinstance(other, Verbosity):
            return int(self) <= int(other)
        return NotImplemented

    def __gt__(self, other: object) -> bool:
        if isinstance(other, Verbosity):
            return int(self) > int(other)
        return NotImplemented

    def __ge__(self, other: object) -> bool:
        if isinstance(other, Verbosity):
            return int(self) >= int(other)
        return NotImplemented


_LEVELS: Dict[str, int] = {"debug": 0, "info": 1, "warning": 2, "error": 3}


@unique
class Source(str, Enum):
    CLI = "cli"
    SOLVER = "solver"
    DIAGNOSTICS = "diagnostics"
    DATASET = "dataset"
    TRAINING = "training"
    RENDER = "render"


@dataclass(frozen=True)
class InternalMessage:
    text: str
    verbosity: Verbosity
    source: Source = Source.CLI
    timestamp: datetime = field(default_factory=datetime.now)
