from __future__ import annotations

from typing import TYPE_CHECKING, Any

if TYPE_CHECKING:
    from sglab.solver import StateHistory


class SGLabError(Exception):
    pass


class UnknownFormat(SGLabError):
    pass


class GridError(SGLabError):
    pass


class SolitonDomainError(SGLabError):
    pass


class CFLViolation(SGLabError):
    pass


class SolutionBlowUp(SGLabError):
    def __init__(self, step: int, history: StateHistory):
        super().__init__(f"Solution became non-finite at step {step}")
        self.step = step
        self.history = history


class ShapeMismatch(SGLabError):
    pass


class EmptyBatch(SGLabError):
    pass


class TrainingDiverged(SGLabError):
    def __init__(self, epoch: int, history: Any, params: Any):
        super().__init__(f"Training loss became non-finite at epoch {epoch}")
        self.epoch = epoch
        self.history = history
        self.params = params


class StabilityViolation(SGLabError):
    pass


class ConvergenceInputError(SGLabError):
    pass


class HistoryFormatError(SGLabError):
    pass


class CheckpointFormatError(SGLabError):
    pass
