from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum, unique
from typing import List, Optional, Sequence, Tuple

import numpy as np

from sglab.errors import EmptyBatch, ShapeMismatch, TrainingDiverged
from sglab.message import Source
from sglab.renderer import NullRenderer, Renderer

DEFAULT_LAYER_DIMS: Tuple[int, ...] = (3, 64, 128, 64, 64, 2)

# absolute floor of the relative-error denominator in gradient checks
GRADIENT_CHECK_FLOOR = 1e-5


@dataclass(frozen=True)
class InputScaling:
    """Affine map of each input column from [lo, hi] onto [-1, 1]."""

    lo: np.ndarray
    hi: np.ndarray

    @classmethod
    def identity(cls, n: int) -> InputScaling:
        return cls(lo=-np.ones(n), hi=np.ones(n))

    @classmethod
    def from_bounds(cls, bounds: Sequence[Tuple[float, float]]) -> InputScaling:
        lo, hi = np.asarray(bounds, dtype=float).T
        if np.any(hi <= lo):
            raise ValueError(f"Input bounds must satisfy lo < hi, got {bounds}")
        return cls(lo=lo, hi=hi)

    def apply(self, inputs: np.ndarray) -> np.ndarray:
        return 2 * (inputs - self.lo) / (self.hi - self.lo) - 1


@dataclass(frozen=True)
class MLPParams:
    layer_dims: Tuple[int, ...]
    weights: Tuple[np.ndarray, ...]
    biases: Tuple[np.ndarray, ...]
    seed: int = 0
    scaling: Optional[InputScaling] = None

    def __post_init__(self) -> None:
        dims = self.layer_dims
        if len(self.weights) != len(dims) - 1 or len(self.biases) != len(dims) - 1:
            raise ShapeMismatch(f"{len(self.weights)} weight layers for dims {dims}")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (dims[k], dims[k + 1]) or b.shape != (dims[k + 1],):
                raise ShapeMismatch(
                    f"Layer {k} has weights {w.shape} and biases {b.shape}, "
                    f"expected {(dims[k], dims[k + 1])} and {(dims[k + 1],)}"
                )
        if self.scaling is None:
            object.__setattr__(self, "scaling", InputScaling.identity(dims[0]))

    @classmethod
    def from_arrays(
        cls,
        weights: Sequence[np.ndarray],
        biases: Sequence[np.ndarray],
        seed: int = 0,
        scaling: Optional[InputScaling] = None,
    ) -> MLPParams:
        weights = tuple(np.asarray(w, dtype=float) for w in weights)
        dims = (weights[0].shape[0], *(w.shape[1] for w in weights))
        return cls(
            layer_dims=dims,
            weights=weights,
            biases=tuple(np.asarray(b, dtype=float) for b in biases),
            seed=seed,
            scaling=scaling,
        )

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def arrays(self) -> List[np.ndarray]:
        """Weights and biases interleaved layer by layer: W0, b0, W1, b1, ..."""
        return [a for pair in zip(self.weights, self.biases) for a in pair]

    def with_arrays(self, arrays: Sequence[np.ndarray]) -> MLPParams:
        return replace(self, weights=tuple(arrays[0::2]), biases=tuple(arrays[1::2]))

    @property
    def n_params(self) -> int:
        return sum(a.size for a in self.arrays())


@dataclass(frozen=True)
class Gradients:
    weights: Tuple[np.ndarray, ...]
    biases: Tuple[np.ndarray, ...]

    def arrays(self) -> List[np.ndarray]:
        return [a for pair in zip(self.weights, self.biases) for a in pair]


@dataclass(frozen=True)
class Batch:
    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self) -> None:
        if self.inputs.ndim != 2 or self.targets.ndim != 2:
            raise ShapeMismatch("Batch inputs and targets must be matrices")
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ShapeMismatch(
                f"{self.inputs.shape[0]} input rows but {self.targets.shape[0]} target rows"
            )
        if not (np.all(np.isfinite(self.inputs)) and np.all(np.isfinite(self.targets))):
            raise ValueError("Batch contains non-finite values")

    def __len__(self) -> int:
        return int(self.inputs.shape[0])


def init_params(
    seed: int,
    layer_dims: Sequence[int] = DEFAULT_LAYER_DIMS,
    scaling: Optional[InputScaling] = None,
) -> MLPParams:
    """Glorot-uniform weights in ±√(6 / (fan_in + fan_out)), zero biases."""
    rng = np.random.default_rng(seed)
    dims = tuple(int(d) for d in layer_dims)

    weights = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = math.sqrt(6 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
    biases = [np.zeros(fan_out) for fan_out in dims[1:]]

    return MLPParams(
        layer_dims=dims, weights=tuple(weights), biases=tuple(biases), seed=seed, scaling=scaling
    )


def _forward_cache(p: MLPParams, inputs: np.ndarray) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    assert p.scaling is not None
    activations = [p.scaling.apply(inputs)]
    pre_activations = []
    for k, (w, b) in enumerate(zip(p.weights, p.biases)):
        z = activations[-1] @ w + b
        pre_activations.append(z)
        activations.append(z if k == p.n_layers - 1 else np.maximum(z, 0))
    return activations, pre_activations


def forward(p: MLPParams, inputs: np.ndarray) -> np.ndarray:
    """Affine-ReLU chain with an affine output layer; accepts one input vector or a batch."""
    inputs = np.asarray(inputs, dtype=float)
    single = inputs.ndim == 1
    activations, _ = _forward_cache(p, inputs[np.newaxis, :] if single else inputs)
    return activations[-1][0] if single else activations[-1]


def loss_components(p: MLPParams, b: Batch) -> np.ndarray:
    """Mean squared error of each output component."""
    if len(b) == 0:
        raise EmptyBatch("Cannot evaluate the loss on an empty batch")
    residual = forward(p, b.inputs) - b.targets
    return np.mean(residual**2, axis=0)


def loss(p: MLPParams, b: Batch) -> float:
    return float(np.sum(loss_components(p, b)))


def loss_and_grad(p: MLPParams, b: Batch) -> Tuple[float, Gradients]:
    if len(b) == 0:
        raise EmptyBatch("Cannot differentiate the loss on an empty batch")

    activations, pre_activations = _forward_cache(p, b.inputs)
    residual = activations[-1] - b.targets
    value = float(np.sum(np.mean(residual**2, axis=0)))

    dz = 2 * residual / len(b)
    grad_w: List[np.ndarray] = []
    grad_b: List[np.ndarray] = []
    for k in reversed(range(p.n_layers)):
        grad_w.append(activations[k].T @ dz)
        grad_b.append(dz.sum(axis=0))
        if k > 0:
            # ReLU'(0) := 0
            dz = (dz @ p.weights[k].T) * (pre_activations[k - 1] > 0)

    return value, Gradients(weights=tuple(reversed(grad_w)), biases=tuple(reversed(grad_b)))


def grad(p: MLPParams, b: Batch) -> Gradients:
    return loss_and_grad(p, b)[1]


@dataclass(frozen=True)
class AdamState:
    m: Tuple[np.ndarray, ...]
    v: Tuple[np.ndarray, ...]
    step_count: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps_hat: float = 1e-8

    @classmethod
    def fresh(
        cls,
        arrays: Sequence[np.ndarray],
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps_hat: float = 1e-8,
    ) -> AdamState:
        return cls(
            m=tuple(np.zeros_like(a) for a in arrays),
            v=tuple(np.zeros_like(a) for a in arrays),
            lr=lr,
            beta1=beta1,
            beta2=beta2,
            eps_hat=eps_hat,
        )


def adam_update(
    arrays: Sequence[np.ndarray], grads: Sequence[np.ndarray], s: AdamState
) -> Tuple[List[np.ndarray], AdamState]:
    """One bias-corrected Adam update over a flat list of parameter arrays."""
    if len(arrays) != len(grads) or len(arrays) != len(s.m):
        raise ShapeMismatch(
            f"{len(arrays)} parameter arrays, {len(grads)} gradients, {len(s.m)} moments"
        )
    for a, g, m in zip(arrays, grads, s.m):
        if a.shape != g.shape or a.shape != m.shape:
            raise ShapeMismatch(f"Parameter {a.shape}, gradient {g.shape}, moment {m.shape}")

    t = s.step_count + 1
    m = tuple(s.beta1 * m + (1 - s.beta1) * g for m, g in zip(s.m, grads))
    v = tuple(s.beta2 * v + (1 - s.beta2) * g * g for v, g in zip(s.v, grads))
    m_correction = 1 - s.beta1**t
    v_correction = 1 - s.beta2**t

    updated = [
        a - s.lr * (mi / m_correction) / (np.sqrt(vi / v_correction) + s.eps_hat)
        for a, mi, vi in zip(arrays, m, v)
    ]

    return updated, replace(s, m=m, v=v, step_count=t)


def adam_step(p: MLPParams, g: Gradients, s: AdamState) -> Tuple[MLPParams, AdamState]:
    arrays, state = adam_update(p.arrays(), g.arrays(), s)
    return p.with_arrays(arrays), state


@dataclass(frozen=True)
class TrainingConfig:
    max_epochs: int = 100_000
    loss_threshold: float = 1e-3
    plateau_window: int = 2000
    plateau_tolerance: float = 1e-6
    envelope_window: int = 500
    seed: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps_hat: float = 1e-8
    layer_dims: Tuple[int, ...] = DEFAULT_LAYER_DIMS
    log_every: int = 1000


@unique
class StopReason(str, Enum):
    THRESHOLD = "threshold"
    PLATEAU = "plateau"
    MAX_EPOCHS = "max_epochs"


@dataclass(frozen=True)
class TrainingResult:
    params: MLPParams
    history: np.ndarray
    stop_reason: StopReason
    unstable: bool = field(default=False)

    @property
    def epochs(self) -> int:
        return int(len(self.history))

    @property
    def final_loss(self) -> float:
        return float(self.history[-1])


def envelope_is_monotone(history: np.ndarray, window: int) -> bool:
    """Whether the per-window minima of the loss history never increase."""
    n_windows = len(history) // window
    if n_windows < 2:
        return True
    minima = history[: n_windows * window].reshape(n_windows, window).min(axis=1)
    return bool(np.all(np.diff(minima) <= 0))


def train(
    b: Batch,
    cfg: TrainingConfig = TrainingConfig(),
    scaling: Optional[InputScaling] = None,
    renderer: Optional[Renderer] = None,
) -> TrainingResult:
    """
    Full-batch Adam from a seeded initialization.

    Stops when the loss drops below the threshold, when the best loss improved by less
    than ``plateau_tolerance`` (relative) over the last ``plateau_window`` epochs, or at
    ``max_epochs``.
    """
    renderer = renderer or NullRenderer()
    if len(b) == 0:
        raise EmptyBatch("Cannot train on an empty batch")

    params = init_params(cfg.seed, cfg.layer_dims, scaling)
    state = AdamState.fresh(
        params.arrays(), lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps_hat=cfg.eps_hat
    )

    history = np.empty(cfg.max_epochs)
    best = np.empty(cfg.max_epochs)
    stop_reason = StopReason.MAX_EPOCHS
    epoch = 0

    for epoch in range(cfg.max_epochs):
        value, gradients = loss_and_grad(params, b)
        history[epoch] = value
        best[epoch] = value if epoch == 0 else min(value, best[epoch - 1])

        if not math.isfinite(value):
            raise TrainingDiverged(epoch, history[: epoch + 1].copy(), params)

        if cfg.log_every and epoch % cfg.log_every == 0:
            renderer.info(f"epoch {epoch:>6d}  loss {value:.6e}", source=Source.TRAINING)

        if value < cfg.loss_threshold:
            stop_reason = StopReason.THRESHOLD
            break

        if epoch >= cfg.plateau_window:
            before = best[epoch - cfg.plateau_window]
            if before > 0 and (before - best[epoch]) / before < cfg.plateau_tolerance:
                stop_reason = StopReason.PLATEAU
                break

        params, state = adam_step(params, gradients, state)

    history = history[: epoch + 1].copy()
    unstable = not envelope_is_monotone(history, cfg.envelope_window)
    if unstable:
        renderer.warning(
            f"Loss envelope increased over a {cfg.envelope_window}-epoch window",
            source=Source.TRAINING,
        )

    renderer.info(
        f"Stopped after {len(history)} epochs ({stop_reason.value}), loss {history[-1]:.6e}",
        source=Source.TRAINING,
    )

    return TrainingResult(
        params=params, history=history, stop_reason=stop_reason, unstable=unstable
    )


@dataclass(frozen=True)
class GradientCheck:
    coordinates: List[Tuple[int, Tuple[int, ...]]]
    analytic: np.ndarray
    numeric: np.ndarray
    smooth: np.ndarray

    @property
    def relative_errors(self) -> np.ndarray:
        scale = np.maximum(
            np.maximum(np.abs(self.analytic), np.abs(self.numeric)), GRADIENT_CHECK_FLOOR
        )
        return np.abs(self.analytic - self.numeric) / scale

    @property
    def max_relative_error(self) -> float:
        return float(np.max(self.relative_errors[self.smooth]))


def _activation_pattern(p: MLPParams, inputs: np.ndarray) -> List[np.ndarray]:
    _, pre_activations = _forward_cache(p, inputs)
    return [z > 0 for z in pre_activations[:-1]]


def gradient_check(
    p: MLPParams, b: Batch, n_coordinates: int = 150, h: float = 1e-5, seed: int = 0
) -> GradientCheck:
    """
    Compare backpropagation against central differences at random coordinates.

    Coordinates whose ReLU activation pattern differs between ±h straddle a kink;
    they are recorded with ``smooth = False``.
    """
    rng = np.random.default_rng(seed)
    arrays = p.arrays()
    analytic_arrays = grad(p, b).arrays()

    coordinates: List[Tuple[int, Tuple[int, ...]]] = []
    analytic, numeric, smooth = [], [], []
    for _ in range(n_coordinates):
        k = int(rng.integers(len(arrays)))
        index = tuple(int(rng.integers(n)) for n in arrays[k].shape)

        shifted = []
        for sign in (1, -1):
            trial = [a.copy() for a in arrays]
            trial[k][index] += sign * h
            shifted.append(p.with_arrays(trial))

        plus, minus = shifted
        coordinates.append((k, index))
        analytic.append(analytic_arrays[k][index])
        numeric.append((loss(plus, b) - loss(minus, b)) / (2 * h))
        smooth.append(
            all(
                np.array_equal(a, c)
                for a, c in zip(
                    _activation_pattern(plus, b.inputs), _activation_pattern(minus, b.inputs)
                )
            )
        )

    return GradientCheck(
        coordinates=coordinates,
        analytic=np.asarray(analytic),
        numeric=np.asarray(numeric),
        smooth=np.asarray(smooth, dtype=bool),
    )
