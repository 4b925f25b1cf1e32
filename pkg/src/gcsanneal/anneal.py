"""Variational annealing loop: one ADAM update of the state parameters per schedule step."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import gcs
from .gcs import GcsParams, NumericalError
from .qubo import QuboInstance, SpinConfiguration

__all__ = [
    "AnnealConfig",
    "AnnealResult",
    "OptimizerState",
    "adam_step",
    "adam_update",
    "init_params",
    "round_state",
    "run",
]

MODES = ("gcs", "product")
_BLOCKS = ("x", "m", "y")


@dataclass(frozen=True)
class AnnealConfig:
    """Settings for one annealing run.

    ``schedule`` is either ``None`` (linear grid ``s_j = (j-1)/(n_t-1)``) or an explicit
    nondecreasing sequence of ``n_t`` fractions starting at 0 and ending at 1.
    ``mode="product"`` freezes ``M`` and ``y`` at zero. ``rescale`` divides the couplings by
    their mean absolute value before annealing; energies are always reported unscaled.
    """

    n_t: int = 1000
    learning_rate: float = 0.1
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    init_scale: float = 0.01
    mode: str = "gcs"
    schedule: tuple | None = None
    seed: int = 0
    sparse_m: bool = False
    rescale: bool = False

    def __post_init__(self):
        if self.n_t < 2:
            raise ValueError("n_t must be at least 2")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise ValueError("ADAM betas must lie in (0, 1)")
        if self.adam_eps <= 0 or self.init_scale < 0:
            raise ValueError("adam_eps must be positive and init_scale nonnegative")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.schedule is not None:
            grid = tuple(float(v) for v in self.schedule)
            object.__setattr__(self, "schedule", grid)
            if len(grid) != self.n_t:
                raise ValueError(f"schedule has {len(grid)} points but n_t = {self.n_t}")
            if grid[0] != 0.0 or grid[-1] != 1.0 or any(b < a for a, b in zip(grid, grid[1:])):
                raise ValueError("schedule must be nondecreasing from 0 to 1")

    def fractions(self) -> np.ndarray:
        if self.schedule is None:
            return np.linspace(0.0, 1.0, self.n_t)
        return np.array(self.schedule)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class OptimizerState:
    """First/second moment estimates for each parameter block and the step count."""

    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0

    @classmethod
    def like(cls, params: GcsParams) -> OptimizerState:
        blocks = {k: getattr(params, k) for k in _BLOCKS}
        return cls({k: np.zeros_like(a) for k, a in blocks.items()}, {k: np.zeros_like(a) for k, a in blocks.items()})


@dataclass
class AnnealResult:
    solution: SpinConfiguration
    losses: np.ndarray
    step_times: np.ndarray
    z: np.ndarray
    params: GcsParams
    n_gradients: int
    n_updates: int
    setup_time: float
    meta: dict = field(default_factory=dict)

    @property
    def energy(self) -> float:
        return self.solution.energy


def adam_update(theta, grad, m, v, step: int, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
    """Bias-corrected ADAM step; ``step`` counts from 1. Returns ``(theta, m, v)``."""
    m = beta1 * m + (1 - beta1) * grad
    v = beta2 * v + (1 - beta2) * grad * grad
    m_hat = m / (1 - beta1**step)
    v_hat = v / (1 - beta2**step)
    return theta - lr * m_hat / (np.sqrt(v_hat) + eps), m, v


def adam_step(params: GcsParams, grads, state: OptimizerState, config: AnnealConfig) -> GcsParams:
    """Apply one ADAM update in place on ``state``; product mode leaves ``M`` and ``y`` untouched."""
    state.step += 1
    active = ("x",) if config.mode == "product" else _BLOCKS
    new = {k: getattr(params, k) for k in _BLOCKS}
    for name, g in zip(_BLOCKS, grads):
        if name not in active:
            continue
        theta, m, v = adam_update(
            new[name], g, state.m[name], state.v[name], state.step,
            config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_eps,
        )
        if not np.all(np.isfinite(theta)):
            raise NumericalError(f"non-finite ADAM update in block {name} at step {state.step}")
        if name == "m":
            theta = (theta + theta.T) / 2
            np.fill_diagonal(theta, 0.0)
        new[name], state.m[name], state.v[name] = theta, m, v
    return GcsParams(params.n, new["x"], new["m"], new["y"])


def init_params(inst: QuboInstance, config: AnnealConfig) -> GcsParams:
    """``M = y = 0`` and ``x`` uniform in ``[-init_scale, init_scale]`` from the seeded generator."""
    n = inst.n
    x = np.zeros((n, 3))
    if config.init_scale > 0:
        rng = np.random.default_rng(config.seed)
        x = rng.uniform(-config.init_scale, config.init_scale, size=(n, 3))
    return GcsParams(n, x, np.zeros((n, n)), np.zeros((n, 3)))


def round_state(params: GcsParams, inst: QuboInstance) -> tuple[SpinConfiguration, np.ndarray]:
    """Read out ``z_j = <Z_j>`` and binarise to ``+1`` if ``z_j >= 0`` else ``-1``."""
    plan = gcs.build_plan(params.n, None, None, params.m != 0)
    z, _ = gcs.expectations(params, plan, "z")
    s = np.where(z >= 0, 1, -1).astype(np.int8)
    return SpinConfiguration.of(inst, s), z


def _support_mask(inst: QuboInstance, config: AnnealConfig):
    n = inst.n
    if config.mode == "product":
        return np.zeros((n, n), dtype=bool)
    if config.sparse_m:
        mask = np.zeros((n, n), dtype=bool)
        mask[inst.rows, inst.cols] = True
        mask[inst.cols, inst.rows] = True
        return mask
    return None


def run(inst: QuboInstance, config: AnnealConfig) -> AnnealResult:
    """Anneal ``inst`` (which must carry no linear biases) and round the final state."""
    if inst.has_bias:
        raise ValueError("instance has linear biases; apply fold_bias() first")
    t0 = time.perf_counter()
    work = inst
    scale = 1.0
    if config.rescale and inst.nnz:
        scale = float(np.mean(np.abs(inst.weights)))
        work = QuboInstance(inst.n, inst.rows, inst.cols, inst.weights / scale, None, inst.offset / scale, inst.meta)
    plan = gcs.loss_plan(work, _support_mask(inst, config))
    params = init_params(inst, config)
    state = OptimizerState.like(params)
    fractions = config.fractions()
    losses = np.empty(config.n_t)
    times = np.empty(config.n_t)
    n_grad = 0
    setup = time.perf_counter() - t0
    for j, s in enumerate(fractions):
        t = time.perf_counter()
        try:
            grads, losses[j] = gcs.gradient(params, float(s), work, plan, with_loss=True)
            n_grad += 1
            params = adam_step(params, grads, state, config)
        except NumericalError as exc:
            raise NumericalError(f"step {j}: {exc}") from exc
        times[j] = time.perf_counter() - t
    solution, z = round_state(params, inst)
    meta = {"mode": config.mode, "rescale": scale, "sparse_m": config.sparse_m}
    return AnnealResult(solution, losses, times, z, params, n_grad, state.step, setup, meta)
