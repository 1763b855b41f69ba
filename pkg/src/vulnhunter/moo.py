"""Multi-objective training steps: min-norm weighting and baselines.

The two-task min-norm problem has a closed form: for task gradients g1, g2
the combination alpha*g1 + (1-alpha)*g2 of smallest Euclidean norm uses

    gamma = ((g2 - g1) . g2) / ||g1 - g2||^2, clipped to [0, 1]

with the degenerate g1 == g2 case answered by (0.5, 0.5).  The resulting
direction is a common descent direction for both tasks whenever the
current point is not Pareto-stationary.

Step functions operate on a problem object exposing flat parameter vectors
(shared, head1, head2), so the same machinery drives both the transformer
trainer and small analytic problems.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


class MooError(ValueError):
    pass


@dataclass(frozen=True)
class DescentWeights:
    alpha: tuple[float, float]

    def __post_init__(self) -> None:
        a1, a2 = self.alpha
        if a1 < 0 or a2 < 0 or abs(a1 + a2 - 1.0) > 1e-12:
            raise MooError(f"alpha {self.alpha} not on the simplex")


def min_norm_solver(g1: np.ndarray, g2: np.ndarray) -> DescentWeights:
    """Closed-form min-norm weights for two task gradients."""
    g1 = np.asarray(g1, dtype=np.float64).ravel()
    g2 = np.asarray(g2, dtype=np.float64).ravel()
    if g1.shape != g2.shape:
        raise MooError(f"gradient dimension mismatch: {g1.shape} vs {g2.shape}")
    if not (np.isfinite(g1).all() and np.isfinite(g2).all()):
        raise MooError("non-finite gradient input")
    diff = g1 - g2
    denom = float(diff @ diff)
    if denom < 1e-18:
        return DescentWeights((0.5, 0.5))
    gamma = float((g2 - g1) @ g2) / denom
    gamma = min(1.0, max(0.0, gamma))
    return DescentWeights((gamma, 1.0 - gamma))


@dataclass
class TrainStepConfig:
    """Learning-rate / optimizer / baseline-weight settings for one run.

    grad_norm selects the task-gradient normalization applied before the
    min-norm solve: "none" feeds raw gradients (the literal pseudocode);
    "l2" feeds unit-norm copies, which keeps an easy task from dominating
    the shared update once its gradients shrink.  The update direction is
    always rebuilt from the raw gradients with the solved weights.
    """

    eta: float = 2e-5
    optimizer: str = "sgd"  # "sgd" or "adamw"
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.01
    w1: float = 0.5
    w2: float = 0.5
    grad_norm: str = "none"

    def __post_init__(self) -> None:
        if self.eta <= 0:
            raise MooError("eta must be positive")
        if self.w1 < 0 or self.w2 < 0:
            raise MooError("baseline weights must be non-negative")
        if self.optimizer not in ("sgd", "adamw"):
            raise MooError(f"unknown optimizer {self.optimizer!r}")
        if self.grad_norm not in ("none", "l2"):
            raise MooError(f"unknown grad_norm {self.grad_norm!r}")


class Optimizer:
    """SGD or AdamW over named flat parameter slots."""

    def __init__(self, cfg: TrainStepConfig):
        self.cfg = cfg
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}
        self._t: dict[str, int] = {}

    def update(self, slot: str, param: np.ndarray, grad: np.ndarray) -> np.ndarray:
        cfg = self.cfg
        if cfg.optimizer == "sgd":
            return param - cfg.eta * grad
        b1, b2 = cfg.betas
        if slot not in self._m:
            self._m[slot] = np.zeros_like(param)
            self._v[slot] = np.zeros_like(param)
            self._t[slot] = 0
        self._t[slot] += 1
        t = self._t[slot]
        m = self._m[slot] = b1 * self._m[slot] + (1 - b1) * grad
        v = self._v[slot] = b2 * self._v[slot] + (1 - b2) * grad * grad
        mhat = m / (1 - b1 ** t)
        vhat = v / (1 - b2 ** t)
        return param - cfg.eta * (mhat / (np.sqrt(vhat) + cfg.eps) + cfg.weight_decay * param)


@dataclass
class StepReport:
    step: int
    losses: tuple[float, float]
    alpha: tuple[float, float] | None
    direction_norm: float

    def to_json_line(self) -> str:
        return json.dumps(
            {
                "step": self.step,
                "loss_id": self.losses[0],
                "loss_type": self.losses[1],
                "alpha": None if self.alpha is None else list(self.alpha),
                "direction_norm": self.direction_norm,
            },
            sort_keys=True,
        )


def _checked(name: str, g: np.ndarray, losses) -> np.ndarray:
    if not np.isfinite(g).all():
        raise MooError(f"non-finite {name} gradient (losses={losses}); step aborted")
    return g


def mgda_step(problem, batch, cfg: TrainStepConfig, opt: Optimizer, step: int = 0) -> StepReport:
    """One min-norm multitask update, in the literal pseudocode order:
    task heads step first with gradients taken at the pre-step parameters,
    then the shared parameters step along the weighted common direction.
    """
    losses, g1, g2, h1, h2 = problem.losses_and_grads(batch)
    g1 = _checked("shared task-1", g1, losses)
    g2 = _checked("shared task-2", g2, losses)
    sh, th1, th2 = problem.get_params()

    th1 = opt.update("head1", th1, _checked("head-1", h1, losses))
    th2 = opt.update("head2", th2, _checked("head-2", h2, losses))

    if cfg.grad_norm == "l2":
        n1, n2 = np.linalg.norm(g1), np.linalg.norm(g2)
        weights = min_norm_solver(
            g1 / n1 if n1 > 0 else g1,
            g2 / n2 if n2 > 0 else g2,
        )
    else:
        weights = min_norm_solver(g1, g2)
    a1, a2 = weights.alpha
    direction = a1 * g1 + a2 * g2
    sh = opt.update("shared", sh, direction)
    problem.set_params(sh, th1, th2)
    return StepReport(
        step=step,
        losses=(float(losses[0]), float(losses[1])),
        alpha=weights.alpha,
        direction_norm=float(np.linalg.norm(direction)),
    )


def weighted_sum_step(problem, batch, cfg: TrainStepConfig, opt: Optimizer, step: int = 0) -> StepReport:
    """Baseline: one gradient step on w1*L1 + w2*L2 for every group at once."""
    losses, g1, g2, h1, h2 = problem.losses_and_grads(batch)
    g1 = _checked("shared task-1", g1, losses)
    g2 = _checked("shared task-2", g2, losses)
    sh, th1, th2 = problem.get_params()
    direction = cfg.w1 * g1 + cfg.w2 * g2
    sh = opt.update("shared", sh, direction)
    th1 = opt.update("head1", th1, cfg.w1 * _checked("head-1", h1, losses))
    th2 = opt.update("head2", th2, cfg.w2 * _checked("head-2", h2, losses))
    problem.set_params(sh, th1, th2)
    return StepReport(
        step=step,
        losses=(float(losses[0]), float(losses[1])),
        alpha=None,
        direction_norm=float(np.linalg.norm(direction)),
    )


class QuadraticPair:
    """Two convex quadratic bowls over one shared parameter vector.

    L_i(theta) = 0.5 * (theta - c_i)^T A_i (theta - c_i).  Used by tests and
    demos: its Pareto-stationary set is known analytically, and for SGD any
    eta <= 2 / max(lambda_max(A_1), lambda_max(A_2)) makes every min-norm
    step non-increasing in both losses.
    """

    def __init__(self, a_mat: np.ndarray, b_mat: np.ndarray,
                 c1: np.ndarray, c2: np.ndarray, theta0: np.ndarray):
        self.a_mat = np.asarray(a_mat, dtype=np.float64)
        self.b_mat = np.asarray(b_mat, dtype=np.float64)
        self.c1 = np.asarray(c1, dtype=np.float64)
        self.c2 = np.asarray(c2, dtype=np.float64)
        self.theta = np.asarray(theta0, dtype=np.float64).copy()
        self._empty = np.zeros(0)

    def sgd_eta_bound(self) -> float:
        lam = max(
            float(np.linalg.eigvalsh(self.a_mat).max()),
            float(np.linalg.eigvalsh(self.b_mat).max()),
        )
        return 2.0 / lam

    def losses(self) -> tuple[float, float]:
        d1 = self.theta - self.c1
        d2 = self.theta - self.c2
        return (
            0.5 * float(d1 @ self.a_mat @ d1),
            0.5 * float(d2 @ self.b_mat @ d2),
        )

    def losses_and_grads(self, batch=None):
        g1 = self.a_mat @ (self.theta - self.c1)
        g2 = self.b_mat @ (self.theta - self.c2)
        return self.losses(), g1, g2, self._empty, self._empty

    def get_params(self):
        return self.theta.copy(), self._empty, self._empty

    def set_params(self, sh, th1, th2):
        self.theta = np.asarray(sh, dtype=np.float64).copy()
