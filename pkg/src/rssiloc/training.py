"""The five full-batch trainers behind one interface.

Damped Gauss-Newton (LM), its evidence-framework regularized variant
(BR), resilient backpropagation without weight backtracking (RP),
Moller's scaled conjugate gradient (SCG), and plain gradient descent
(GD). All operate on the flat parameter vector and the mean squared
normalized-output error; LM and BR work from the residual Jacobian.

Hyperparameter defaults follow each method's original published
formulation and can be overridden through the per-algorithm parameter
blocks in TrainConfig.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import mlp
from .errors import DegenerateData, DimensionMismatch, SolveFailure
from .mlp import MlpModel
from .rng import Xoshiro256StarStar


class TrainingAlgorithm(enum.Enum):
    LM = "lm"
    BR = "br"
    RP = "rp"
    SCG = "scg"
    GD = "gd"


class StopReason(enum.Enum):
    MAX_EPOCHS = "max_epochs"
    GOAL_REACHED = "goal_reached"
    GRADIENT_SMALL = "gradient_small"
    EARLY_STOP = "early_stop"
    LAMBDA_OVERFLOW = "lambda_overflow"


@dataclass(frozen=True)
class LmParams:
    initial_damping: float = 1e-3
    damping_factor: float = 10.0
    max_damping: float = 1e10


@dataclass(frozen=True)
class BrParams:
    initial_alpha: float = 0.01
    initial_beta: float = 1.0
    initial_damping: float = 1e-3
    damping_factor: float = 10.0
    max_damping: float = 1e10
    hyper_min: float = 1e-12
    hyper_max: float = 1e12
    # regularization stands in for early stopping unless asked otherwise
    use_validation: bool = False


@dataclass(frozen=True)
class RpParams:
    initial_step: float = 0.07
    min_step: float = 1e-6
    max_step: float = 50.0
    grow: float = 1.2
    shrink: float = 0.5


@dataclass(frozen=True)
class ScgParams:
    sigma: float = 5e-5
    initial_lambda: float = 5e-7


@dataclass(frozen=True)
class GdParams:
    learning_rate: float = 0.01


_DEFAULT_PARAMS = {
    TrainingAlgorithm.LM: LmParams,
    TrainingAlgorithm.BR: BrParams,
    TrainingAlgorithm.RP: RpParams,
    TrainingAlgorithm.SCG: ScgParams,
    TrainingAlgorithm.GD: GdParams,
}


@dataclass(frozen=True)
class TrainConfig:
    algorithm: TrainingAlgorithm = TrainingAlgorithm.BR
    max_epochs: int = 1000
    goal_mse: float = 0.0
    min_gradient: float = 1e-7
    validation_fraction: float = 0.15
    patience: int = 6
    seed: int = 0
    algorithm_params: object | None = None

    def __post_init__(self):
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be at least 1")
        if not (0.0 <= self.validation_fraction < 1.0):
            raise ValueError("validation_fraction must be in [0, 1)")
        if self.patience < 1:
            raise ValueError("patience must be at least 1")
        if self.goal_mse < 0:
            raise ValueError("goal_mse must be non-negative")

    def params(self):
        if self.algorithm_params is not None:
            return self.algorithm_params
        return _DEFAULT_PARAMS[self.algorithm]()


@dataclass
class TrainReport:
    algorithm: TrainingAlgorithm
    epochs_run: int
    loss_trace: list[tuple[float, float]]  # (train MSE, validation MSE)
    final_train_mse: float
    final_validation_mse: float
    stop_reason: StopReason
    wall_time: float
    effective_parameters: float | None = None  # BR only


def report_lines(report: TrainReport) -> list[str]:
    """Line-oriented text record: summary block, then one epoch per line.

    Wall time is deliberately absent; it travels in a separate sidecar so
    the record is byte-stable across reruns.
    """
    lines = [
        "# rssiloc train report v1",
        f"# algorithm={report.algorithm.value}",
        f"# epochs_run={report.epochs_run}",
        f"# stop_reason={report.stop_reason.value}",
        f"# final_train_mse={report.final_train_mse!r}",
        f"# final_validation_mse={report.final_validation_mse!r}",
    ]
    if report.effective_parameters is not None:
        lines.append(f"# effective_parameters={report.effective_parameters!r}")
    lines.append("# columns: epoch train_mse validation_mse")
    for epoch, (train_mse, val_mse) in enumerate(report.loss_trace, start=1):
        lines.append(f"{epoch} {train_mse!r} {val_mse!r}")
    return lines


# -- elementary steps --------------------------------------------------------

def gd_step(theta: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
    """Plain full-batch gradient descent update."""
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    return theta - lr * grad


def rp_step(theta, grad, prev_grad, step_sizes, params: RpParams = RpParams()):
    """One resilient-backpropagation update (no weight backtracking).

    Components whose gradient kept its sign grow their step; components
    whose gradient flipped shrink it and sit out this epoch.
    """
    product = grad * prev_grad
    same, flipped = product > 0, product < 0
    new_steps = np.where(same, np.minimum(step_sizes * params.grow, params.max_step),
                         step_sizes)
    new_steps = np.where(flipped,
                         np.maximum(step_sizes * params.shrink, params.min_step),
                         new_steps)
    move = -np.sign(grad) * new_steps
    move[flipped] = 0.0
    return theta + move, new_steps


def _solve_spd(matrix: np.ndarray, rhs: np.ndarray):
    """Cholesky solve; returns None when the matrix is not positive definite."""
    try:
        chol = np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError:
        return None
    half = scipy.linalg.solve_triangular(chol, rhs, lower=True)
    return scipy.linalg.solve_triangular(chol, half, lower=True, trans="T")


def lm_step(theta, jac, res, damping, sse_fn, params: LmParams = LmParams(),
            jtj=None, jtr=None, current_sse=None):
    """One damped Gauss-Newton proposal.

    Solves (J^T J + damping I) delta = J^T r and accepts theta - delta
    only when it lowers the sum of squares; damping shrinks tenfold on
    acceptance and grows tenfold on rejection (including rejection
    because the damped system was not positive definite). Returns
    (theta', damping', accepted). jtj/jtr/current_sse may be passed to
    avoid recomputation across an escalation run.
    """
    if jtj is None:
        jtj = jac.T @ jac
    if jtr is None:
        jtr = jac.T @ res
    delta = _solve_spd(jtj + damping * np.eye(theta.size), jtr)
    if delta is None:
        return theta, damping * params.damping_factor, False
    candidate = theta - delta
    if current_sse is None:
        current_sse = sse_fn(theta)
    if sse_fn(candidate) < current_sse:
        return candidate, max(damping / params.damping_factor, 1e-20), True
    return theta, damping * params.damping_factor, False


def br_step(theta, jac, res, alpha, beta, damping, sse_fn,
            params: BrParams = BrParams(), jtj=None, current_sse=None):
    """One evidence-framework step on F = beta*E_D + alpha*E_W.

    E_D is the sum of squared residuals, E_W the sum of squared
    parameters. Solves (beta J^T J + (damping + alpha) I) delta =
    beta J^T r + alpha theta, so the alpha -> 0, beta = 1 limit is
    exactly lm_step. On acceptance the hyperparameters are re-estimated:
    gamma = P - 2 alpha tr(H^-1) with H = 2 beta J^T J + 2 alpha I
    (J taken before the step), then alpha' = gamma / (2 E_W) and
    beta' = (N_res - gamma) / (2 E_D) at the new point, clamped to
    [hyper_min, hyper_max].

    Returns (theta', alpha', beta', gamma, damping', accepted); gamma is
    None when the proposal was rejected.
    """
    if jtj is None:
        jtj = jac.T @ jac
    grad_half = beta * (jac.T @ res) + alpha * theta
    system = beta * jtj + (damping + alpha) * np.eye(theta.size)
    delta = _solve_spd(system, grad_half)
    if delta is None:
        return theta, alpha, beta, None, damping * params.damping_factor, False

    if current_sse is None:
        current_sse = sse_fn(theta)
    current_obj = beta * current_sse + alpha * float(theta @ theta)
    candidate = theta - delta
    cand_sse = sse_fn(candidate)
    cand_obj = beta * cand_sse + alpha * float(candidate @ candidate)
    if not cand_obj < current_obj:
        return theta, alpha, beta, None, damping * params.damping_factor, False

    p = theta.size
    hessian = 2.0 * beta * jtj + 2.0 * alpha * np.eye(p)
    chol = np.linalg.cholesky(hessian)
    # tr(H^-1) exactly, via the inverse Cholesky factor
    inv_half, info = scipy.linalg.lapack.dtrtri(chol, lower=1)
    if info != 0:
        raise SolveFailure("could not invert the Cholesky factor")
    gamma = p - 2.0 * alpha * float(np.sum(inv_half ** 2))

    e_w = float(candidate @ candidate)
    new_alpha = gamma / (2.0 * e_w) if e_w > 0 else params.hyper_max
    new_beta = (res.size - gamma) / (2.0 * cand_sse) if cand_sse > 0 \
        else params.hyper_max

    def clamp(v: float) -> float:
        return min(max(v, params.hyper_min), params.hyper_max)

    return (candidate, clamp(new_alpha), clamp(new_beta), gamma,
            max(damping / params.damping_factor, 1e-20), True)


@dataclass
class ScgState:
    """Carry-over state of Moller's scaled conjugate gradient."""

    theta: np.ndarray
    value: float
    grad: np.ndarray
    lam: float = 5e-7
    lam_bar: float = 0.0
    success: bool = True
    iterations: int = 0
    restart_period: int = 0
    sigma: float = 5e-5
    direction: np.ndarray = field(init=False)
    _curvature: float = field(default=0.0, init=False)

    def __post_init__(self):
        self.direction = -self.grad.copy()
        if self.restart_period <= 0:
            self.restart_period = self.theta.size


def scg_step(state: ScgState, objective) -> ScgState:
    """One Moller iteration; objective(theta) returns (value, gradient).

    The Hessian-vector product along the conjugate direction is
    approximated by a forward difference of gradients; the scaling term
    lam grows whenever the local quadratic model is untrustworthy and
    shrinks when it predicts the achieved reduction well. The direction
    restarts to steepest descent every restart_period successful
    iterations.
    """
    p = state.direction
    norm_p2 = float(p @ p)
    if norm_p2 == 0.0:
        return state

    if state.success:
        sigma_k = state.sigma / math.sqrt(norm_p2)
        _, grad_probe = objective(state.theta + sigma_k * p)
        state._curvature = float(p @ (grad_probe - state.grad)) / sigma_k
    delta = state._curvature + (state.lam - state.lam_bar) * norm_p2
    if delta <= 0:
        state.lam_bar = 2.0 * (state.lam - delta / norm_p2)
        delta = -delta + state.lam * norm_p2
        state.lam = state.lam_bar

    residual = -state.grad
    mu = float(p @ residual)
    if mu == 0.0:
        state.lam_bar = state.lam
        state.success = False
        state.lam += delta / norm_p2
        return state
    step = mu / delta
    candidate = state.theta + step * p
    cand_value, cand_grad = objective(candidate)
    comparison = 2.0 * delta * (state.value - cand_value) / (mu * mu)

    if comparison >= 0:
        new_residual = -cand_grad
        state.theta = candidate
        state.value = cand_value
        state.grad = cand_grad
        state.lam_bar = 0.0
        state.success = True
        state.iterations += 1
        if state.iterations % state.restart_period == 0:
            state.direction = new_residual.copy()
        else:
            beta = float(new_residual @ new_residual
                         - new_residual @ residual) / mu
            state.direction = new_residual + beta * p
        if comparison >= 0.75:
            state.lam *= 0.25
    else:
        state.lam_bar = state.lam
        state.success = False
    if comparison < 0.25:
        state.lam += delta * (1.0 - comparison) / norm_p2
    return state


# -- the trainer -------------------------------------------------------------

def _carve_validation(n_rows: int, fraction: float, seed: int):
    """Deterministic validation carve-out; returns (train_idx, val_idx)."""
    n_val = int(fraction * n_rows + 0.5)
    if n_val == 0:
        return np.arange(n_rows), np.array([], dtype=np.intp)
    order = list(range(n_rows))
    Xoshiro256StarStar(seed).shuffle(order)
    val = np.array(sorted(order[:n_val]), dtype=np.intp)
    train = np.array(sorted(order[n_val:]), dtype=np.intp)
    return train, val


class _Problem:
    """Closures over one training split for the step routines."""

    def __init__(self, model: MlpModel, data):
        self.model = model
        self.data = data
        self.n_res = len(data) * model.layer_sizes[-1]

    def gradient(self, theta):
        return mlp.gradient(self.model.with_parameters(theta), self.data)

    def mse(self, theta) -> float:
        res = mlp.residuals(self.model.with_parameters(theta), self.data)
        return float(res @ res) / self.n_res

    def sse(self, theta) -> float:
        res = mlp.residuals(self.model.with_parameters(theta), self.data)
        return float(res @ res)

    def jac_res(self, theta):
        candidate = self.model.with_parameters(theta)
        return (mlp.jacobian(candidate, self.data),
                mlp.residuals(candidate, self.data))

    def objective(self, theta):
        grad, mse = self.gradient(theta)
        return mse, grad


def _escalate(kind: str, theta, jac, res, hyper, damping, problem, params):
    """Run one LM/BR epoch: escalate damping until a proposal is accepted.

    Returns (theta', hyper', gamma, damping', overflowed). Raises
    SolveFailure if the damped system is still not positive definite once
    the escalation budget is exhausted.
    """
    jtj = jac.T @ jac
    current_sse = float(res @ res)
    gamma = None
    while True:
        if damping > params.max_damping:
            probe = _solve_spd(jtj + params.max_damping * np.eye(theta.size),
                               jac.T @ res)
            if probe is None:
                raise SolveFailure("damped normal equations not positive "
                                   "definite at maximum damping")
            return theta, hyper, gamma, damping, True
        if kind == "lm":
            theta_new, damping, accepted = lm_step(
                theta, jac, res, damping, problem.sse, params,
                jtj=jtj, current_sse=current_sse)
        else:
            alpha, beta = hyper
            theta_new, alpha, beta, gamma, damping, accepted = br_step(
                theta, jac, res, alpha, beta, damping, problem.sse, params,
                jtj=jtj, current_sse=current_sse)
            hyper = (alpha, beta)
        if accepted:
            return theta_new, hyper, gamma, damping, False


def train(model: MlpModel, data, cfg: TrainConfig) -> tuple[MlpModel, TrainReport]:
    """Train a copy of the model; the input model is left untouched.

    Fully determined by (model parameters, data, cfg) except for the
    wall_time field. Raises DimensionMismatch on shape disagreements and
    DegenerateData when the dataset cannot support training.
    """
    if len(data) == 0:
        raise DegenerateData("training data is empty")
    if data.inputs.shape[1] != model.layer_sizes[0]:
        raise DimensionMismatch(
            f"model expects {model.layer_sizes[0]} inputs, dataset has "
            f"{data.inputs.shape[1]}")
    if data.targets.shape[1] != model.layer_sizes[-1]:
        raise DimensionMismatch("dataset target width differs from model output")
    if len(data) < model.layer_sizes[-1]:
        raise DegenerateData("fewer samples than output coordinates")
    ranges = data.inputs.max(axis=0) - data.inputs.min(axis=0)
    flat = np.flatnonzero(ranges <= 0)
    if flat.size:
        raise DegenerateData(f"input channel {int(flat[0])} has zero variance; "
                             "normalization undefined")

    params = cfg.params()
    algo = cfg.algorithm
    use_validation = cfg.validation_fraction > 0 and not (
        algo is TrainingAlgorithm.BR and not params.use_validation)
    if use_validation:
        train_idx, val_idx = _carve_validation(len(data), cfg.validation_fraction,
                                               cfg.seed)
        use_validation = val_idx.size > 0
    if use_validation:
        train_part, val_part = data.take(train_idx), data.take(val_idx)
    else:
        train_part, val_part = data, None

    problem = _Problem(model, train_part)
    val_problem = _Problem(model, val_part) if val_part is not None else None

    def val_mse(t) -> float:
        return val_problem.mse(t) if val_problem is not None else math.nan

    theta = model.flatten()
    trace: list[tuple[float, float]] = []
    stop = StopReason.MAX_EPOCHS
    gamma_last: float | None = None

    damping = getattr(params, "initial_damping", 0.0)
    hyper = (getattr(params, "initial_alpha", 0.0),
             getattr(params, "initial_beta", 1.0))
    prev_grad = np.zeros_like(theta)
    step_sizes = None
    scg_state = None

    best_val = math.inf
    best_theta = theta
    best_train = math.nan
    epochs_since_best = 0

    started = time.perf_counter()
    for _epoch in range(1, cfg.max_epochs + 1):
        jac = res = None
        if algo in (TrainingAlgorithm.LM, TrainingAlgorithm.BR):
            jac, res = problem.jac_res(theta)
            train_mse = float(res @ res) / problem.n_res
            grad = 2.0 * (jac.T @ res) / problem.n_res
        elif algo is TrainingAlgorithm.SCG and scg_state is not None:
            train_mse, grad = scg_state.value, scg_state.grad
        else:
            grad, train_mse = problem.gradient(theta)

        if train_mse <= cfg.goal_mse:
            trace.append((train_mse, val_mse(theta)))
            stop = StopReason.GOAL_REACHED
            break
        if float(np.max(np.abs(grad))) < cfg.min_gradient:
            trace.append((train_mse, val_mse(theta)))
            stop = StopReason.GRADIENT_SMALL
            break

        if algo is TrainingAlgorithm.GD:
            theta = gd_step(theta, grad, params.learning_rate)
        elif algo is TrainingAlgorithm.RP:
            if step_sizes is None:
                step_sizes = np.full(theta.size, params.initial_step)
            theta, step_sizes = rp_step(theta, grad, prev_grad, step_sizes, params)
            prev_grad = grad
        elif algo is TrainingAlgorithm.SCG:
            if scg_state is None:
                scg_state = ScgState(theta.copy(), train_mse, grad,
                                     lam=params.initial_lambda,
                                     sigma=params.sigma)
            scg_state = scg_step(scg_state, problem.objective)
            theta = scg_state.theta
        else:
            kind = "lm" if algo is TrainingAlgorithm.LM else "br"
            theta, hyper, gamma, damping, overflowed = _escalate(
                kind, theta, jac, res, hyper, damping, problem, params)
            if gamma is not None:
                gamma_last = gamma
            if overflowed:
                trace.append((problem.mse(theta), val_mse(theta)))
                stop = StopReason.LAMBDA_OVERFLOW
                break

        post_train = problem.mse(theta)
        post_val = val_mse(theta)
        trace.append((post_train, post_val))

        if val_problem is not None:
            if post_val < best_val:
                best_val, best_theta, best_train = post_val, theta.copy(), post_train
                epochs_since_best = 0
            else:
                epochs_since_best += 1
                if epochs_since_best >= cfg.patience:
                    stop = StopReason.EARLY_STOP
                    break

    wall = time.perf_counter() - started

    if stop is StopReason.EARLY_STOP:
        final_theta, final_train, final_val = best_theta, best_train, best_val
    else:
        final_theta = theta
        final_train = trace[-1][0] if trace else problem.mse(theta)
        final_val = trace[-1][1] if trace else val_mse(theta)

    trained = model.with_parameters(final_theta)
    report = TrainReport(
        algorithm=algo,
        epochs_run=len(trace),
        loss_trace=trace,
        final_train_mse=final_train,
        final_validation_mse=final_val,
        stop_reason=stop,
        wall_time=wall,
        effective_parameters=gamma_last if algo is TrainingAlgorithm.BR else None,
    )
    return trained, report
