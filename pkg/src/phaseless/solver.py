"""Regularized iterative least squares for real phase retrieval.

Each step minimises the surrogate

    J(u, v, lam, mu) = sum_k (y_k - <u,f_k><f_k,v>)^2
                       + lam |u|^2 + mu |u - v|^2 + lam |v|^2

over ``u`` with ``v`` fixed to the current iterate, which reduces to the
linear system ``(R_t + lam + mu) x_{t+1} = (Q + mu) x_t``.
"""

from dataclasses import asdict, dataclass, field, replace
import csv
import json

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .frame import Frame, _check_intensities, _check_signal, analyze, quadratic_Q

MU_POLICIES = ("max_one_lambda", "equal_lambda", "constant")
STOP_REASONS = ("max_iters", "objective_stall", "lambda_floor")


class SolverError(ArithmeticError):
    """The iteration hit a numerical failure it will not hide."""


@dataclass(frozen=True)
class SolverConfig:
    """Initialization scale, schedules and stopping rule.

    ``mu_policy`` is one of ``max_one_lambda`` (``mu = max(1, lam)``),
    ``equal_lambda`` (``mu = lam``) or ``constant`` (``mu = mu_constant``).
    Stopping tests are only applied once ``min_steps`` updates have run.
    """

    alpha: float = 0.9
    lambda_decay: float = 1.05
    mu_policy: str = "max_one_lambda"
    mu_constant: float = 1.0
    eps: float = 1e-8
    t_max: int = 2000
    min_steps: int = 100
    relative_stall: bool = False

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not self.lambda_decay > 1:
            raise ValueError(f"lambda_decay must exceed 1, got {self.lambda_decay}")
        if self.mu_policy not in MU_POLICIES:
            raise ValueError(f"mu_policy must be one of {MU_POLICIES}, got {self.mu_policy!r}")
        if self.mu_policy == "constant" and not self.mu_constant >= 0:
            raise ValueError("mu_constant must be non-negative")
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.t_max < 0 or self.min_steps < 0:
            raise ValueError("t_max and min_steps must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SolverConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown solver config field(s): {', '.join(sorted(extra))}")
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "SolverConfig":
        return cls.from_dict(json.loads(text))


@dataclass
class SolverState:
    t: int
    x: np.ndarray
    lam: float
    mu: float
    j: float
    L: float
    best_x: np.ndarray
    best_L: float
    zero_solution: bool = False


@dataclass
class SolverResult:
    estimate: np.ndarray
    objective_trace: np.ndarray
    residual: float
    iterations: int
    stop_reason: str
    history: list = field(default_factory=list, repr=False)

    def write_trace_csv(self, path):
        """One row per update: ``t, lambda, mu, j, L``."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "lambda", "mu", "j", "L"])
            for t, lam, mu, j, L in self.history:
                w.writerow([t, f"{lam:.17g}", f"{mu:.17g}", f"{j:.17g}", f"{L:.17g}"])


def objective_J(u, v, lam, mu, frame: Frame, y) -> float:
    u = _check_signal(frame, u)
    v = _check_signal(frame, v)
    y = _check_intensities(frame, y)
    F = frame.vectors
    r = y - (F @ u) * (F @ v)
    d = u - v
    return float(r @ r + lam * (u @ u) + mu * (d @ d) + lam * (v @ v))


def residual_L(frame: Frame, y, x) -> float:
    """``|y - phi(x)|^2``."""
    r = _check_intensities(frame, y) - analyze(frame, x)
    return float(r @ r)


def principal_eigenpair(Q, dense_max=512, rtol=1e-12, max_iter=10_000):
    """Largest eigenvalue of symmetric ``Q`` and a unit eigenvector.

    Dense ``eigh`` up to ``dense_max``; beyond that, power iteration on
    ``Q + s I`` with ``s = |Q|_1`` so the shifted spectrum is nonnegative.
    The eigenvector sign is fixed so its largest-magnitude entry is positive.
    """
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    if n <= dense_max:
        w, V = np.linalg.eigh(Q)
        e1, v1 = float(w[-1]), V[:, -1].copy()
    else:
        s = float(np.abs(Q).sum(axis=0).max())
        v1 = np.ones(n) / np.sqrt(n)
        e_old = np.inf
        for _ in range(max_iter):
            z = Q @ v1 + s * v1
            nz = np.linalg.norm(z)
            if nz == 0:
                break
            v1 = z / nz
            e = float(v1 @ Q @ v1)
            if abs(e - e_old) <= rtol * max(abs(e), s):
                break
            e_old = e
        e1 = float(v1 @ Q @ v1)
    k = int(np.argmax(np.abs(v1)))
    if v1[k] < 0:
        v1 = -v1
    return e1, v1


def init_state(frame: Frame, y, cfg: SolverConfig) -> SolverState:
    """Spectral start ``x0 = beta0 v1`` with ``lam0 = mu0 = alpha e1``.

    If ``Q`` has no positive eigenvalue the least-squares optimum is the
    zero vector and a terminal zero-solution state is returned.
    """
    y = _check_intensities(frame, y)
    Q = quadratic_Q(frame, y)
    e1, v1 = principal_eigenpair(Q)
    n = frame.n
    if e1 <= 0:
        x0 = np.zeros(n)
        L0 = float(y @ y)
        return SolverState(0, x0, 0.0, 0.0, np.inf, L0, x0.copy(), L0, zero_solution=True)

    denom = float(np.sum((frame.vectors @ v1) ** 4))
    if denom == 0:
        raise SolverError("principal eigenvector is orthogonal to every frame vector")
    beta0 = np.sqrt((1 - cfg.alpha) * e1 / denom)
    x0 = beta0 * v1
    lam0 = cfg.alpha * e1
    L0 = residual_L(frame, y, x0)
    return SolverState(0, x0, lam0, lam0, np.inf, L0, x0.copy(), L0)


def _solve_spd(A, b):
    try:
        c = cho_factor(A, check_finite=False)
    except LinAlgError as e:
        raise SolverError(f"left-hand matrix is not positive definite: {e}") from None
    x = cho_solve(c, b, check_finite=False)
    r = b - A @ x
    if r @ r > 1e-16 * (b @ b):
        x = x + cho_solve(c, r, check_finite=False)
    return x


def iterate_step(state: SolverState, frame: Frame, y, Q=None) -> SolverState:
    """One closed-form minimisation of ``J(., x_t, lam_t, mu_t)``.

    The schedule values are left untouched; see :func:`schedule_update`.
    """
    y = _check_intensities(frame, y)
    if Q is None:
        Q = quadratic_Q(frame, y)
    F = frame.vectors
    x = state.x
    lam, mu = state.lam, state.mu
    shift = lam + mu
    c_old = F @ x
    if shift <= 0 and not np.any(x):
        x_new = np.zeros_like(x)
    else:
        A = (F.T * c_old**2) @ F
        A.flat[::frame.n + 1] += shift
        x_new = _solve_spd(A, Q @ x + mu * x)

    # objective_J and residual_L, sharing the coefficient products
    c_new = F @ x_new
    r = y - c_new * c_old
    d = x_new - x
    j = float(r @ r + lam * (x_new @ x_new) + mu * (d @ d) + lam * (x @ x))
    r = y - c_new**2
    L = float(r @ r)
    best_x, best_L = state.best_x, state.best_L
    if L < best_L:
        best_x, best_L = x_new.copy(), L
    return replace(state, t=state.t + 1, x=x_new, j=j, L=L, best_x=best_x, best_L=best_L)


def next_mu(lam: float, cfg: SolverConfig) -> float:
    if cfg.mu_policy == "max_one_lambda":
        return max(1.0, lam)
    if cfg.mu_policy == "equal_lambda":
        return lam
    return cfg.mu_constant


def schedule_update(state: SolverState, cfg: SolverConfig) -> SolverState:
    lam = state.lam / cfg.lambda_decay
    return replace(state, lam=lam, mu=next_mu(lam, cfg))


def _stop_reason(state, prev_j, cfg):
    if state.t >= cfg.t_max:
        return "max_iters"
    if state.t < cfg.min_steps:
        return None
    if np.isfinite(prev_j):
        tol = cfg.eps * abs(prev_j) if cfg.relative_stall else cfg.eps
        if prev_j - state.j < tol:
            return "objective_stall"
    if state.lam < cfg.eps:
        return "lambda_floor"
    return None


def _run(frame, y, cfg, keep_best):
    y = _check_intensities(frame, y)
    state = init_state(frame, y, cfg)
    if state.zero_solution:
        return SolverResult(state.x, np.array([]), state.L, 0, "lambda_floor")

    Q = quadratic_Q(frame, y)
    history = []
    reason = "max_iters" if cfg.t_max <= 0 else None
    while reason is None:
        prev_j = state.j
        lam, mu = state.lam, state.mu
        state = iterate_step(state, frame, y, Q)
        history.append((state.t, lam, mu, state.j, state.L))
        state = schedule_update(state, cfg)
        reason = _stop_reason(state, prev_j, cfg)

    trace = np.array([h[3] for h in history])
    if keep_best:
        return SolverResult(state.best_x, trace, state.best_L, state.t, reason, history)
    return SolverResult(state.x, trace, residual_L(frame, y, state.x), state.t, reason, history)


def run_algorithm1(frame: Frame, y, cfg: SolverConfig = SolverConfig()) -> SolverResult:
    """Iterate until a stopping test fires and return the last iterate."""
    return _run(frame, y, cfg, keep_best=False)


def run_algorithm2(frame: Frame, y, cfg: SolverConfig = SolverConfig()) -> SolverResult:
    """Same iteration as :func:`run_algorithm1`, but return the visited
    iterate (``x0`` included) with the smallest residual ``|y - phi(x)|^2``.
    """
    return _run(frame, y, cfg, keep_best=True)


def reconstruct(frame: Frame, y, cfg: SolverConfig = SolverConfig(), algorithm: int = 2) -> SolverResult:
    if algorithm == 1:
        return run_algorithm1(frame, y, cfg)
    if algorithm == 2:
        return run_algorithm2(frame, y, cfg)
    raise ValueError(f"algorithm must be 1 or 2, got {algorithm!r}")
