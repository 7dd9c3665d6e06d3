"""Cramer-Rao type lower bounds for ``y = |Fx|^2 + noise``.

All bounds are built on ``R(x) = sum_k <x,f_k>^2 f_k f_k^T``; the Fisher
information of the Gaussian model is ``4 R(x) / sigma^2``. ``R(x)`` is
factored once per call (symmetric eigendecomposition) and every product
with its inverse goes through that factorization.
"""

from dataclasses import dataclass
import json

import numpy as np

from .frame import Frame, _check_signal, analyze, quadratic_R

COND_LIMIT = 1e12


class UnidentifiableError(ArithmeticError):
    """``R(x)`` is singular to working precision.

    ``null_vector`` is a unit direction along which the measurements carry
    no first-order information about ``x``.
    """

    def __init__(self, message, null_vector=None, cond=np.inf):
        super().__init__(message)
        self.null_vector = null_vector
        self.cond = cond


class _RFactor:
    def __init__(self, frame, x):
        x = _check_signal(frame, x)
        R = quadratic_R(frame, x)
        w, V = np.linalg.eigh(R)
        wmax = w[-1]
        cond = np.inf if w[0] <= 0 else wmax / w[0]
        if not wmax > 0 or cond > COND_LIMIT:
            raise UnidentifiableError(
                f"R(x) is singular (condition number {cond:.3g}); "
                "the signal is not identifiable along the null direction",
                null_vector=V[:, 0].copy(), cond=cond,
            )
        self.x, self.R, self.w, self.V, self.cond = x, R, w, V, cond

    def solve(self, B):
        return self.V @ ((self.V.T @ B) / (self.w if np.ndim(B) == 1 else self.w[:, None]))

    def trace_inv(self):
        return float(np.sum(1.0 / self.w))

    def inv_norm(self):
        return float(1.0 / self.w[0])


def _check_sigma(sigma):
    sigma = float(sigma)
    if not (np.isfinite(sigma) and sigma > 0):
        raise ValueError(f"sigma must be positive and finite, got {sigma}")
    return sigma


def fisher_info(frame: Frame, x, sigma: float) -> np.ndarray:
    """Fisher information matrix ``(4 / sigma^2) R(x)``."""
    sigma = _check_sigma(sigma)
    return 4.0 / sigma**2 * quadratic_R(frame, x)


def crlb_matrix(frame: Frame, x, sigma: float) -> np.ndarray:
    """Inverse Fisher information, ``sigma^2/4 R(x)^{-1}``."""
    sigma = _check_sigma(sigma)
    fac = _RFactor(frame, x)
    return sigma**2 / 4 * fac.solve(np.eye(frame.n))


def crlb_trace(frame: Frame, x, sigma: float) -> float:
    """Lower bound on the conditional MSE of unbiased estimators of ``x``."""
    sigma = _check_sigma(sigma)
    return sigma**2 / 4 * _RFactor(frame, x).trace_inv()


def expected_crlb_trace(frame: Frame, sigma: float, trials: int = 10_000, seed: int = 0,
                        cond_limit: float = COND_LIMIT):
    """Monte Carlo average of :func:`crlb_trace` over ``x ~ N(0, I)``.

    Draws whose ``R(x)`` has condition number above ``cond_limit`` are
    rejected rather than allowed to dominate a heavy-tailed mean.

    Returns
    -------
    mean, stderr, rejected : float, float, int
        ``stderr`` is nan when fewer than two draws are accepted.
    """
    sigma = _check_sigma(sigma)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((trials, frame.n))
    F = frame.vectors
    C2 = (X @ F.T) ** 2
    R = np.einsum("sk,ki,kj->sij", C2, F, F)
    w = np.linalg.eigvalsh(R)
    with np.errstate(divide="ignore"):
        cond = np.where(w[:, 0] > 0, w[:, -1] / w[:, 0], np.inf)
    ok = cond <= cond_limit
    rejected = int(trials - ok.sum())
    if not ok.any():
        raise UnidentifiableError("every draw produced a singular R(x)")
    vals = sigma**2 / 4 * np.sum(1.0 / w[ok], axis=1)
    se = float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else float("nan")
    return float(vals.mean()), se, rejected


def lifted_bound(frame: Frame, x, sigma: float) -> float:
    """MSE lower bound for unbiased estimators of the rank-one ``x x^T``.

    ``sigma^2/2 (|x|^2 tr R^{-1} + x^T R^{-1} x)``.
    """
    sigma = _check_sigma(sigma)
    fac = _RFactor(frame, x)
    x = fac.x
    return sigma**2 / 2 * ((x @ x) * fac.trace_inv() + float(x @ fac.solve(x)))


def _delta_parts(fac, frame):
    F = frame.vectors
    G = fac.solve(F.T)                  # columns R^{-1} f_k
    c = F @ fac.x                       # <x, f_k>
    d = np.einsum("kn,nk->k", F, G)     # <R^{-1} f_k, f_k>
    return F, G, c, d


def bias_delta(frame: Frame, x) -> np.ndarray:
    """``delta = sum_k <x,f_k> <R^{-1} f_k, f_k> R^{-1} f_k``.

    The leading-order bias of the maximum-likelihood estimate is
    ``sigma^2/4 * delta``.
    """
    fac = _RFactor(frame, x)
    _, G, c, d = _delta_parts(fac, frame)
    return G @ (c * d)


def _delta_matrix(fac, frame):
    F, G, c, d = _delta_parts(fac, frame)
    M = F @ G                           # M[p, k] = <f_p, R^{-1} f_k>
    cd = c * d
    term1 = (G * d) @ F
    term2 = 2 * (G * (c * (M @ cd))) @ F
    term3 = 2 * G @ ((c[:, None] * (M * M) * c[None, :]).T @ F)
    return term1 - term2 - term3


def delta_matrix(frame: Frame, x) -> np.ndarray:
    """Jacobian ``d delta_j / d x_l`` of :func:`bias_delta`, in closed form."""
    return _delta_matrix(_RFactor(frame, x), frame)


def mle_mean(frame: Frame, x, sigma: float) -> np.ndarray:
    """Asymptotic mean of the ML estimate, ``x + sigma^2/4 delta``."""
    sigma = _check_sigma(sigma)
    x = _check_signal(frame, x)
    return x + sigma**2 / 4 * bias_delta(frame, x)


def _mle_bound(fac, frame, sigma):
    _, G, c, d = _delta_parts(fac, frame)
    delta = G @ (c * d)
    D = _delta_matrix(fac, frame)
    tr_DRinv = float(np.trace(fac.solve(D)))   # tr(D R^-1) = tr(R^-1 D)
    value = sigma**2 / 4 * fac.trace_inv() + sigma**4 / 16 * (delta @ delta + 2 * tr_DRinv)
    return float(value), delta, D


def mle_mse_bound(frame: Frame, x, sigma: float) -> float:
    """Bias-corrected CRLB for the maximum-likelihood estimator.

    ``sigma^2/4 tr R^{-1} + sigma^4/16 (|delta|^2 + 2 tr(Delta R^{-1}))``;
    terms of order ``(sigma |R^{-1}|)^6`` are dropped.
    """
    sigma = _check_sigma(sigma)
    return _mle_bound(_RFactor(frame, x), frame, sigma)[0]


@dataclass
class BoundsReport:
    fisher: np.ndarray
    crlb_trace: float
    lifted_bound: float
    delta: np.ndarray
    delta_matrix: np.ndarray
    mle_mse_bound: float
    mle_mean: np.ndarray
    sigma: float
    similarity: float   # sigma * |R^{-1}|; the expansions need this small

    def to_dict(self) -> dict:
        out = {}
        for k, v in self.__dict__.items():
            out[k] = v.tolist() if isinstance(v, np.ndarray) else v
        return out

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def bounds_report(frame: Frame, x, sigma: float) -> BoundsReport:
    sigma = _check_sigma(sigma)
    fac = _RFactor(frame, x)
    x = fac.x
    mle, delta, D = _mle_bound(fac, frame, sigma)
    return BoundsReport(
        fisher=4.0 / sigma**2 * fac.R,
        crlb_trace=sigma**2 / 4 * fac.trace_inv(),
        lifted_bound=sigma**2 / 2 * ((x @ x) * fac.trace_inv() + float(x @ fac.solve(x))),
        delta=delta,
        delta_matrix=D,
        mle_mse_bound=mle,
        mle_mean=x + sigma**2 / 4 * delta,
        sigma=sigma,
        similarity=sigma * fac.inv_norm(),
    )


def neg_log_likelihood(frame: Frame, x, y, sigma: float):
    """``-log p(y | x)`` up to the additive constant; ``y`` may be a batch (..., m)."""
    r = np.asarray(y, dtype=float) - analyze(frame, x)
    return np.sum(r * r, axis=-1) / (2 * sigma**2)
