"""Frames, the magnitude analysis map and injectivity diagnostics.

Signals and intensity vectors are plain 1-d float arrays. A :class:`Frame`
wraps the ``(m, n)`` matrix whose rows are the frame vectors.
"""

from dataclasses import dataclass, field
from itertools import combinations
import json
from math import comb

import numpy as np
from scipy.optimize import minimize


class DimensionError(ValueError):
    """Raised when array shapes do not agree with the frame."""


class EnumerationTooLarge(ValueError):
    """Raised when an exhaustive combinatorial check exceeds its cap."""


@dataclass(frozen=True)
class Frame:
    """Ordered family of ``m`` real vectors in R^n, stored as rows."""

    vectors: np.ndarray

    def __post_init__(self):
        F = np.array(self.vectors, dtype=float)
        if F.ndim != 2 or F.shape[0] < 1 or F.shape[1] < 1:
            raise DimensionError(f"frame must be a non-empty (m, n) matrix, got shape {F.shape}")
        if not np.all(np.isfinite(F)):
            raise ValueError("frame vectors must be finite")
        F.setflags(write=False)
        object.__setattr__(self, "vectors", F)

    @property
    def m(self) -> int:
        return self.vectors.shape[0]

    @property
    def n(self) -> int:
        return self.vectors.shape[1]

    @property
    def is_frame(self) -> bool:
        """True when the rows span R^n."""
        return _rank(self.vectors) == self.n

    def __eq__(self, other):
        return isinstance(other, Frame) and np.array_equal(self.vectors, other.vectors)

    def __hash__(self):
        return hash(self.vectors.tobytes())

    def to_dict(self) -> dict:
        return {"n": self.n, "m": self.m, "vectors": self.vectors.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Frame":
        try:
            n, m, rows = int(d["n"]), int(d["m"]), d["vectors"]
        except KeyError as e:
            raise ValueError(f"frame JSON is missing field {e.args[0]!r}") from None
        F = np.asarray(rows, dtype=float)
        if F.shape != (m, n):
            raise DimensionError(f"frame JSON declares (m, n) = ({m}, {n}) but 'vectors' has shape {F.shape}")
        return cls(F)


@dataclass
class InjectivityVerdict:
    """Outcome of an injectivity test.

    ``witness`` holds the 0-based row indices of a subset ``S`` such that
    neither ``S`` nor its complement spans R^n.
    """

    injective: bool
    method: str
    witness: tuple = None
    checked: int = field(default=0, repr=False)

    def __bool__(self):
        return self.injective


def _rank(A):
    # numpy's default cutoff: max(rows, cols) * eps * sigma_max, per matrix
    return np.linalg.matrix_rank(A)


def _check_signal(frame, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (frame.n,):
        raise DimensionError(f"signal has shape {x.shape}, frame expects ({frame.n},)")
    return x


def _check_intensities(frame, y):
    y = np.asarray(y, dtype=float)
    if y.shape != (frame.m,):
        raise DimensionError(f"intensities have shape {y.shape}, frame expects ({frame.m},)")
    return y


def analyze(frame: Frame, x) -> np.ndarray:
    """Squared frame coefficients ``|<x, f_k>|^2`` for k = 1..m."""
    x = _check_signal(frame, x)
    return (frame.vectors @ x) ** 2


def frame_bounds(frame: Frame) -> tuple:
    """Smallest and largest eigenvalue of the frame operator ``F^T F``."""
    w = np.linalg.eigvalsh(frame.vectors.T @ frame.vectors)
    return float(max(w[0], 0.0)), float(w[-1])


def quadratic_Q(frame: Frame, y) -> np.ndarray:
    """``sum_k y_k f_k f_k^T``. Indefinite whenever some ``y_k < 0``."""
    y = _check_intensities(frame, y)
    F = frame.vectors
    Q = (F.T * y) @ F
    return 0.5 * (Q + Q.T)


def quadratic_R(frame: Frame, x) -> np.ndarray:
    """``sum_k <x, f_k>^2 f_k f_k^T``, the signal-weighted frame operator."""
    return quadratic_Q(frame, analyze(frame, x))


def lambda_min_R(frame: Frame, x) -> float:
    return float(np.linalg.eigvalsh(quadratic_R(frame, x))[0])


def _subsets_to_check(m):
    # Every split {S, S^c} once: |S| < m/2, plus the half-size subsets containing row 0.
    for k in range(0, m // 2 + 1):
        for S in combinations(range(m), k):
            if 2 * k == m and S[0] != 0:
                continue
            yield S


def partition_injectivity_check(frame: Frame, max_rows: int = 24) -> InjectivityVerdict:
    """Exhaustive two-set partition test for injectivity of the magnitude map.

    The map ``x -> |Fx|^2`` is injective on R^n modulo sign exactly when,
    for every split of the rows into ``S`` and its complement, at least one
    side spans R^n. All ``2^(m-1)`` splits are enumerated.

    Parameters
    ----------
    frame : Frame
    max_rows : int
        Refuse frames with more rows than this.

    Returns
    -------
    InjectivityVerdict
        On failure ``witness`` is the first violating subset found, in
        order of increasing size.
    """
    m, n = frame.m, frame.n
    if m > max_rows:
        raise EnumerationTooLarge(
            f"m={m} rows is too large for exhaustive check (cap {max_rows}); "
            "use full_spark_check for a sufficient condition when m >= 2n-1"
        )
    F = frame.vectors
    all_rows = np.arange(m)
    checked = 0
    for S in _subsets_to_check(m):
        checked += 1
        mask = np.zeros(m, dtype=bool)
        mask[list(S)] = True
        S_spans = len(S) >= n and _rank(F[mask]) == n
        if S_spans:
            continue
        rest = all_rows[~mask]
        if len(rest) >= n and _rank(F[rest]) == n:
            continue
        return InjectivityVerdict(False, "partition", tuple(S), checked)
    return InjectivityVerdict(True, "partition", None, checked)


def full_spark_check(frame: Frame, max_subsets: int = 10**6, batch: int = 4096):
    """Whether every ``n`` rows of the frame are linearly independent.

    Returns
    -------
    (bool, tuple or None)
        The verdict and, when it is False, the first dependent row subset
        (0-based, lexicographic order).
    """
    m, n = frame.m, frame.n
    if m < n:
        return False, tuple(range(m))
    total = comb(m, n)
    if total > max_subsets:
        raise EnumerationTooLarge(f"C({m}, {n}) = {total} subsets exceeds the cap of {max_subsets}")
    F = frame.vectors
    it = combinations(range(m), n)
    while True:
        chunk = [c for _, c in zip(range(batch), it)]
        if not chunk:
            return True, None
        idx = np.array(chunk)
        ranks = np.linalg.matrix_rank(F[idx])
        bad = np.flatnonzero(ranks < n)
        if bad.size:
            return False, tuple(int(i) for i in idx[bad[0]])


def a0_estimate(frame: Frame, num_samples: int = 2000, seed: int = 0,
                refine: int = 5, directions=None) -> float:
    """Sampled upper estimate of the constant ``a0``.

    ``a0`` is the minimum of ``sum_k <x,f_k>^2 <y,f_k>^2`` over unit ``x, y``.
    The minimum over ``y`` is the smallest eigenvalue of ``R(x)``, so only the
    direction ``x`` is searched: ``num_samples`` uniform points on the sphere,
    then a Nelder-Mead polish from the ``refine`` best of them. Every
    evaluated point is a feasible direction, so the result never falls
    below the true constant.

    ``directions``, when given, replaces the random sample (rows are
    normalised before use).
    """
    if num_samples < 1:
        raise ValueError("num_samples must be >= 1")
    n = frame.n
    if directions is not None:
        X = np.atleast_2d(np.asarray(directions, dtype=float))
    else:
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((num_samples, n))
    X = X / np.linalg.norm(X, axis=1, keepdims=True)

    C2 = (X @ frame.vectors.T) ** 2
    R = np.einsum("sk,ki,kj->sij", C2, frame.vectors, frame.vectors)
    vals = np.linalg.eigvalsh(R)[:, 0]
    best = float(vals.min())

    if directions is None and refine > 0:
        def f(z):
            nz = np.linalg.norm(z)
            if nz == 0:
                return np.inf
            return lambda_min_R(frame, z / nz)

        for i in np.argsort(vals)[:refine]:
            res = minimize(f, X[i], method="Nelder-Mead",
                           options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000 * n})
            best = min(best, float(res.fun))
    return max(best, 0.0)


def equiv_distance(a, b) -> tuple:
    """Distance between sign classes ``{a, -a}`` and ``{b, -b}``.

    Returns ``(dist, sign)`` where ``sign * b`` is the representative of
    ``b`` closest to ``a``; exact ties give ``+1``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionError(f"shapes {a.shape} and {b.shape} differ")
    dm = float(np.linalg.norm(a - b))
    dp = float(np.linalg.norm(a + b))
    if dp < dm:
        return dp, -1
    return dm, 1


def _reject_constant(name):
    raise ValueError(f"non-finite number {name} is not allowed")


def loads(text: str) -> dict:
    """``json.loads`` that refuses NaN and Infinity."""
    return json.loads(text, parse_constant=_reject_constant)


def _finite_vector(values, what):
    v = np.asarray(values, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"{what} must be a flat list of numbers")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{what} must be finite")
    return v


def signal_to_dict(x) -> dict:
    return {"coords": np.asarray(x, dtype=float).tolist()}


def signal_from_dict(d: dict) -> np.ndarray:
    if "coords" not in d:
        raise ValueError("signal JSON is missing field 'coords'")
    return _finite_vector(d["coords"], "coords")


def intensities_to_dict(y) -> dict:
    return {"values": np.asarray(y, dtype=float).tolist()}


def intensities_from_dict(d: dict) -> np.ndarray:
    if "values" not in d:
        raise ValueError("measurement JSON is missing field 'values'")
    return _finite_vector(d["values"], "values")


def read_frame(path) -> Frame:
    with open(path) as fh:
        return Frame.from_dict(loads(fh.read()))


def read_signal(path) -> np.ndarray:
    with open(path) as fh:
        return signal_from_dict(loads(fh.read()))


def read_intensities(path) -> np.ndarray:
    with open(path) as fh:
        return intensities_from_dict(loads(fh.read()))
