"""Monte Carlo SNR sweeps comparing reconstruction error with the bounds.

Randomness is keyed, never sequential: the instance comes from
``default_rng([master_seed, ...])`` and the noise of trial ``t`` at grid
point ``i`` from a Philox generator seeded with ``(master_seed, i, t)``.
Results therefore do not depend on how trials are spread over workers.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
import csv
import json
import os

import numpy as np

from .crlb import UnidentifiableError, crlb_trace, lifted_bound, mle_mse_bound
from .frame import Frame, analyze, equiv_distance
from .solver import SolverConfig, SolverError, reconstruct

DEFAULT_SNR_GRID = tuple(float(s) for s in range(-20, 81, 10))
SIGN_CONVENTIONS = ("fixed_first_positive", "oracle")


def sigma_for_snr(frame: Frame, x, snr_db: float) -> float:
    """Noise level giving ``SNR = sum_k <x,f_k>^4 / (m sigma^2)`` at ``snr_db``."""
    energy = float(np.sum(analyze(frame, x) ** 2))
    if energy == 0:
        raise ValueError("phi(x) is identically zero; SNR is undefined")
    return float(np.sqrt(energy / (frame.m * 10 ** (snr_db / 10))))


def gen_instance(n: int, m: int, seed) -> tuple:
    """Gaussian frame and signal; the signal's first coordinate is made positive.

    ``seed`` is anything :func:`numpy.random.default_rng` accepts, e.g. an
    int or a tuple of ints.
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    rng = np.random.default_rng(seed)
    F = rng.standard_normal((m, n))
    x = rng.standard_normal(n)
    while x[0] == 0:
        x = rng.standard_normal(n)
    if x[0] < 0:
        x = -x
    return Frame(F), x


def noise_rng(master_seed, snr_index, trial_index):
    ss = np.random.SeedSequence([int(master_seed), int(snr_index), int(trial_index)])
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class SweepConfig:
    n: int = 10
    redundancy: float = 3
    snr_grid_db: tuple = DEFAULT_SNR_GRID
    trials: int = None                    # None: 100 for algorithm 1, 1000 for algorithm 2
    algorithm: int = 2
    sign_convention: str = "fixed_first_positive"
    master_seed: int = 0
    solver: SolverConfig = field(default_factory=SolverConfig)
    instance_per_point: bool = False
    instance_per_trial: bool = False

    def __post_init__(self):
        if self.trials is None:
            object.__setattr__(self, "trials", 100 if self.algorithm == 1 else 1000)
        object.__setattr__(self, "snr_grid_db", tuple(float(s) for s in self.snr_grid_db))
        if self.algorithm not in (1, 2):
            raise ValueError("algorithm must be 1 or 2")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.snr_grid_db:
            raise ValueError("snr_grid_db must not be empty")
        if self.sign_convention not in SIGN_CONVENTIONS:
            raise ValueError(f"sign_convention must be one of {SIGN_CONVENTIONS}")
        m = self.redundancy * self.n
        if self.n < 1 or m != int(m) or m < 1:
            raise ValueError(f"redundancy * n = {m} must be a positive integer")

    @property
    def m(self) -> int:
        return int(self.redundancy * self.n)


@dataclass
class SweepRow:
    n: int
    m: int
    snr_db: float
    sigma: float
    trials: int
    mse: float
    bias_sq: float
    variance: float
    crlb_trace: float
    mle_crlb: float
    lifted_bound: float
    mean_iterations: float
    rejected_trials: int


CSV_HEADER = [f.name for f in fields(SweepRow)]
_INT_COLUMNS = {"n", "m", "trials", "rejected_trials"}


@dataclass
class TrialRecord:
    snr_index: int
    trial: int
    sq_error: float
    iterations: int
    residual: float
    stop_reason: str
    rejected: bool = False


@dataclass
class SweepResult:
    rows: list
    trials: list
    config: SweepConfig = None


def _align(est, x, convention):
    if convention == "oracle":
        _, s = equiv_distance(x, est)
        return s * est
    # first coordinate positive; exact zero leaves the estimate as is
    return -est if est[0] < 0 else est


def _trial(task):
    cfg, i, t, frame, x, sigma = task
    if cfg.instance_per_trial:
        frame, x = gen_instance(cfg.n, cfg.m, (cfg.master_seed, i, t, 1))
        sigma = sigma_for_snr(frame, x, cfg.snr_grid_db[i])
    rng = noise_rng(cfg.master_seed, i, t)
    y = analyze(frame, x) + sigma * rng.standard_normal(frame.m)
    try:
        res = reconstruct(frame, y, cfg.solver, cfg.algorithm)
    except SolverError:
        return TrialRecord(i, t, float("nan"), 0, float("nan"), "error", True), None, x
    est = _align(res.estimate, x, cfg.sign_convention)
    err = est - x
    rec = TrialRecord(i, t, float(err @ err), res.iterations, res.residual, res.stop_reason)
    return rec, est, x


def _bounds(frame, x, sigma):
    try:
        return crlb_trace(frame, x, sigma), mle_mse_bound(frame, x, sigma), lifted_bound(frame, x, sigma)
    except UnidentifiableError:
        return float("nan"), float("nan"), float("nan")


def _aggregate(cfg, i, sigma, frame, x, outcomes):
    recs = [o[0] for o in outcomes]
    good = [o for o in outcomes if not o[0].rejected]
    rejected = len(outcomes) - len(good)
    if good:
        E = np.array([o[1] for o in good])
        X = np.array([o[2] for o in good])
        err = E - X
        mse = float(np.mean(np.sum(err**2, axis=1)))
        mean_err = err.mean(axis=0)
        bias_sq = float(mean_err @ mean_err)
        variance = float(np.mean(np.sum((err - mean_err) ** 2, axis=1)))
        mean_it = float(np.mean([o[0].iterations for o in good]))
    else:
        mse = bias_sq = variance = mean_it = float("nan")
    if cfg.instance_per_trial:
        # bounds and sigma averaged over the per-trial instances
        b = []
        for r in recs:
            f_t, x_t = gen_instance(cfg.n, cfg.m, (cfg.master_seed, i, r.trial, 1))
            s_t = sigma_for_snr(f_t, x_t, cfg.snr_grid_db[i])
            b.append((s_t,) + _bounds(f_t, x_t, s_t))
        sigma, crlb, mle, lifted = (float(v) for v in np.mean(b, axis=0))
    else:
        crlb, mle, lifted = _bounds(frame, x, sigma)
    row = SweepRow(cfg.n, cfg.m, cfg.snr_grid_db[i], sigma, cfg.trials, mse, bias_sq, variance,
                   crlb, mle, lifted, mean_it, rejected)
    return row, recs


def run_sweep(cfg: SweepConfig, jobs: int = 1) -> SweepResult:
    """Run every trial at every grid point and aggregate per point.

    Without the ``instance_per_*`` flags one (frame, x) pair, drawn from
    ``master_seed``, is shared by the whole grid and only the noise varies.
    Errors are measured after sign alignment: ``fixed_first_positive`` flips
    the estimate so its first coordinate is positive, ``oracle`` picks the
    sign closest to the true signal. Trials where the solver raises are
    counted in ``rejected_trials`` and left out of the averages.
    """
    base = gen_instance(cfg.n, cfg.m, cfg.master_seed)
    tasks, meta = [], []
    for i, snr in enumerate(cfg.snr_grid_db):
        frame, x = gen_instance(cfg.n, cfg.m, (cfg.master_seed, i)) if cfg.instance_per_point else base
        sigma = sigma_for_snr(frame, x, snr)
        meta.append((sigma, frame, x))
        tasks.extend((cfg, i, t, frame, x, sigma) for t in range(cfg.trials))

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_trial, tasks, chunksize=max(1, len(tasks) // (8 * jobs))))
    else:
        outcomes = [_trial(task) for task in tasks]

    rows, records = [], []
    for i, (sigma, frame, x) in enumerate(meta):
        chunk = outcomes[i * cfg.trials:(i + 1) * cfg.trials]
        row, recs = _aggregate(cfg, i, sigma, frame, x, chunk)
        rows.append(row)
        records.extend(recs)
    return SweepResult(rows, records, cfg)


def _fmt(name, value):
    if name in _INT_COLUMNS:
        return str(int(value))
    return f"{float(value):.17g}"


def rows_to_csv(rows) -> str:
    lines = [",".join(CSV_HEADER)]
    for r in rows:
        d = asdict(r)
        lines.append(",".join(_fmt(k, d[k]) for k in CSV_HEADER))
    return "\n".join(lines) + "\n"


def read_csv(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {reader.fieldnames}")
        return [SweepRow(**{k: int(v) if k in _INT_COLUMNS else float(v) for k, v in rec.items()})
                for rec in reader]


def _svg_plot(rows, series, path, title):
    W, H, pad = 640, 420, 60
    snr = np.array([r.snr_db for r in rows])
    vals = {s: np.array([getattr(r, s) for r in rows], dtype=float) for s in series}
    pos = np.concatenate([v[np.isfinite(v) & (v > 0)] for v in vals.values()])
    if pos.size == 0:
        pos = np.array([1.0])
    lo, hi = np.floor(np.log10(pos.min())), np.ceil(np.log10(pos.max()))
    if hi == lo:
        hi = lo + 1
    x0, x1 = snr.min(), snr.max()
    if x1 == x0:
        x1 = x0 + 1

    def px(s):
        return pad + (s - x0) / (x1 - x0) * (W - 2 * pad)

    def py(v):
        return H - pad - (np.log10(v) - lo) / (hi - lo) * (H - 2 * pad)

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<text x="{W / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<rect x="{pad}" y="{pad}" width="{W - 2 * pad}" height="{H - 2 * pad}" fill="none" stroke="black"/>',
    ]
    for s in snr:
        out.append(f'<text x="{px(s):.1f}" y="{H - pad + 16}" text-anchor="middle" font-size="10">{s:g}</text>')
    for e in range(int(lo), int(hi) + 1):
        out.append(f'<text x="{pad - 6}" y="{py(10.0**e):.1f}" text-anchor="end" font-size="10">1e{e}</text>')
    out.append(f'<text x="{W / 2}" y="{H - 15}" text-anchor="middle" font-size="12">SNR [dB]</text>')
    for k, s in enumerate(series):
        v = vals[s]
        ok = np.isfinite(v) & (v > 0)
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(snr[ok], v[ok]))
        c = colors[k % len(colors)]
        out.append(f'<polyline data-series="{s}" fill="none" stroke="{c}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{W - pad - 4}" y="{pad + 16 * (k + 1)}" text-anchor="end" '
                   f'font-size="11" fill="{c}">{s}</text>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")


def emit_results(rows, path, format: str = "csv", plot_dir=None) -> list:
    """Write sweep rows as CSV or JSON, plus an optional SVG plot.

    The plot shows ``mse``, ``crlb_trace`` and ``mle_crlb`` against SNR on a
    logarithmic vertical axis. Returns the list of files written.
    """
    if not rows:
        raise ValueError("no rows to write")
    if format == "csv":
        text = rows_to_csv(rows)
    elif format == "json":
        text = json.dumps([asdict(r) for r in rows], indent=1) + "\n"
    else:
        raise ValueError(f"unknown format {format!r}")
    with open(path, "w", newline="") as fh:
        fh.write(text)
    written = [str(path)]
    if plot_dir:
        written.extend(write_plots(rows, plot_dir))
    return written


def write_plots(rows, plot_dir) -> list:
    os.makedirs(plot_dir, exist_ok=True)
    svg = os.path.join(plot_dir, f"mse_vs_snr_n{rows[0].n}.svg")
    _svg_plot(rows, ("mse", "crlb_trace", "mle_crlb"), svg,
              f"MSE and lower bounds, n={rows[0].n}, m={rows[0].m}")
    return [svg]
