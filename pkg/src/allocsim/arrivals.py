"""Poisson arrival stream simulation and ground-truth type probabilities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ZeroTotalRate
from .model import (
    GRID_DT_DEFAULT,
    ArrivalModel,
    NonstationaryArrivals,
    RateFunction,
    StationaryArrivals,
    substream,
)

__all__ = [
    "ArrivalSequence",
    "sample_stationary_stream",
    "sample_nonstationary_stream",
    "sample_stream",
    "type_probability",
    "type_probability_matrix",
    "rate_extrema",
    "write_arrivals_csv",
]


@dataclass(frozen=True, eq=False)
class ArrivalSequence:
    """Realized arrival stream: times in hours, 0-based type indices."""

    times: np.ndarray
    types: np.ndarray
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "types", np.asarray(self.types, dtype=np.int64))
        if self.times.shape != self.types.shape:
            raise ValueError("times and types must have equal length")
        if self.times.size > 1 and np.any(np.diff(self.times) < 0.0):
            raise ValueError("arrival times must be non-decreasing")

    def __len__(self) -> int:
        return self.times.size

    def slice(self, lo: int, hi: int) -> "ArrivalSequence":
        """Contiguous sub-stream [lo, hi), keeping the originating seed."""
        return ArrivalSequence(
            times=self.times[lo:hi], types=self.types[lo:hi], seed=self.seed
        )


def sample_stationary_stream(rates: np.ndarray, count: int, seed: int) -> ArrivalSequence:
    """Draw exactly `count` arrivals from superposed stationary Poisson processes.

    Inter-arrival gaps are Exp(Σλ); each arrival's type is categorical with
    probability λ_j / Σλ, independent of the gaps.
    """
    rates = np.asarray(rates, dtype=float)
    total = rates.sum()
    if total <= 0.0:
        raise ZeroTotalRate("stationary rates sum to zero")
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = substream(seed, "stream")
    times = np.cumsum(rng.exponential(1.0 / total, size=count))
    # inverse-CDF type draw keeps the stream reproducible across numpy versions
    cdf = np.cumsum(rates / total)
    cdf[-1] = 1.0
    types = np.searchsorted(cdf, rng.random(count), side="right")
    return ArrivalSequence(times=times, types=types, seed=int(seed))


def _thin_one_type(fn: RateFunction, rng: np.random.Generator, grid_dt: float) -> np.ndarray:
    """Thinning sampler for one type, piece by piece.

    The proposal rate per piece is the grid maximum; acceptance compares
    u·λ̄ ≤ λ(t) so a rate marginally above the grid max is still accepted.
    """
    out: list[float] = []
    for piece in fn.pieces:
        lo, hi = rate_extrema(
            RateFunction((piece,)), (piece.t_from, piece.t_to), grid_dt
        )
        del lo
        lam_bar = hi
        if lam_bar <= 0.0:
            continue
        t = piece.t_from
        while True:
            t += rng.exponential(1.0 / lam_bar)
            if t >= piece.t_to:
                break
            if rng.random() * lam_bar <= piece.value(t):
                out.append(t)
    return np.asarray(out, dtype=float)


def sample_nonstationary_stream(
    rate_fns: tuple[RateFunction, ...],
    t0: float,
    t_end: float,
    seed: int,
    grid_dt: float = GRID_DT_DEFAULT,
) -> ArrivalSequence:
    """Sample a merged non-homogeneous Poisson stream over [t0, t_end].

    Each type is thinned against its own piecewise majorant on an independent
    substream keyed by (seed, type index), so adding or reordering other
    types never perturbs a given type's draws. The merged stream is sorted by
    time (ties broken by type index).
    """
    all_times = []
    all_types = []
    for j, fn in enumerate(rate_fns):
        if abs(fn.t0 - t0) > 1e-9 or abs(fn.t_end - t_end) > 1e-9:
            raise ValueError(f"rate function {j} does not cover [{t0}, {t_end}]")
        fn.check_nonnegative(grid_dt)
        rng = substream(seed, "stream", j)
        tj = _thin_one_type(fn, rng, grid_dt)
        all_times.append(tj)
        all_types.append(np.full(tj.size, j, dtype=np.int64))
    times = np.concatenate(all_times) if all_times else np.empty(0)
    types = np.concatenate(all_types) if all_types else np.empty(0, dtype=np.int64)
    order = np.lexsort((types, times))
    return ArrivalSequence(times=times[order], types=types[order], seed=int(seed))


def sample_stream(model: ArrivalModel, count: int, seed: int,
                  grid_dt: float = GRID_DT_DEFAULT) -> ArrivalSequence:
    """Sample from either arrival model; `count` only applies to stationary."""
    if isinstance(model, StationaryArrivals):
        return sample_stationary_stream(model.rates, count, seed)
    return sample_nonstationary_stream(
        model.rate_fns, model.t0, model.t_end, seed, grid_dt
    )


def type_probability(model: ArrivalModel, t: float) -> np.ndarray:
    """Ground-truth probability that the next arrival at time t is each type."""
    if isinstance(model, StationaryArrivals):
        lam = model.rates
    else:
        lam = np.array([fn.value(t) for fn in model.rate_fns])
    total = lam.sum()
    if total <= 0.0:
        raise ZeroTotalRate(f"total rate is zero at t={t}")
    return lam / total


def type_probability_matrix(model: ArrivalModel, times: np.ndarray) -> np.ndarray:
    """Vectorized type_probability: rows are φ(t) for each requested time."""
    times = np.asarray(times, dtype=float)
    if isinstance(model, StationaryArrivals):
        row = model.rates / model.rates.sum()
        return np.tile(row, (times.size, 1))
    lam = np.stack([fn.value(times) for fn in model.rate_fns], axis=1)
    totals = lam.sum(axis=1)
    if np.any(totals <= 0.0):
        t_bad = float(times[int(np.argmin(totals))])
        raise ZeroTotalRate(f"total rate is zero at t={t_bad}")
    return lam / totals[:, None]


def rate_extrema(
    rate_fn: RateFunction, window: tuple[float, float], grid_dt: float
) -> tuple[float, float]:
    """Grid-approximate (min, max) of the rate over [a, b].

    The grid is {a, a+grid_dt, ...} plus any piece boundaries inside the
    window plus b itself. Extrema between grid points are not seen; callers
    choose grid_dt accordingly.
    """
    a, b = window
    if not a < b:
        raise ValueError(f"window [{a}, {b}] is empty")
    pts = np.arange(a, b, grid_dt)
    pts = pts[pts < b]
    bounds = rate_fn.boundaries
    inner = bounds[(bounds > a) & (bounds < b)]
    pts = np.unique(np.concatenate([pts, inner, [b]]))
    vals = rate_fn.value(pts)
    return float(vals.min()), float(vals.max())


def write_arrivals_csv(seq: ArrivalSequence, path) -> None:
    """Arrival-trace CSV: t,type (times at 9 significant digits)."""
    with open(path, "w", newline="") as fh:
        fh.write("t,type\n")
        for t, j in zip(seq.times, seq.types):
            fh.write(f"{t:.9g},{int(j)}\n")
