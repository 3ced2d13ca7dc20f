"""Latency between two recordings of the same motion."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgument


@dataclass
class MotionTrace:
    t: np.ndarray  # seconds, strictly increasing
    x: np.ndarray  # position along the motion axis

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.x = np.asarray(self.x, dtype=float)
        if self.t.ndim != 1 or self.t.shape != self.x.shape or len(self.t) < 2:
            raise InvalidArgument("trace needs matching 1-D time and position arrays")
        if np.any(np.diff(self.t) <= 0):
            raise InvalidArgument("trace timestamps must be strictly increasing")

    @property
    def dt(self):
        return float(np.median(np.diff(self.t)))

    @property
    def midrange_sum(self):
        return float(self.x.max() + self.x.min())


def amplitude_adjusted(reference: MotionTrace, test: MotionTrace) -> np.ndarray:
    """Test positions shifted so both traces share the same midrange."""
    return test.x + (reference.midrange_sum - test.midrange_sum) / 2


def estimate_latency(reference: MotionTrace, test: MotionTrace, T_mov: float) -> float:
    """Delay of ``test`` behind ``reference`` in seconds.

    The test trace is shifted to the reference's midrange (which removes
    constant offsets) and linearly interpolated onto the reference timestamps
    inside the overlap. The delay ``delta`` in ``[0, T_mov)``, in whole reference samples,
    minimising the mean of ``(ref(t - delta) - test(t))^2`` wins; a parabola
    through the best grid point and its neighbours refines it.
    """
    if not T_mov > 0:
        raise InvalidArgument("T_mov must be positive")
    t0 = max(reference.t[0], test.t[0])
    t1 = min(reference.t[-1], test.t[-1])
    if T_mov >= t1 - t0:
        raise InvalidArgument(f"T_mov={T_mov} s is not shorter than the {t1 - t0:.6g} s overlap")
    dt = reference.dt
    inside = (reference.t >= t0) & (reference.t <= t1)
    grid = reference.t[inside]
    ref = reference.x[inside]
    tst = np.interp(grid, test.t, amplitude_adjusted(reference, test))
    n_shift = int(math.ceil(T_mov / dt))
    n_shift = min(n_shift, len(grid) - 2)
    cost = np.array([np.mean((ref[:len(grid) - k] - tst[k:]) ** 2) for k in range(n_shift)])
    k = int(np.argmin(cost))
    frac = 0.0
    if 0 < k < len(cost) - 1:
        c0, c1, c2 = cost[k - 1], cost[k], cost[k + 1]
        den = c0 - 2 * c1 + c2
        if den > 0:
            frac = 0.5 * (c0 - c2) / den
    return float((k + frac) * dt)
