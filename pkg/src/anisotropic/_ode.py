"""Adaptive DOP853 stepping with dense output and domain-exit bisection."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import DOP853

from .errors import IntegrationError

EXIT_TIME_RESOLUTION = 1e-10


class _NonFinite(Exception):
    pass


@dataclass(eq=False)
class Trajectory:
    """Step grid, states at the grid points and one dense-output polynomial per step."""

    t: np.ndarray
    y: np.ndarray
    segments: list = field(repr=False)
    exited: bool = False
    exit_time: Optional[float] = None

    @property
    def t_start(self):
        return float(self.t[0])

    @property
    def t_end(self):
        return float(self.t[-1])

    def _segment(self, t):
        ts = self.t
        lo, hi = min(ts[0], ts[-1]), max(ts[0], ts[-1])
        if not (lo - 1e-12 <= t <= hi + 1e-12):
            raise ValueError(f"t={t} outside the integrated interval [{lo}, {hi}]")
        if ts[-1] >= ts[0]:
            i = int(np.searchsorted(ts, t, side="right")) - 1
        else:
            i = int(np.searchsorted(-ts, -t, side="right")) - 1
        return min(max(i, 0), len(self.segments) - 1)

    def __call__(self, t):
        t = float(t)
        if len(self.segments) == 0:
            return np.array(self.y[0])
        return np.asarray(self.segments[self._segment(t)](t), dtype=float)

    def derivative(self, t):
        """Time derivative of the dense-output interpolant (Richardson-extrapolated central difference)."""
        t = float(t)
        i = self._segment(t)
        seg = self.segments[i]
        h = 1e-3 * abs(self.t[i + 1] - self.t[i])

        def central(step):
            return (np.asarray(seg(t + step)) - np.asarray(seg(t - step))) / (2.0 * step)

        return (4.0 * central(0.5 * h) - central(h)) / 3.0

    def midpoints(self):
        return 0.5 * (self.t[1:] + self.t[:-1])


def integrate(
    rhs: Callable,
    t0: float,
    y0,
    t1: float,
    tol: float,
    inside: Optional[Callable] = None,
    max_step: float = np.inf,
) -> Trajectory:
    """Integrate ``y' = rhs(t, y)`` from ``t0`` to ``t1`` with rtol = atol = ``tol``.

    When ``inside(t, y)`` turns false after a step, the exit time is bisected on the
    step's dense output to 1e-10 and the trajectory is truncated there.
    """
    y0 = np.asarray(y0, dtype=float)

    def guarded(t, y):
        out = np.asarray(rhs(t, y), dtype=float)
        if not np.all(np.isfinite(out)):
            raise _NonFinite
        return out

    if inside is not None and not inside(t0, y0):
        raise IntegrationError("initial state lies outside the domain")
    solver = DOP853(guarded, t0, y0, t1, rtol=tol, atol=tol, max_step=max_step)
    ts, ys, segments = [float(t0)], [y0.copy()], []
    exited, exit_time = False, None
    while solver.status == "running":
        t_old = solver.t
        try:
            message = solver.step()
        except _NonFinite:
            exited, exit_time = True, float(t_old)
            break
        if solver.status == "failed":
            raise IntegrationError(f"integration step failed at t={t_old}: {message}")
        dense = solver.dense_output()
        if inside is not None and not inside(solver.t, solver.y):
            good, bad = t_old, solver.t
            while abs(bad - good) > EXIT_TIME_RESOLUTION:
                mid = 0.5 * (good + bad)
                if inside(mid, dense(mid)):
                    good = mid
                else:
                    bad = mid
            if good != t_old:
                ts.append(float(good))
                ys.append(np.asarray(dense(good), dtype=float))
                segments.append(dense)
            exited, exit_time = True, float(good)
            break
        ts.append(float(solver.t))
        ys.append(np.array(solver.y, dtype=float))
        segments.append(dense)
    return Trajectory(np.asarray(ts), np.asarray(ys), segments, exited, exit_time)
