"""Delay equation for the correlation parameter.

The dynamical law is

    d rho_d(t) / dt = -(Gamma / tau) * [rho_d(t - tau) - rho_target(t)]

with constant history on t < 0.  Gamma = 4 g^2 tau is the dimensionless gain
and tau the light-travel delay across the setup.  In units of tau the
equation depends on Gamma alone, so every trajectory rescales exactly with
tau.  The dominant characteristic root solves lam = -Gamma exp(-lam):
oscillatory for Gamma > 1/e, divergent for Gamma > pi/2.

Integration scheme
------------------
Method of steps on a uniform grid with dt an exact divisor of tau, so every
delayed lookup lands on a stored grid point.  Because the right-hand side
does not involve the *current* value, the update over one cell is a pure
quadrature of grid samples of the RHS; each cell is integrated with the
4-point Newton-Cotes cell rules (interior stencil -1/13/13/-1 over 24,
one-sided at the start and at each tau-chunk end), giving a global 4th-order
explicit scheme with no interpolation of the delayed term.  Solution kinks
propagate at multiples of tau and land on chunk boundaries, where the
stencils are one-sided, so the formal order survives them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError

# cell-integral weights for a cubic through 4 consecutive samples; the
# interior cells use the centered pattern (-1, 13, 13, -1)/24 inline
_W_FWD = np.array([9.0, 19.0, -5.0, 1.0]) / 24.0  # nodes m .. m+3
_W_BWD = np.array([1.0, -5.0, 19.0, 9.0]) / 24.0  # nodes m-2 .. m+1

DIVERGENCE_AMPLITUDE = 2.5  # |rho_d - target| far beyond the physical 1/4 scale
ENVELOPE_RATIO_THRESHOLD = 1.05


@dataclass(frozen=True)
class DdeParams:
    gamma: float
    tau: float
    dt: float
    history_init: float

    def __post_init__(self):
        if self.gamma <= 0:
            raise ConfigError("gamma must be positive")
        if self.tau <= 0 or self.dt <= 0:
            raise ConfigError("tau and dt must be positive")
        ratio = self.tau / self.dt
        n = round(ratio)
        if n < 100 or abs(ratio - n) > 1e-9 * max(1.0, ratio):
            raise ConfigError("dt must equal tau / N for integer N >= 100")

    @property
    def steps_per_tau(self) -> int:
        return round(self.tau / self.dt)


@dataclass
class RhoDTrajectory:
    """Uniform-grid solution plus the target / complementary-target tracks."""

    t0: float
    dt: float
    rho_d: np.ndarray
    rho_target: np.ndarray
    rho_no_target: np.ndarray
    diverged: bool = False

    @property
    def t(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.rho_d))

    @property
    def duration(self) -> float:
        return self.dt * (len(self.rho_d) - 1)

    def deviation(self) -> np.ndarray:
        """rho_d minus the instantaneous relaxation target: the transient
        the experiment is designed to detect (no settings square wave)."""
        return self.rho_d - self.rho_target


@dataclass(frozen=True)
class StepResponse:
    decay_time: float
    period: float
    diverged: bool
    n_maxima: int = 0

    @property
    def oscillatory(self) -> bool:
        return not math.isnan(self.period)


def _integrate_grid(
    gamma: float, tau: float, dt: float, history: float, target: np.ndarray
) -> np.ndarray:
    """Advance x through n = len(target)-4 cells; x(t<=0) = history.

    ``target`` carries 3 extra trailing nodes so the one-sided stencils of a
    short final chunk never run out of data.
    """
    n = len(target) - 4
    if n < 4:
        raise ConfigError("need at least 4 integration cells")
    n_delay = round(tau / dt)
    rate = -gamma / tau

    x = np.empty(n + 1)
    x[0] = history
    f = np.empty(n + 4)

    for cs in range(0, n, n_delay):
        ce = min(cs + n_delay, n)
        # RHS samples for this chunk; every delayed lookup is already known.
        # A short final chunk (< 4 cells) borrows up to 3 trailing nodes so
        # its one-sided stencils have data; their delayed indices still lie
        # at least n_delay - 6 cells behind the solved region.
        fe = ce + 3 if (ce == n and ce - cs < 4) else ce
        js = np.arange(cs, fe + 1)
        delayed = np.where(js >= n_delay, x[np.maximum(js - n_delay, 0)], history)
        f[cs : fe + 1] = rate * (delayed - target[cs : fe + 1])

        # solution kinks sit at the chunk boundaries, so no stencil may
        # straddle them: forward rule for the first cell, backward for the
        # last, centered in between -- every lookup stays in [cs, ce]
        inc = np.empty(ce - cs)
        m0, m1 = cs + 1, ce - 2
        if m1 >= m0:
            seg = f[m0 - 1 : m1 + 3]
            inc[1 : m1 - cs + 1] = (dt / 24.0) * (
                -seg[:-3] + 13.0 * seg[1:-2] + 13.0 * seg[2:-1] - seg[3:]
            )
        inc[0] = dt * (_W_FWD @ f[cs : cs + 4])
        if ce - 1 > cs:
            inc[ce - 1 - cs] = dt * (_W_BWD @ f[ce - 3 : ce + 1])
        x[cs + 1 : ce + 1] = x[cs] + np.cumsum(inc)
    return x


def integrate_dde(
    params: DdeParams,
    target_fn: Callable[[np.ndarray], np.ndarray],
    t_end: float,
) -> RhoDTrajectory:
    """Solve for rho_d(t) on [0, t_end] with a piecewise-constant target.

    ``target_fn`` must be vectorized over a time array and return values in
    {1/4, 1/2}; the complementary track is 3/4 - target.
    """
    n = int(round(t_end / params.dt))
    tgrid = params.dt * np.arange(n + 4)  # 3 trailing nodes feed the stencils
    target = np.asarray(target_fn(tgrid), dtype=float)
    if target.shape != tgrid.shape:
        raise ConfigError("target_fn must return one value per grid time")
    x = _integrate_grid(params.gamma, params.tau, params.dt, params.history_init, target)
    target = target[: n + 1]
    no_target = 0.75 - target
    diverged = bool(np.max(np.abs(x - target)) > DIVERGENCE_AMPLITUDE)
    return RhoDTrajectory(
        t0=0.0,
        dt=params.dt,
        rho_d=x,
        rho_target=target,
        rho_no_target=no_target,
        diverged=diverged,
    )


def step_trajectory(
    gamma: float, t_end_tau: float = 60.0, samples_per_tau: int = 100
) -> RhoDTrajectory:
    """Response to a single setting change at t = 0 (basis 0 -> pi/4):
    history rho_d = 1/2, constant target 1/4.  Times in units of tau."""
    params = DdeParams(gamma=gamma, tau=1.0, dt=1.0 / samples_per_tau, history_init=0.5)
    return integrate_dde(params, lambda t: np.full_like(t, 0.25), t_end_tau)


def downward_crossings(t: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Times where x crosses zero going down (linear sub-grid refinement)."""
    sign_here = x[:-1] > 0.0
    sign_next = x[1:] <= 0.0
    idx = np.nonzero(sign_here & sign_next)[0]
    frac = x[idx] / (x[idx] - x[idx + 1])
    return t[idx] + frac * (t[idx + 1] - t[idx])


def envelope_maxima(t: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Local maxima of |x| (interior, strict on the left, floored at 1e-12
    of the global maximum to stay clear of rounding noise)."""
    y = np.abs(x)
    interior = (y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:])
    idx = np.nonzero(interior)[0] + 1
    keep = y[idx] > 1e-12 * y.max()
    idx = idx[keep]
    return t[idx], y[idx]


def measure_step_response(traj: RhoDTrajectory, t_end_required: float = 60.0) -> StepResponse:
    """Decay time, oscillation period, and divergence flag for a single-step
    target.

    Period: mean spacing of the first 5 intervals between successive
    downward zero crossings of the deviation.  Decay time: exponential fit
    to the |deviation| local maxima, skipping the first (still mixed with
    subdominant transients); a log-fit of |deviation| itself is used when
    there is no ringing.  Divergence: the late-window envelope grows.
    """
    t = traj.t
    x = traj.deviation()
    if traj.duration < t_end_required - 1e-9:
        raise ConfigError(f"step response needs t_end >= {t_end_required} tau")

    # divergence: compare |x| envelopes over [0.2T, 0.6T) and [0.6T, T]
    t_end = t[-1]
    w1 = (t >= 0.2 * t_end) & (t < 0.6 * t_end)
    w2 = t >= 0.6 * t_end
    m1, m2 = np.abs(x[w1]).max(), np.abs(x[w2]).max()
    diverged = bool(m2 > ENVELOPE_RATIO_THRESHOLD * m1)

    crossings = downward_crossings(t, x)
    if len(crossings) >= 2:
        spacings = np.diff(crossings)[:5]
        period = float(np.mean(spacings))
    else:
        period = math.nan

    tm, ym = envelope_maxima(t, x)
    if len(tm) >= 3:
        use = slice(1, 9)
        coeff = np.polyfit(tm[use], np.log(ym[use]), 1)
        slope = coeff[0]
    else:
        # monotonic decay: fit log|x| directly over the early window
        mask = (np.abs(x) > 1e-10 * np.abs(x).max()) & (t > 0)
        coeff = np.polyfit(t[mask][:2000], np.log(np.abs(x[mask][:2000])), 1)
        slope = coeff[0]
    decay = math.inf if slope >= 0 else -1.0 / slope
    return StepResponse(
        decay_time=float(decay),
        period=period,
        diverged=diverged,
        n_maxima=len(tm),
    )


def step_response(
    gamma: float, t_end_tau: float = 60.0, samples_per_tau: int = 100
) -> StepResponse:
    if gamma <= 0:
        raise ConfigError("gamma must be positive")
    if t_end_tau < 60.0:
        raise ConfigError("step response requires t_end >= 60 tau")
    traj = step_trajectory(gamma, t_end_tau, samples_per_tau)
    return measure_step_response(traj, t_end_required=60.0)


@dataclass(frozen=True)
class SweepRow:
    gamma: float
    decay_time_tau: float
    period_tau: float
    diverged: bool


def gamma_sweep(gammas: Sequence[float], t_end_tau: float = 60.0) -> list[SweepRow]:
    rows = []
    for g in gammas:
        r = step_response(g, t_end_tau)
        rows.append(SweepRow(g, r.decay_time, r.period, r.diverged))
    return rows


def find_divergence_threshold(
    lo: float = 1.3,
    hi: float = 1.8,
    width: float = 0.016,
    t_end_tau: float = 60.0,
) -> tuple[float, float]:
    """Bisection on the diverged flag; returns the final (stable, divergent)
    bracket once it is narrower than ``width``."""
    flag_lo = step_response(lo, t_end_tau).diverged
    flag_hi = step_response(hi, t_end_tau).diverged
    if flag_lo or not flag_hi:
        raise ConfigError("bracket must run from a stable to a divergent gamma")
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if step_response(mid, t_end_tau).diverged:
            hi = mid
        else:
            lo = mid
    return lo, hi
