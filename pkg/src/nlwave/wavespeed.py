"""Wave-speed characteristics: tangency of the birth and transport curves.

For a speed c and decay rate lam, the left tail of a front must balance
the transport side  G(lam) = c*lam - (moment(lam) - 1) + d'(0)  against
the delayed birth side  H(lam) = b'(0) * exp(beta*lam^2 - lam*c*tau).
The critical speed is the smallest c at which the curves touch; above
it they cross twice.  This module solves for the tangency point, the
crossing rates, the right-tail rate, the admissible stability-rate
bound, and the exponential weight used by the stability experiments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .kernels import (
    MomentDivergedError,
    exp_moment,
    exp_moment_weighted,
    exp_moment_weighted2,
    heat_moment,
)


class NoTangencyError(RuntimeError):
    """The coarse scan found no tangency structure in the bracket."""


class SubcriticalSpeedError(ValueError):
    """Requested speed below the critical speed: no decay roots."""


@dataclass(frozen=True)
class WaveCharacteristics:
    """Critical speed/rate pair and the residual of the tangency system."""

    speed: float
    rate: float
    residual: float


@dataclass(frozen=True)
class SpeedRoots:
    """Tail decay rates at a given speed c >= c_star.

    lam1 < lam2 bracket the band where the birth curve dips below the
    transport curve; lam_plus is the approach rate toward u_plus.
    """

    c: float
    lam1: float
    lam2: float
    lam_plus: float


def transport_curve(m, k, c, lam):
    """Transport side G: advection minus dispersal gain plus death slope."""
    return c * lam - (exp_moment(k, lam) - 1.0) + float(m.d1(0.0))


def birth_curve(m, h, c, tau, lam):
    """Delayed birth side H at decay rate lam."""
    return float(m.b1(0.0)) * heat_moment(h, lam, c * tau)


def _curves(m, k, h, tau, c, lam):
    """(H - G) and its first two lam-derivatives at (c, lam)."""
    b10 = float(m.b1(0.0))
    d10 = float(m.d1(0.0))
    mom = exp_moment(k, lam)
    w1 = exp_moment_weighted(k, lam)
    w2 = exp_moment_weighted2(k, lam)
    hb = b10 * heat_moment(h, lam, c * tau)
    hb1 = (2.0 * h.beta * lam - c * tau) * hb
    hb2 = ((2.0 * h.beta * lam - c * tau) ** 2 + 2.0 * h.beta) * hb
    g = c * lam - (mom - 1.0) + d10
    g1 = c + w1
    g2 = -w2
    return hb - g, hb1 - g1, hb2 - g2


def _gap_min(m, k, h, tau, c, lam_grid):
    """Minimum of H - G over a rate grid, skipping overflowing rates."""
    best, best_lam = np.inf, lam_grid[0]
    for lam in lam_grid:
        try:
            v = birth_curve(m, h, c, tau, lam) - transport_curve(m, k, c, lam)
        except MomentDivergedError:
            break
        if v < best:
            best, best_lam = v, lam
    return best, best_lam


def critical_pair(m, k, h, tau, c_bracket=(0.1, 10.0), newton_max=100):
    """Solve the tangency system for the critical (speed, rate) pair.

    The minimum of H - G over rates decreases strictly with c, so a
    bisection on the sign of that minimum brackets the critical speed;
    a damped Newton iteration on (rate, speed) then drives both the gap
    and its rate-derivative below 1e-12.
    """
    lam_grid = np.geomspace(1e-3, 20.0, 600)
    c_lo, c_hi = c_bracket
    gap_lo, _ = _gap_min(m, k, h, tau, c_lo, lam_grid)
    gap_hi, _ = _gap_min(m, k, h, tau, c_hi, lam_grid)
    if gap_lo < 0 or gap_hi > 0:
        raise NoTangencyError(
            f"no tangency in bracket c in {c_bracket}: "
            f"gap({c_lo})={gap_lo:.3e}, gap({c_hi})={gap_hi:.3e}"
        )
    lam_min = lam_grid[0]
    for _ in range(40):
        c_mid = 0.5 * (c_lo + c_hi)
        gap, lam_min = _gap_min(m, k, h, tau, c_mid, lam_grid)
        if gap > 0:
            c_lo = c_mid
        else:
            c_hi = c_mid

    lam, c = lam_min, 0.5 * (c_lo + c_hi)
    f1, f2, _ = _curves(m, k, h, tau, c, lam)
    hc = 1e-7 * max(1.0, abs(c))
    for _ in range(newton_max):
        if max(abs(f1), abs(f2)) < 1e-12:
            break
        _, d1_lam, d2_lam = _curves(m, k, h, tau, c, lam)
        f1c, f2c, _ = _curves(m, k, h, tau, c + hc, lam)
        jac = np.array([[d1_lam, (f1c - f1) / hc], [d2_lam, (f2c - f2) / hc]])
        try:
            step = np.linalg.solve(jac, -np.array([f1, f2]))
        except np.linalg.LinAlgError:
            raise NoTangencyError("singular tangency Jacobian") from None
        scale = 1.0
        for _ in range(30):
            lam_n, c_n = lam + scale * step[0], c + scale * step[1]
            if lam_n > 0 and c_n > 0:
                try:
                    g1, g2, _ = _curves(m, k, h, tau, c_n, lam_n)
                except MomentDivergedError:
                    scale *= 0.5
                    continue
                if max(abs(g1), abs(g2)) < max(abs(f1), abs(f2)):
                    lam, c, f1, f2 = lam_n, c_n, g1, g2
                    break
            scale *= 0.5
        else:
            raise NoTangencyError("Newton stalled while polishing the tangency point")
    else:
        raise NoTangencyError("Newton stalled: residual above 1e-12 after max iterations")

    # The tangency must be from below: H >= G away from the touch point.
    probe = np.geomspace(max(1e-3, lam / 50.0), lam * 4.0, 200)
    gap, _ = _gap_min(m, k, h, tau, c, probe)
    if gap < -1e-8:
        raise NoTangencyError(f"curves cross below the tangency point (gap {gap:.3e})")
    return WaveCharacteristics(speed=c, rate=lam, residual=max(abs(f1), abs(f2)))


def _extend_until_negative(f, lo, hi_start, hi_cap=1e6):
    """Double hi until f changes sign; stop at overflow of the moments."""
    hi = hi_start
    f_hi = f(hi)
    while f_hi > 0:
        hi *= 2.0
        if hi > hi_cap:
            raise NoTangencyError("no sign change before the bracket cap")
        try:
            f_hi = f(hi)
        except MomentDivergedError:
            raise NoTangencyError("moment overflow before a sign change") from None
    return hi


def decay_roots(m, k, h, tau, c, wave=None):
    """Tail rates lam1 <= lam2 (left) and lam_plus (right) at speed c."""
    if wave is None:
        wave = critical_pair(m, k, h, tau)
    if c < wave.speed - 1e-10:
        raise SubcriticalSpeedError(
            f"subcritical speed: no roots (c={c} < c*={wave.speed})"
        )

    d1p = float(m.d1(m.u_plus))
    b1p = float(m.b1(m.u_plus))

    def gap_plus(lam):
        # Right-tail balance: the front approaches u_plus from below, so
        # the delay shift enters with the opposite sign.
        g = -c * lam - (exp_moment(k, lam) - 1.0) + d1p
        return g - b1p * heat_moment(h, lam, -c * tau)

    hi = _extend_until_negative(gap_plus, 0.0, max(1.0, wave.rate))
    lam_plus = brentq(gap_plus, 1e-14, hi, xtol=1e-14, rtol=1e-15)

    if abs(c - wave.speed) <= 1e-10:
        return SpeedRoots(c=c, lam1=wave.rate, lam2=wave.rate, lam_plus=lam_plus)

    def gap(lam):
        return transport_curve(m, k, c, lam) - birth_curve(m, h, c, tau, lam)

    if gap(wave.rate) <= 0:
        raise SubcriticalSpeedError(
            f"subcritical speed: no roots (curves do not separate at c={c})"
        )
    lam1 = brentq(gap, 1e-14, wave.rate, xtol=1e-14, rtol=1e-15)
    hi = _extend_until_negative(gap, wave.rate, 2.0 * wave.rate)
    lam2 = brentq(gap, wave.rate, hi, xtol=1e-14, rtol=1e-15)
    return SpeedRoots(c=c, lam1=lam1, lam2=lam2, lam_plus=lam_plus)


def rate_bound(m, k, h, wave, c, tau, eps1=1.0):
    """Upper endpoint of the admissible exponential stability rates.

    Returns min{d'(u+) - b'(u+), eps1 * [G_c(rate) - H_c(rate)]} at the
    critical rate; 0 in the degenerate critical case c = c_star.
    """
    if c < wave.speed - 1e-10:
        raise SubcriticalSpeedError("rate bound needs c >= c*")
    if tau == 0.0 and eps1 != 1.0:
        raise ValueError("eps1 must be 1 when tau = 0")
    if not 0.0 < eps1 <= 1.0:
        raise ValueError("eps1 must lie in (0, 1]")
    if abs(c - wave.speed) <= 1e-10:
        return 0.0
    gap = transport_curve(m, k, c, wave.rate) - birth_curve(m, h, c, tau, wave.rate)
    slope_gap = float(m.d1(m.u_plus) - m.b1(m.u_plus))
    return min(slope_gap, eps1 * gap)


@dataclass(frozen=True)
class WeightFunction:
    """Exponential left-half weight exp(-rate * (x - switch)), 1 to the right."""

    rate: float
    switch: float


def weight_eval(w, x1):
    """Evaluate the weight; continuous at the switch point, >= 1 on the left."""
    x1 = np.asarray(x1, dtype=float)
    out = np.ones_like(x1)
    left = x1 <= w.switch
    out[left] = np.exp(-w.rate * (x1[left] - w.switch))
    if out.ndim == 0:
        return float(out)
    return out


def _smoothed_birth_slope(profile, m, h, c, tau):
    """b'(phi) smoothed by the birth kernel and shifted by the delay lag."""
    from .kernels import _panel_quadrature  # shared quadrature builder

    xi = profile.xi
    u_plus = profile.u_plus

    def phi_at(pts):
        return np.interp(pts, xi, profile.values, left=0.0, right=u_plus)

    if h.beta == 0.0:
        return np.asarray(m.b1(phi_at(xi - c * tau)), dtype=float)
    s = h.sigma
    nodes, weights = _panel_quadrature(8.6 * s, max(64, int(64 * 8.6)))
    f = np.exp(-0.5 * (nodes / s) ** 2) / (s * np.sqrt(2.0 * np.pi))
    f_w = weights * f
    f_w = f_w / f_w.sum()
    vals = np.asarray(m.b1(phi_at(xi[:, None] - nodes[None, :] - c * tau)), dtype=float)
    return vals @ f_w


def weight_switch(profile, m, h, c, tau, eps0):
    """Smallest grid point beyond which the damping margin clears eps0.

    The margin d'(phi) - smoothed b'(phi(. - delay)) increases toward
    d'(u+) - b'(u+); the switch is where it first stays above eps0 times
    that limit for every grid point to the right.
    """
    if not 0.0 < eps0 < 1.0:
        raise ValueError("eps0 must lie in (0, 1)")
    margin = np.asarray(m.d1(profile.values), dtype=float) - _smoothed_birth_slope(
        profile, m, h, c, tau
    )
    target = eps0 * float(m.d1(m.u_plus) - m.b1(m.u_plus))
    ok = margin >= target
    if not ok[-1]:
        raise ValueError("domain too short; extend L")
    # First index from which the condition holds for all points rightward.
    holds_from = np.where(~ok)[0]
    i_star = 0 if holds_from.size == 0 else int(holds_from[-1]) + 1
    return float(profile.xi[i_star])
