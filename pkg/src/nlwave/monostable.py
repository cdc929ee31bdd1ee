"""Monostable nonlinearity pairs: death rate d and birth rate b.

The pair must vanish at 0, balance at the carrying state u_plus, and
satisfy the slope/convexity conditions that make 0 unstable and u_plus
stable.  Those conditions are certified on a dense grid rather than
symbolically; see :func:`validate`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

GRID_POINTS = 1000
MARGIN = 1e-12


@dataclass(frozen=True)
class Monostable:
    """Nonlinearity pair with analytic first and second derivatives."""

    d: Callable
    b: Callable
    d1: Callable
    b1: Callable
    d2: Callable
    b2: Callable
    u_plus: float
    name: str = "custom"
    params: dict = None

    def grid(self, n=GRID_POINTS):
        return np.linspace(0.0, self.u_plus, n + 1)


def fisher_kpp():
    """d(u) = u^2, b(u) = u: the logistic pair with u_plus = 1."""
    return Monostable(
        d=lambda u: np.asarray(u) ** 2,
        b=lambda u: np.asarray(u) * 1.0,
        d1=lambda u: 2.0 * np.asarray(u),
        b1=lambda u: np.ones_like(np.asarray(u, dtype=float)),
        d2=lambda u: np.full_like(np.asarray(u, dtype=float), 2.0),
        b2=lambda u: np.zeros_like(np.asarray(u, dtype=float)),
        u_plus=1.0,
        name="fisher_kpp",
        params={},
    )


def _nicholson_pair(p, delta, a):
    u_plus = np.log(p / delta) / a
    return Monostable(
        d=lambda u: delta * np.asarray(u),
        b=lambda u: p * np.asarray(u) * np.exp(-a * np.asarray(u)),
        d1=lambda u: np.full_like(np.asarray(u, dtype=float), delta),
        b1=lambda u: p * np.exp(-a * np.asarray(u)) * (1.0 - a * np.asarray(u)),
        d2=lambda u: np.zeros_like(np.asarray(u, dtype=float)),
        b2=lambda u: p * a * np.exp(-a * np.asarray(u)) * (a * np.asarray(u) - 2.0),
        u_plus=float(u_plus),
        name="nicholson",
        params={"p": p, "delta": delta, "a": a},
    )


def nicholson(p, delta, a):
    """Linear death, Ricker-type birth; requires 1 < p/delta <= e."""
    if not 1.0 < p / delta <= np.e + 1e-12:
        raise ValueError("monostable hypotheses violated: need 1 < p/delta <= e")
    return _nicholson_pair(p, delta, a)


def age_structured(p, delta, gamma, tau):
    """Quadratic death, linear maturation-discounted birth."""
    if p <= 0 or delta <= 0 or gamma <= 0 or tau < 0:
        raise ValueError("age_structured parameters must be positive (tau >= 0)")
    rate = p * np.exp(-gamma * tau)
    return Monostable(
        d=lambda u: delta * np.asarray(u) ** 2,
        b=lambda u: rate * np.asarray(u),
        d1=lambda u: 2.0 * delta * np.asarray(u),
        b1=lambda u: np.full_like(np.asarray(u, dtype=float), rate),
        d2=lambda u: np.full_like(np.asarray(u, dtype=float), 2.0 * delta),
        b2=lambda u: np.zeros_like(np.asarray(u, dtype=float)),
        u_plus=float(rate / delta),
        name="age_structured",
        params={"p": p, "delta": delta, "gamma": gamma, "tau": tau},
    )


def preset(name, **params):
    """Build one of the named nonlinearity pairs."""
    if name == "fisher_kpp":
        return fisher_kpp()
    if name == "nicholson":
        return nicholson(params["p"], params["delta"], params["a"])
    if name == "age_structured":
        return age_structured(params["p"], params["delta"], params["gamma"], params["tau"])
    raise ValueError(f"unknown nonlinearity preset {name!r}")


@dataclass(frozen=True)
class HypothesisCheck:
    name: str
    passed: bool
    worst_value: float
    worst_point: float
    detail: str = ""


@dataclass(frozen=True)
class HypothesisReport:
    checks: tuple

    @property
    def all_passed(self):
        return all(c.passed for c in self.checks)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def validate(m, n=GRID_POINTS):
    """Grid certification of the monostable conditions; never raises."""
    u = m.grid(n)
    checks = []

    endpoint_defects = {
        "d(0)": float(abs(m.d(0.0))),
        "b(0)": float(abs(m.b(0.0))),
        "d(u+) - b(u+)": float(abs(m.d(m.u_plus) - m.b(m.u_plus))),
    }
    worst = max(endpoint_defects, key=endpoint_defects.get)
    checks.append(
        HypothesisCheck(
            "H1",
            endpoint_defects["d(0)"] == 0.0
            and endpoint_defects["b(0)"] == 0.0
            and endpoint_defects["d(u+) - b(u+)"] < 1e-10,
            endpoint_defects[worst],
            0.0 if worst != "d(u+) - b(u+)" else m.u_plus,
            f"largest endpoint defect at {worst}",
        )
    )

    g0 = float(m.b1(0.0) - m.d1(0.0))
    gp = float(m.d1(m.u_plus) - m.b1(m.u_plus))
    slope_margins = {0.0: g0, m.u_plus: min(gp, float(m.b1(m.u_plus)))}
    ok2 = g0 > 0 and float(m.d1(0.0)) >= 0 and float(m.b1(m.u_plus)) >= 0 and gp > 0
    wpt = min(slope_margins, key=slope_margins.get)
    checks.append(
        HypothesisCheck("H2", ok2, slope_margins[wpt], wpt, "strict slope gap at the equilibria")
    )

    signs = {
        "d1 >= 0": np.asarray(m.d1(u), dtype=float),
        "b1 >= 0": np.asarray(m.b1(u), dtype=float),
        "d2 >= 0": np.asarray(m.d2(u), dtype=float),
        "-b2 >= 0": -np.asarray(m.b2(u), dtype=float),
    }
    worst_val, worst_pt, worst_name = np.inf, 0.0, ""
    for label, vals in signs.items():
        i = int(np.argmin(vals))
        if vals[i] < worst_val:
            worst_val, worst_pt, worst_name = float(vals[i]), float(u[i]), label
    checks.append(
        HypothesisCheck(
            "H3",
            worst_val >= -MARGIN,
            worst_val,
            worst_pt,
            f"most negative sign margin in {worst_name}",
        )
    )

    return HypothesisReport(tuple(checks))


@dataclass(frozen=True)
class ContractionConstants:
    """Lipschitz data of the pair: eta0 = 1 + max|d'| + max|b'| > 1."""

    eta1: float
    eta2: float

    @property
    def eta0(self):
        return 1.0 + self.eta1 + self.eta2


def _grid_max_abs(f, fprime, u_plus, n=4096):
    """Max of |f| on [0, u_plus]: dense grid plus one Newton polish.

    The polish solves f'(u) = 0 with a finite-difference second
    derivative, clamped to the bracketing cells.
    """
    u = np.linspace(0.0, u_plus, n + 1)
    vals = np.abs(np.asarray(f(u), dtype=float))
    i = int(np.argmax(vals))
    best = float(vals[i])
    if 0 < i < n:
        h = u_plus / n
        fp = float(fprime(u[i]))
        fpp = (float(fprime(u[i] + h)) - float(fprime(u[i] - h))) / (2.0 * h)
        if fpp != 0.0:
            u_new = np.clip(u[i] - fp / fpp, u[i] - h, u[i] + h)
            best = max(best, float(abs(f(u_new))))
    return best


def contraction_constants(m):
    """Sup of |d'| and |b'| over the invariant interval."""
    eta1 = _grid_max_abs(m.d1, m.d2, m.u_plus)
    eta2 = _grid_max_abs(m.b1, m.b2, m.u_plus)
    return ContractionConstants(eta1=eta1, eta2=eta2)
