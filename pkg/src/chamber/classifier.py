"""Boundary behaviour of a single face from its barrier potential.

A face is

* ``WEAK`` when ``phi(0) < inf``: the wall is hit and the process reflects,
* ``MIDDLE`` when ``phi(0) = inf`` but ``exp(2 phi)`` is integrable at 0+:
  the wall is hit but carries no local time,
* ``STRONG`` when ``exp(2 phi)`` is not integrable at 0+: the wall is never hit.

Divergence of ``int_0+ exp(2 phi)`` is decided from the power of ``u`` in
``exp(2 phi(u)) ~ u^(-2 gamma)``: the declared ``zero_exponent`` when the
potential provides one, otherwise a log-log regression near 0.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np
from scipy import integrate

from .potentials import BarrierPotential

if TYPE_CHECKING:
    from .models import PolyhedralModel

CRITICAL_EXPONENT = 0.5
NEAR_CRITICAL_BAND = 0.02


class Repulsion(str, enum.Enum):
    WEAK = "Weak"
    MIDDLE = "Middle"
    STRONG = "Strong"


PREDICTIONS = {
    Repulsion.WEAK: "reachable with reflection",
    Repulsion.MIDDLE: "reachable, zero local time",
    Repulsion.STRONG: "face unreachable",
}


class IndeterminateClassification(ValueError):
    """The regressed exponent sits too close to 1/2 to decide."""


@dataclass(frozen=True)
class BoundaryClass:
    kind: Repulsion
    exponent: float | None
    method: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def prediction(self) -> str:
        return PREDICTIONS[self.kind]


def _log_integrand(p: BarrierPotential, u):
    return 2.0 * (np.asarray(p.value(u)) - float(p.value(1.0)))


def scale(p: BarrierPotential, x: float) -> float:
    """p(x) = int_1^x exp(2 (phi(u) - phi(1))) du."""
    if not x > 0:
        raise ValueError(f"scale function needs x > 0, got {x}")
    if x == 1.0:
        return 0.0
    lo, hi = min(x, 1.0), max(x, 1.0)
    ends = _log_integrand(p, np.array([lo, hi]))
    if not np.all(np.isfinite(ends)):
        raise ValueError(f"scale integrand not finite on [{lo}, {hi}]")
    # phi convex: the integrand peaks at an endpoint, so shifting by it keeps exp <= 1
    shift = float(np.max(ends))
    val, _ = integrate.quad(
        lambda u: math.exp(float(_log_integrand(p, u)) - shift), lo, hi,
        epsrel=1e-10, epsabs=0.0, limit=200,
    )
    try:
        out = val * math.exp(shift)
    except OverflowError:
        raise OverflowError(f"scale function overflows on [{lo}, {hi}] (log size {shift:.1f})") from None
    if math.isinf(out):
        raise OverflowError(f"scale function overflows on [{lo}, {hi}]")
    return out if x > 1 else -out


class ScaleFunction:
    """Callable wrapper around :func:`scale` with a small cache."""

    def __init__(self, potential: BarrierPotential):
        self.potential = potential
        self._cache: dict[float, float] = {}

    def __call__(self, x: float) -> float:
        x = float(x)
        if x not in self._cache:
            self._cache[x] = scale(self.potential, x)
        return self._cache[x]


def regress_exponent(p: BarrierPotential, lo: float = 1e-10, hi: float = 1e-2, n: int = 41) -> float:
    """Estimate gamma in exp(2 phi(u)) ~ u^(-2 gamma) by least squares in log-log."""
    u = np.geomspace(lo, hi, n)
    y = 2.0 * np.asarray(p.value(u), dtype=float)
    slope = np.polyfit(np.log(u), y, 1)[0]
    return float(-slope / 2.0)


def classify(p: BarrierPotential, use_hint: bool = True, scale_diagnostics: bool = False) -> BoundaryClass:
    """Boundary class of a face potential near gap 0.

    ``scale_diagnostics`` adds p(1e-2) and p(1e-4) (two adaptive quadratures)
    to the diagnostics; a divergent p(0+) shows up as a large negative p(1e-4).
    """
    if math.isfinite(p.value_at_zero):
        return BoundaryClass(Repulsion.WEAK, 0.0, "finite value at zero",
                             {"value_at_zero": p.value_at_zero})
    hint = p.zero_exponent if use_hint else None
    diag = {}
    if hint is not None:
        gamma, method = float(hint), "declared exponent"
    else:
        gamma, method = regress_exponent(p), "log-log regression"
        if abs(gamma - CRITICAL_EXPONENT) < NEAR_CRITICAL_BAND:
            raise IndeterminateClassification(
                f"regressed exponent {gamma:.4f} is within {NEAR_CRITICAL_BAND} of 1/2; "
                "declare zero_exponent on the potential"
            )
    if scale_diagnostics:
        try:
            diag["p(1e-2)"] = scale(p, 1e-2)
            diag["p(1e-4)"] = scale(p, 1e-4)
        except (OverflowError, ValueError):
            diag["p(1e-4)"] = -math.inf
    kind = Repulsion.STRONG if gamma >= CRITICAL_EXPONENT else Repulsion.MIDDLE
    return BoundaryClass(kind, gamma, method, diag)


def rost_vares_exponent(p: BarrierPotential, lo: float = 1e-10, hi: float = 1e-3, n: int = 41) -> float:
    """Power ``beta`` in ``phi'(u)^2 exp(-2 phi(u)) ~ u^(-beta)`` near 0.

    ``int_0^1 phi'^2 exp(-2 phi) < inf`` (the classical non-collision
    condition for nearest-neighbour particle systems) holds when ``beta < 1``.
    """
    u = np.geomspace(lo, hi, n)
    d = np.abs(np.asarray(p.derivative(u), dtype=float))
    with np.errstate(divide="ignore"):
        logg = 2.0 * np.log(d) - 2.0 * np.asarray(p.value(u), dtype=float)
    ok = np.isfinite(logg)
    if ok.sum() < 2:
        return -math.inf
    slope = np.polyfit(np.log(u[ok]), logg[ok], 1)[0]
    return float(-slope)


def satisfies_rost_vares(p: BarrierPotential, margin: float = 0.02) -> bool:
    return math.isinf(p.value_at_zero) and rost_vares_exponent(p) < 1.0 - margin


def classify_model(model: "PolyhedralModel", use_hint: bool = True) -> list[BoundaryClass]:
    out = []
    for face in model.domain.faces:
        out.append(classify(model.potentials[face.potential_id], use_hint=use_hint))
    return out
