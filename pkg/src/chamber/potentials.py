"""Convex barrier potentials on the half-line and their 1-D proximal maps.

A barrier ``phi`` is convex, ``+inf`` on ``(-inf, 0)`` and C^1 on ``(0, upper)``.
Every potential exposes scalar/array ``value``, ``derivative`` and a vectorized
``prox(z, tau)`` returning the minimizer of ``(y - z)**2 / 2 + tau * phi(y)``
over ``y >= 0`` together with the boundary multiplier.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


class PotentialDomainError(ValueError):
    """Raised when a potential is evaluated outside its admissible range."""


class ProxConvergenceError(RuntimeError):
    pass


_MAX_PROX_ITER = 200
_PROX_RTOL = 1e-15


class BarrierPotential:
    """Base class for barrier potentials.

    Subclasses implement ``_value``, ``_derivative`` and optionally
    ``_second_derivative`` for ``u`` in the open interval ``(0, upper)``.
    ``value_at_zero`` is ``inf`` for singular barriers and
    ``derivative_limit_at_zero`` is ``-inf`` when the slope blows up at 0.
    ``zero_exponent`` is the ``gamma`` in ``phi(u) = -gamma log u + O(1)``
    when known, ``None`` otherwise.
    """

    value_at_zero: float = math.inf
    derivative_limit_at_zero: float = -math.inf
    zero_exponent: Optional[float] = None
    upper: float = math.inf
    kind: str = "custom"

    def _value(self, u):
        raise NotImplementedError

    def _derivative(self, u):
        raise NotImplementedError

    _second_derivative: Optional[Callable] = None

    # array API, no argument checking; callers guarantee 0 <= u

    def value(self, u):
        u = np.asarray(u, dtype=float)
        out = np.full(u.shape, math.inf)
        inside = (u > 0) & (u < self.upper)
        if np.any(inside):
            out[inside] = self._value(u[inside])
        out[u == 0] = self.value_at_zero
        return out if out.ndim else float(out)

    def derivative(self, u):
        u = np.asarray(u, dtype=float)
        out = np.full(u.shape, math.inf)
        inside = (u > 0) & (u < self.upper)
        if np.any(inside):
            out[inside] = self._derivative(u[inside])
        out[u <= 0] = self.derivative_limit_at_zero
        return out if out.ndim else float(out)

    @property
    def is_singular(self) -> bool:
        return self.derivative_limit_at_zero == -math.inf

    def prox(self, z, tau: float):
        return _generic_prox(self, z, tau)

    def to_spec(self) -> dict:
        raise TypeError(f"{type(self).__name__} has no config representation")


@dataclass(frozen=True, eq=True)
class Zero(BarrierPotential):
    """phi = 0 on [0, inf): pure normal reflection."""

    kind = "zero"
    value_at_zero = 0.0
    derivative_limit_at_zero = 0.0

    @property
    def zero_exponent(self):
        return 0.0

    def _value(self, u):
        return np.zeros_like(u)

    def _derivative(self, u):
        return np.zeros_like(u)

    def _second_derivative(self, u):
        return np.zeros_like(u)

    def prox(self, z, tau):
        z = np.asarray(z, dtype=float)
        return np.maximum(z, 0.0), np.maximum(-z, 0.0)

    def to_spec(self):
        return {"kind": "zero"}


@dataclass(frozen=True, eq=True)
class LogBarrier(BarrierPotential):
    """phi(u) = -gamma log u."""

    gamma: float
    kind = "log"

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"LogBarrier needs gamma > 0, got {self.gamma}")

    @property
    def zero_exponent(self):
        return self.gamma

    def _value(self, u):
        return -self.gamma * np.log(u)

    def _derivative(self, u):
        return -self.gamma / u

    def _second_derivative(self, u):
        return self.gamma / (u * u)

    def prox(self, z, tau):
        # positive root of y^2 - z y - tau*gamma = 0, written without cancellation
        z = np.asarray(z, dtype=float)
        tg = tau * self.gamma
        root = np.sqrt(z * z + 4.0 * tg)
        with np.errstate(divide="ignore", invalid="ignore"):
            y = np.where(z >= 0, 0.5 * (z + root), 2.0 * tg / (root - z))
        return y, np.zeros_like(y)

    def prox_shift(self, z, tau):
        """Return ``(y, y - z)`` with the shift computed stably as ``tau*gamma/y``."""
        y, _ = self.prox(z, tau)
        return y, tau * self.gamma / y

    def to_spec(self):
        return {"kind": "log", "gamma": self.gamma}


@dataclass(frozen=True, eq=True)
class ShiftedLog(BarrierPotential):
    """phi(u) = -gamma log(u + c), c > 0; finite at 0, so the wall reflects."""

    gamma: float
    c: float
    kind = "shifted_log"

    def __post_init__(self):
        if not (self.gamma > 0 and self.c > 0):
            raise ValueError("ShiftedLog needs gamma > 0 and c > 0")

    @property
    def value_at_zero(self):
        return -self.gamma * math.log(self.c)

    @property
    def derivative_limit_at_zero(self):
        return -self.gamma / self.c

    @property
    def zero_exponent(self):
        return 0.0

    def _value(self, u):
        return -self.gamma * np.log(u + self.c)

    def _derivative(self, u):
        return -self.gamma / (u + self.c)

    def _second_derivative(self, u):
        return self.gamma / (u + self.c) ** 2

    def prox(self, z, tau):
        z = np.asarray(z, dtype=float)
        w = z + self.c
        tg = tau * self.gamma
        root = np.sqrt(w * w + 4.0 * tg)
        with np.errstate(divide="ignore", invalid="ignore"):
            v = np.where(w >= 0, 0.5 * (w + root), 2.0 * tg / (root - w))
        y = v - self.c
        clamp = y <= 0
        y = np.where(clamp, 0.0, y)
        lam = np.where(clamp, -z - tg / self.c, 0.0)
        return y, np.maximum(lam, 0.0)

    def to_spec(self):
        return {"kind": "shifted_log", "gamma": self.gamma, "c": self.c}


@dataclass(frozen=True, eq=True)
class TrigLogSin(BarrierPotential):
    """phi(u) = -gamma log sin(u / scale) on (0, pi*scale), +inf beyond.

    Singular at both ends of its interval. Models keep the far end out of
    reach with a separate wrap-around face.
    """

    gamma: float
    scale: float = math.sqrt(2.0)
    kind = "trig_log_sin"

    def __post_init__(self):
        if not (self.gamma > 0 and self.scale > 0):
            raise ValueError("TrigLogSin needs gamma > 0 and scale > 0")

    @property
    def upper(self):
        return math.pi * self.scale

    @property
    def zero_exponent(self):
        return self.gamma

    def _value(self, u):
        return -self.gamma * np.log(np.sin(u / self.scale))

    def _derivative(self, u):
        return -self.gamma / (self.scale * np.tan(u / self.scale))

    def _second_derivative(self, u):
        s = np.sin(u / self.scale)
        return self.gamma / (self.scale * self.scale * s * s)

    def to_spec(self):
        return {"kind": "trig_log_sin", "gamma": self.gamma, "scale": self.scale}


@dataclass(frozen=True, eq=True)
class HyperbolicLogSinh(BarrierPotential):
    """phi(u) = -gamma log sinh(sqrt(2) u)."""

    gamma: float
    kind = "hyp_log_sinh"

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("HyperbolicLogSinh needs gamma > 0")

    @property
    def zero_exponent(self):
        return self.gamma

    def _value(self, u):
        r = math.sqrt(2.0) * u
        # log sinh r = r + log1p(-exp(-2r)) - log 2, safe for large r
        return -self.gamma * (r + np.log1p(-np.exp(-2.0 * r)) - math.log(2.0))

    def _derivative(self, u):
        return -self.gamma * math.sqrt(2.0) / np.tanh(math.sqrt(2.0) * u)

    def _second_derivative(self, u):
        e = np.exp(-2.0 * math.sqrt(2.0) * u)
        return 8.0 * self.gamma * e / (1.0 - e) ** 2

    def to_spec(self):
        return {"kind": "hyp_log_sinh", "gamma": self.gamma}


@dataclass(frozen=True, eq=True)
class Scaled(BarrierPotential):
    """u -> base(factor * u); the prox reduces exactly to the base prox."""

    base: BarrierPotential
    factor: float
    kind = "scaled"

    def __post_init__(self):
        if not self.factor > 0:
            raise ValueError("Scaled needs factor > 0")

    @property
    def value_at_zero(self):
        return self.base.value_at_zero

    @property
    def derivative_limit_at_zero(self):
        return self.factor * self.base.derivative_limit_at_zero

    @property
    def zero_exponent(self):
        return self.base.zero_exponent

    @property
    def upper(self):
        return self.base.upper / self.factor

    def _value(self, u):
        return self.base._value(self.factor * u)

    def _derivative(self, u):
        return self.factor * self.base._derivative(self.factor * u)

    @property
    def _second_derivative(self):
        inner = self.base._second_derivative
        if inner is None:
            return None
        f = self.factor
        return lambda u: f * f * inner(f * u)

    def prox(self, z, tau):
        s = self.factor
        v, lam = self.base.prox(s * np.asarray(z, dtype=float), tau * s * s)
        return v / s, lam / s

    def to_spec(self):
        return {"kind": "scaled", "factor": self.factor, "base": self.base.to_spec()}


class CallablePotential(BarrierPotential):
    """User hook: wrap plain callables into the potential contract.

    ``value`` and ``derivative`` receive arrays of points in ``(0, upper)``.
    """

    kind = "callable"

    def __init__(self, value, derivative, *, value_at_zero=math.inf,
                 derivative_limit_at_zero=-math.inf, zero_exponent=None,
                 second_derivative=None, upper=math.inf, name="callable"):
        self._v = value
        self._d = derivative
        self._dd = second_derivative
        self.value_at_zero = value_at_zero
        self.derivative_limit_at_zero = derivative_limit_at_zero
        self.zero_exponent = zero_exponent
        self.upper = upper
        self.name = name

    def _value(self, u):
        return self._v(u)

    def _derivative(self, u):
        return self._d(u)

    @property
    def _second_derivative(self):
        return self._dd

    def __repr__(self):
        return f"CallablePotential({self.name!r})"


def _generic_prox(p: BarrierPotential, z, tau: float):
    """Vectorized prox via bracketing + safeguarded Newton on y + tau*phi'(y) = z.

    The residual ``h(y) = y + tau*phi'(y) - z`` is nondecreasing (phi convex),
    so a sign-change bracket is always available and every iterate stays in it.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    y = np.zeros_like(z)
    lam = np.zeros_like(z)

    # clamped at the wall: only possible for a finite slope at 0
    d0 = p.derivative_limit_at_zero
    if d0 > -math.inf:
        h0 = tau * d0 - z
        at_wall = h0 >= 0
        lam[at_wall] = h0[at_wall]
    else:
        at_wall = np.zeros(z.shape, dtype=bool)
    idx = np.flatnonzero(~at_wall)
    if idx.size == 0:
        return y, lam
    zz = z[idx]

    def h(v):
        return v + tau * p._derivative(v) - zz

    upper = p.upper
    hi = np.maximum(zz, 0.0) + 1.0
    if math.isfinite(upper):
        hi = np.minimum(hi, upper * (1 - 1e-15))
    lo = np.minimum(hi * 0.5, np.maximum(np.abs(zz), 1.0) * 0.5)

    for _ in range(1100):
        bad = h(lo) >= 0
        if not bad.any():
            break
        lo[bad] *= 0.5
        if np.any(lo[bad] == 0):
            raise ProxConvergenceError("cannot bracket prox root near 0")
    else:
        raise ProxConvergenceError("cannot bracket prox root near 0")
    for _ in range(200):
        bad = h(hi) < 0
        if not bad.any():
            break
        if math.isfinite(upper):
            hi[bad] = 0.5 * (hi[bad] + upper)
        else:
            hi[bad] = 2.0 * hi[bad] + 1.0
    else:
        raise ProxConvergenceError("cannot bracket prox root from above")

    curv = p._second_derivative
    x = 0.5 * (lo + hi)
    hx = h(x)
    done = np.zeros(x.shape, dtype=bool)
    for _ in range(_MAX_PROX_ITER):
        neg = hx < 0
        lo = np.where(neg, x, lo)
        hi = np.where(neg, hi, x)
        if curv is not None:
            slope = 1.0 + tau * curv(x)
        else:
            slope = 1.0
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            cand = x - hx / slope
        ok = np.isfinite(cand) & (cand > lo) & (cand < hi)
        # bisect geometrically when the bracket spans decades
        geo = np.sqrt(lo * hi)
        mid = np.where(hi > 4 * lo, geo, 0.5 * (lo + hi))
        xn = np.where(ok, cand, mid)
        step = np.abs(xn - x)
        done = (step <= _PROX_RTOL * np.maximum(x, 1e-300)) | (hx == 0) | (hi - lo <= 4 * np.spacing(hi))
        x = np.where(done, x, xn)
        if done.all():
            break
        hx = h(x)
    else:
        raise ProxConvergenceError("prox Newton iteration did not converge")
    y[idx] = x
    return y, lam


# scalar API with argument checks


def eval(p: BarrierPotential, u: float) -> float:  # noqa: A001 - mirrors the op name
    if u < 0:
        raise PotentialDomainError(f"potential evaluated at u={u} < 0")
    return float(p.value(u))


def deriv(p: BarrierPotential, u: float) -> float:
    if not u > 0:
        raise PotentialDomainError(f"derivative needs u > 0, got {u}")
    return float(p.derivative(u))


def prox1d(p: BarrierPotential, z: float, tau: float) -> tuple[float, float]:
    """Solve min over y >= 0 of (y - z)^2/2 + tau*phi(y).

    Returns ``(y, multiplier)`` where the multiplier is the mass needed to hold
    ``y`` at the wall; it is positive only when ``y == 0`` and ``phi(0) < inf``.
    """
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    y, lam = p.prox(np.array([float(z)]), tau)
    return float(y[0]), float(lam[0])


def potential_from_spec(spec: dict) -> BarrierPotential:
    kind = spec.get("kind")
    if kind == "zero":
        return Zero()
    if kind == "log":
        return LogBarrier(float(spec["gamma"]))
    if kind == "shifted_log":
        return ShiftedLog(float(spec["gamma"]), float(spec["c"]))
    if kind == "trig_log_sin":
        return TrigLogSin(float(spec["gamma"]), float(spec.get("scale", math.sqrt(2.0))))
    if kind == "hyp_log_sinh":
        return HyperbolicLogSinh(float(spec["gamma"]))
    if kind == "scaled":
        return Scaled(potential_from_spec(spec["base"]), float(spec["factor"]))
    raise ValueError(f"unknown potential kind {kind!r}")


def check_contract(p: BarrierPotential, lo: float = 1e-6, hi: float = 1e3, n: int = 200) -> list[str]:
    """Return a list of contract violations found on a log-spaced grid."""
    problems = []
    u = np.geomspace(lo, min(hi, p.upper * (1 - 1e-6)), n)
    d = p.derivative(u)
    if np.any(np.diff(d) < -1e-9 * (1 + np.abs(d[1:]))):
        problems.append("derivative not nondecreasing (potential not convex)")
    v = p.value(np.geomspace(1e-12, 1e-4, 9))
    if math.isinf(p.value_at_zero):
        if not np.all(np.diff(v) < 0):
            problems.append("value does not increase toward the declared infinite limit at 0")
    elif abs(v[0] - p.value_at_zero) > 1e-4 * (1 + abs(p.value_at_zero)):
        problems.append("value near 0 inconsistent with value_at_zero")
    return problems
