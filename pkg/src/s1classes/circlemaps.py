"""Lipschitz self-maps of the unit circle, stored as continuous lifts.

A map is described by its lift tau on [0, 2*pi] and its integer degree, with
tau(2*pi) - tau(0) = 2*pi*degree. The lift is extended to the whole line by
tau(x + 2*pi*k) = tau(x) + 2*pi*k*degree, which is what composition with a
lifted field phase uses.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import ParameterError

TWO_PI = 2.0 * math.pi


class CircleMap:
    degree: int = 1
    name: str = "map"

    # to be provided by subclasses
    def lift(self, t):
        raise NotImplementedError

    def deriv(self, t):
        raise NotImplementedError

    def cumvar(self, t):
        """Total variation of the lift on [0, t] for t in [0, 2*pi]."""
        tab_t, tab_v = self._var_table()
        return np.interp(t, tab_t, tab_v)

    def _var_table(self, n=1 << 16):
        if not hasattr(self, "_vt"):
            t = np.linspace(0.0, TWO_PI, n + 1)
            d = np.abs(self.deriv(0.5 * (t[1:] + t[:-1])))
            v = np.concatenate([[0.0], np.cumsum(d * np.diff(t))])
            object.__setattr__(self, "_vt", (t, v))
        return self._vt

    @property
    def total_variation(self) -> float:
        return float(self.cumvar(TWO_PI))

    # derived ---------------------------------------------------------------
    def ext(self, x):
        """Extended lift on the real line."""
        x = np.asarray(x, dtype=float)
        k = np.floor(x / TWO_PI)
        return self.lift(x - TWO_PI * k) + TWO_PI * self.degree * k

    def ext_var(self, x):
        """Cumulative variation of the extended lift (nondecreasing in x)."""
        x = np.asarray(x, dtype=float)
        k = np.floor(x / TWO_PI)
        return self.cumvar(x - TWO_PI * k) + self.total_variation * k

    def __call__(self, z):
        z = np.asarray(z)
        phi = np.mod(np.angle(z), TWO_PI)
        return np.exp(1j * self.lift(phi))

    def to_json(self) -> dict:
        return {"name": self.name, "params": {}}

    def __repr__(self):
        return f"{type(self).__name__}({self.to_json().get('params', {})}, degree={self.degree})"


class PiecewiseLinearMap(CircleMap):
    """Lift given by breakpoints 0 = t_0 < ... < t_k = 2*pi and values."""

    name = "piecewise_linear"

    def __init__(self, breaks, values, degree: int):
        b = np.asarray(breaks, dtype=float)
        v = np.asarray(values, dtype=float)
        if b.ndim != 1 or b.shape != v.shape or len(b) < 2:
            raise ParameterError("breaks and values must be 1-d arrays of equal length >= 2")
        if abs(b[0]) > 1e-12 or abs(b[-1] - TWO_PI) > 1e-9 or np.any(np.diff(b) < 0):
            raise ParameterError("breaks must increase from 0 to 2*pi")
        if int(degree) != degree:
            raise ParameterError("degree must be an integer")
        if abs((v[-1] - v[0]) - TWO_PI * degree) > 1e-9 * max(1.0, np.abs(v).max()):
            raise ParameterError("lift increment does not match the degree")
        b = b.copy()
        b[0], b[-1] = 0.0, TWO_PI
        keep = np.concatenate([np.diff(b) > 0, [True]])  # drop zero-width pieces
        b, v = b[keep], v[keep]
        v = v.copy()
        v[-1] = v[0] + TWO_PI * int(degree)
        self.breaks, self.values, self.degree = b, v, int(degree)
        self.breaks.setflags(write=False)
        self.values.setflags(write=False)
        self.slopes = np.diff(v) / np.diff(b)
        self._cv = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(v)))])

    def lift(self, t):
        return np.interp(t, self.breaks, self.values)

    def deriv(self, t):
        i = np.clip(np.searchsorted(self.breaks, t, side="right") - 1, 0, len(self.slopes) - 1)
        return self.slopes[i]

    def cumvar(self, t):
        return np.interp(t, self.breaks, self._cv)

    def to_json(self) -> dict:
        return {"name": self.name, "breaks": self.breaks.tolist(), "values": self.values.tolist(), "degree": self.degree}


class SineMap(CircleMap):
    """theta = pi*sin(phi/2) for phi in (-pi, pi]; a degree-one homeomorphism."""

    name = "sine"
    degree = 1

    def lift(self, t):
        t = np.asarray(t, dtype=float)
        s = math.pi * np.sin(t / 2)
        return np.where(t <= math.pi, s, TWO_PI - s)

    def deriv(self, t):
        return 0.5 * math.pi * np.abs(np.cos(np.asarray(t, dtype=float) / 2))

    def cumvar(self, t):
        return self.lift(t)


def _J(s, eps):
    """Odd C1 blend: identity on |s| <= 1-eps, cubic Hermite up to J(1)=1, J'(1)=0."""
    s = np.asarray(s, dtype=float)
    a = np.abs(s)
    u = np.clip((a - (1 - eps)) / eps, 0.0, 1.0)
    blend = (1 - eps) + eps * (-(u**3) + u**2 + u)
    return np.sign(s) * np.where(a <= 1 - eps, a, blend)


def _Jprime(s, eps):
    a = np.abs(np.asarray(s, dtype=float))
    u = np.clip((a - (1 - eps)) / eps, 0.0, 1.0)
    return np.where(a <= 1 - eps, 1.0, (1 - u) * (3 * u + 1))


class SmoothInverseMap(CircleMap):
    """phi = 2*asin(J(theta/pi)); inverts the sine map where |theta| <= pi*(1-eps)."""

    name = "smooth_inverse"
    degree = 1

    def __init__(self, eps: float):
        if not 0 < eps < 0.5:
            raise ParameterError("eps must lie in (0, 1/2)")
        self.eps = float(eps)

    def _s(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t <= math.pi, t / math.pi, (t - TWO_PI) / math.pi)

    def lift(self, t):
        t = np.asarray(t, dtype=float)
        phi = 2 * np.arcsin(np.clip(_J(self._s(t), self.eps), -1.0, 1.0))
        return np.where(t <= math.pi, phi, TWO_PI + phi)

    def deriv(self, t):
        s = self._s(t)
        e = self.eps
        a = np.abs(s)
        core = 1.0 / np.sqrt(np.maximum(1 - s * s, 1e-300))
        # on the blend J' / sqrt(1 - J^2) simplifies with w = 1 - u to a regular expression
        w = 1.0 - np.clip((a - (1 - e)) / e, 0.0, 1.0)
        blend = (4 - 3 * w) / np.sqrt(e * (2 - w) * (2 - e * w * w * (2 - w)))
        return (2 / math.pi) * np.where(a <= 1 - e, core, blend)

    def cumvar(self, t):
        return self.lift(t)

    def J(self, s):
        return _J(s, self.eps)

    def Jprime(self, s):
        return _Jprime(s, self.eps)

    def to_json(self) -> dict:
        return {"name": self.name, "params": {"eps": self.eps}}


class ComposedMap(CircleMap):
    """f o g evaluated pointwise (used when a factor is not piecewise-linear)."""

    name = "composed"

    def __init__(self, f: CircleMap, g: CircleMap):
        self.f, self.g = f, g
        self.degree = f.degree * g.degree

    def lift(self, t):
        return self.f.ext(self.g.lift(t))

    def deriv(self, t):
        return self.f.deriv(np.mod(self.g.lift(t), TWO_PI)) * self.g.deriv(t)

    def to_json(self) -> dict:
        return {"name": self.name, "params": {"outer": self.f.to_json(), "inner": self.g.to_json()}}


# constructors -----------------------------------------------------------------

def identity_map() -> PiecewiseLinearMap:
    return PiecewiseLinearMap([0.0, TWO_PI], [0.0, TWO_PI], 1)


def tn_map(n: int) -> PiecewiseLinearMap:
    """Sawtooth of degree one: slope n then -(n-2) on alternating intervals of length pi/n^2."""
    if int(n) != n or n < 3:
        raise ParameterError("n must be an integer >= 3")
    n = int(n)
    k = np.arange(2 * n * n + 1)
    j = k // 2
    breaks = k * math.pi / (n * n)
    values = TWO_PI * j / (n * n) + np.where(k % 2 == 1, math.pi / n, 0.0)
    return PiecewiseLinearMap(breaks, values, 1)


def projection_map(zeta) -> PiecewiseLinearMap:
    """Identity on the half circle from zeta counterclockwise to -zeta, reflection z -> zeta^2 conj(z) elsewhere."""
    zeta = complex(zeta)
    if abs(abs(zeta) - 1) > 1e-9:
        raise ParameterError("zeta must have unit modulus")
    alpha = math.atan2(zeta.imag, zeta.real) % TWO_PI

    def tau(t):
        s = np.mod(np.asarray(t, float) - alpha, TWO_PI)
        return alpha + np.minimum(s, TWO_PI - s)

    b = np.unique(np.array([0.0, alpha, (alpha + math.pi) % TWO_PI, TWO_PI]))
    pm = PiecewiseLinearMap(b, tau(b), 0)
    pm.zeta = zeta
    return pm


def k_map(delta: float) -> PiecewiseLinearMap:
    """Degree-one map collapsing the arcs around 1 and -1 of half-width delta."""
    if not 0 < delta < math.pi / 2:
        raise ParameterError("delta must lie in (0, pi/2)")
    d = float(delta)
    b = [0.0, d, math.pi - d, math.pi + d, TWO_PI - d, TWO_PI]
    v = [0.0, 0.0, math.pi, math.pi, TWO_PI, TWO_PI]
    return PiecewiseLinearMap(b, v, 1)


def sine_map() -> SineMap:
    return SineMap()


def smooth_inverse_map(eps: float) -> SmoothInverseMap:
    return SmoothInverseMap(eps)


def dipole_map(theta: float, eps: float) -> PiecewiseLinearMap:
    """Constant 1 off the arc (theta - eps/2, theta + eps/2); winds once linearly across it."""
    if not 0 < eps < TWO_PI:
        raise ParameterError("eps must lie in (0, 2*pi)")
    a = (theta - eps / 2) % TWO_PI
    if a + eps <= TWO_PI:
        b = [0.0, a, a + eps, TWO_PI]
        v = [0.0, 0.0, TWO_PI, TWO_PI]
    else:
        c = a + eps - TWO_PI
        start = TWO_PI * (TWO_PI - a) / eps
        b = [0.0, c, a, TWO_PI]
        v = [start, TWO_PI, TWO_PI, TWO_PI + start]
    return PiecewiseLinearMap(b, v, 1)


def split_maps(delta: float):
    """(T0, T1): T1 sends the complement of the arc (2pi - delta, 2pi) to the upper half circle
    and the arc to the lower one; T0 is the conjugate of T1 off the arc and equals it on the arc."""
    if not 0 < delta < TWO_PI:
        raise ParameterError("delta must lie in (0, 2*pi)")
    b = [0.0, TWO_PI - delta, TWO_PI]
    T1 = PiecewiseLinearMap(b, [0.0, math.pi, TWO_PI], 1)
    T0 = PiecewiseLinearMap(b, [0.0, -math.pi, 0.0], 0)
    return T0, T1


def compose(f: CircleMap, g: CircleMap) -> CircleMap:
    """Lift of f o g; exact piecewise-linear result when both factors are piecewise-linear."""
    if not (isinstance(f, PiecewiseLinearMap) and isinstance(g, PiecewiseLinearMap)):
        return ComposedMap(f, g)
    fb = f.breaks[:-1]
    ts = [g.breaks]
    for t0, t1, y0, y1 in zip(g.breaks[:-1], g.breaks[1:], g.values[:-1], g.values[1:]):
        lo, hi = min(y0, y1), max(y0, y1)
        if hi == lo:
            continue
        ks = np.arange(math.floor(lo / TWO_PI), math.floor(hi / TWO_PI) + 1)
        cand = (fb[None, :] + TWO_PI * ks[:, None]).ravel()
        cand = cand[(cand > lo) & (cand < hi)]
        if cand.size:
            ts.append(t0 + (cand - y0) / (y1 - y0) * (t1 - t0))
    t = np.unique(np.concatenate(ts))
    return PiecewiseLinearMap(t, f.ext(g.lift(t)), f.degree * g.degree)


def derivative_bounds(f: CircleMap):
    """(min |tau'|, max |tau'|)."""
    if isinstance(f, PiecewiseLinearMap):
        s = np.abs(f.slopes[np.diff(f.breaks) > 0])
        return float(s.min()), float(s.max())
    if isinstance(f, SineMap):
        return 0.0, math.pi / 2
    t = np.linspace(0.0, TWO_PI, 200001)
    d = np.abs(f.deriv(t))  # the scan contains 0 and pi, where the smooth inverse attains its extremes
    return float(d.min()), float(d.max())


def from_json(obj: dict) -> CircleMap:
    name = obj.get("name")
    p = obj.get("params", {})
    if name == "piecewise_linear":
        return PiecewiseLinearMap(obj["breaks"], obj["values"], obj["degree"])
    if name == "sine":
        return sine_map()
    if name == "smooth_inverse":
        return smooth_inverse_map(p["eps"])
    if name == "composed":
        return compose(from_json(p["outer"]), from_json(p["inner"]))
    factories = {"tn": tn_map, "projection": lambda **k: projection_map(complex(*k["zeta"])),
                 "k": k_map, "dipole": dipole_map, "identity": identity_map}
    if name in factories:
        return factories[name](**p)
    raise ParameterError(f"unknown circle map {name!r}")
