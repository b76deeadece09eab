"""Minimal connections between signed point singularities.

Positive and negative copies of the singular points (and of the boundary,
which acts as a free sink/source) are paired at minimum total semi-metric
cost. The optimal pairing is certified by a 1-Lipschitz potential.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericError, ParameterError, SizeError
from .geometry import BOUNDARY, Domain, semi_metric
from .kernels import hungarian


@dataclass(frozen=True)
class Configuration:
    """Singular points with nonzero integer degrees."""

    points: tuple = ()
    degrees: tuple = ()

    def __post_init__(self):
        pts = tuple((float(p[0]), float(p[1])) for p in self.points)
        degs = tuple(int(d) for d in self.degrees)
        if len(pts) != len(degs):
            raise ParameterError("points and degrees differ in length")
        if any(d == 0 for d in degs):
            raise ParameterError("degrees must be nonzero")
        if len(set(pts)) != len(pts):
            raise ParameterError("singular points must be pairwise distinct")
        if any(float(d) != dd for d, dd in zip(self.degrees, degs)):
            raise ParameterError("degrees must be integers")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "degrees", degs)

    @staticmethod
    def from_pairs(pairs) -> "Configuration":
        pairs = list(pairs)
        return Configuration(tuple(p for p, _ in pairs), tuple(d for _, d in pairs))

    @staticmethod
    def from_json(obj) -> "Configuration":
        try:
            return Configuration(tuple(map(tuple, obj.get("points", []))), tuple(obj.get("degrees", [])))
        except (TypeError, ValueError, AttributeError) as exc:
            raise ParameterError(f"malformed configuration: {exc}") from exc

    def to_json(self) -> dict:
        return {"points": [list(p) for p in self.points], "degrees": list(self.degrees)}

    def __len__(self):
        return len(self.points)

    @property
    def total_degree(self) -> int:
        return sum(self.degrees)

    def check_in(self, domain: Domain) -> None:
        if len(self.points) and not np.all(domain.contains(np.array(self.points))):
            raise DomainError("singular points must lie inside the domain")

    def conjugate(self) -> "Configuration":
        return Configuration(self.points, tuple(-d for d in self.degrees))

    def merge(self, other: "Configuration", tol: float = 0.0) -> "Configuration":
        """Sum of degrees at coinciding points; zero-degree points are dropped."""
        acc: dict = {}
        for p, d in list(zip(self.points, self.degrees)) + list(zip(other.points, other.degrees)):
            key = next((k for k in acc if math.hypot(k[0] - p[0], k[1] - p[1]) <= tol), p)
            acc[key] = acc.get(key, 0) + d
        items = sorted((p, d) for p, d in acc.items() if d != 0)
        return Configuration.from_pairs(items)

    def canonical(self) -> "Configuration":
        """Sorted copy; handy for comparisons."""
        return Configuration.from_pairs(sorted(zip(self.points, self.degrees)))


@dataclass(frozen=True)
class SignedMultiset:
    positives: tuple
    negatives: tuple

    def __post_init__(self):
        norm = lambda xs: tuple(x if x is BOUNDARY else (float(x[0]), float(x[1])) for x in xs)
        object.__setattr__(self, "positives", norm(self.positives))
        object.__setattr__(self, "negatives", norm(self.negatives))
        if len(self.positives) != len(self.negatives):
            raise ParameterError("positive and negative sides must have equal size")
        if {_key(x) for x in self.positives} & {_key(x) for x in self.negatives}:
            raise ParameterError("a location cannot carry both signs")

    @property
    def m(self) -> int:
        return len(self.positives)


@dataclass(frozen=True)
class Matching:
    sigma: tuple  # sigma[i] = index of the negative paired with positive i
    cost: float

    def to_json(self) -> dict:
        return {"cost": self.cost, "pairing": list(self.sigma)}


@dataclass(frozen=True)
class DualPotential:
    locations: tuple  # distinct carried locations, BOUNDARY included when present
    values: tuple
    value: float

    def at(self, x) -> float:
        for loc, z in zip(self.locations, self.values):
            if _key(loc) == _key(x):
                return z
        raise KeyError(x)

    def to_json(self) -> dict:
        locs = ["boundary" if l is BOUNDARY else list(l) for l in self.locations]
        return {"value": self.value, "locations": locs, "potentials": list(self.values)}


def boundary_augment(config: Configuration) -> SignedMultiset:
    P, N = [], []
    for a, d in zip(config.points, config.degrees):
        (P if d > 0 else N).extend([a] * abs(d))
    D = -config.total_degree
    (P if D > 0 else N).extend([BOUNDARY] * abs(D))
    assert len(P) == len(N)
    return SignedMultiset(tuple(P), tuple(N))


def cost_matrix(ms: SignedMultiset, domain: Domain) -> np.ndarray:
    m = ms.m
    C = np.empty((m, m))
    cache: dict = {}
    for i, p in enumerate(ms.positives):
        for j, q in enumerate(ms.negatives):
            key = (p, q)
            if key not in cache:
                cache[key] = semi_metric(domain, p, q)
            C[i, j] = cache[key]
    return C


def _assignment_cost(C):
    if C.shape[0] == 0:
        return 0.0
    cols, _, _ = hungarian(C)
    return float(C[np.arange(len(cols)), cols].sum())


def min_cost_matching(ms: SignedMultiset, domain: Domain) -> Matching:
    """Exact minimum-cost pairing; among optimal pairings the lexicographically smallest."""
    C = cost_matrix(ms, domain)
    m = ms.m
    if m == 0:
        return Matching((), 0.0)
    best = _assignment_cost(C)
    tol = 1e-12 * max(1.0, abs(best)) * m
    rows = list(range(m))
    cols = list(range(m))
    sigma = []
    fixed = 0.0
    for i in range(m):
        sub_rows = rows[1:]
        for jj, j in enumerate(cols):
            rest = [c for c in cols if c != j]
            val = fixed + C[i, j] + _assignment_cost(C[np.ix_(sub_rows, rest)])
            if val <= best + tol:
                sigma.append(j)
                fixed += C[i, j]
                cols = rest
                break
        else:  # pragma: no cover - numerical safety net
            raise NumericError("tie-breaking failed to recover the optimum")
        rows = sub_rows
    cost = float(sum(C[i, j] for i, j in enumerate(sigma)))
    return Matching(tuple(sigma), cost)


def matching_bruteforce(ms: SignedMultiset, domain: Domain) -> Matching:
    """Exhaustive search over all m! pairings (m <= 8)."""
    m = ms.m
    if m > 8:
        raise SizeError("exhaustive matching is limited to m <= 8")
    if m == 0:
        return Matching((), 0.0)
    C = cost_matrix(ms, domain)
    best, arg = math.inf, None
    for perm in itertools.permutations(range(m)):
        c = sum(C[i, perm[i]] for i in range(m))
        if arg is None or c < best - 1e-12 * max(1.0, best):
            best, arg = c, perm
    return Matching(tuple(arg), float(sum(C[i, arg[i]] for i in range(m))))


def _locations(ms: SignedMultiset):
    seen = {}
    for x in ms.positives + ms.negatives:
        seen.setdefault(_key(x), x)
    return list(seen.values())


def kantorovich_dual(ms: SignedMultiset, domain: Domain) -> DualPotential:
    """Optimal 1-Lipschitz potential from the assignment potentials.

    With column potentials v from the assignment, zeta(x) = min_j d(x, N_j) - v_j
    is 1-Lipschitz for the semi-metric and attains the primal cost.
    """
    if ms.m == 0:
        raise ParameterError("dual potential needs at least one pair")
    C = cost_matrix(ms, domain)
    cols, u, v = hungarian(C)
    locs = _locations(ms)
    vals = [min(semi_metric(domain, x, q) - v[j] for j, q in enumerate(ms.negatives)) for x in locs]
    # potentials are defined up to a constant: pin the boundary (or the first location) at zero
    ref = next((z for x, z in zip(locs, vals) if x is BOUNDARY), vals[0])
    pot = {_key(x): z - ref for x, z in zip(locs, vals)}
    value = sum(pot[_key(p)] for p in ms.positives) - sum(pot[_key(q)] for q in ms.negatives)
    return DualPotential(tuple(locs), tuple(pot[_key(x)] for x in locs), float(value))


def _key(x):
    return "boundary" if x is BOUNDARY else tuple(x)


def kantorovich_dual_lp(ms: SignedMultiset, domain: Domain) -> DualPotential:
    """Same linear program solved by a general simplex/interior solver (cross-check)."""
    from scipy.optimize import linprog

    if ms.m == 0:
        raise ParameterError("dual potential needs at least one pair")
    locs = _locations(ms)
    k = len(locs)
    pos = {_key(x): i for i, x in enumerate(locs)}
    idx = lambda x: pos[_key(x)]
    c = np.zeros(k)
    for p in ms.positives:
        c[idx(p)] -= 1.0
    for q in ms.negatives:
        c[idx(q)] += 1.0
    A, b = [], []
    for i in range(k):
        for j in range(k):
            if i != j:
                row = np.zeros(k)
                row[i], row[j] = 1.0, -1.0
                A.append(row)
                b.append(semi_metric(domain, locs[i], locs[j]))
    bounds = [(None, None)] * k
    bounds[0] = (0.0, 0.0)
    res = linprog(c, A_ub=np.array(A) if A else None, b_ub=np.array(b) if b else None, bounds=bounds, method="highs")
    if res.status != 0:
        raise NumericError(f"linear program failed: {res.message}")
    vals = res.x
    value = float(sum(vals[idx(p)] for p in ms.positives) - sum(vals[idx(q)] for q in ms.negatives))
    return DualPotential(tuple(locs), tuple(map(float, vals)), value)


def check_lipschitz(pot: DualPotential, domain: Domain, tol: float = 1e-12) -> float:
    """Largest violation of |zeta(x) - zeta(y)| <= d(x, y) over carried pairs."""
    worst = -math.inf
    L = pot.locations
    for i in range(len(L)):
        for j in range(i + 1, len(L)):
            worst = max(worst, abs(pot.values[i] - pot.values[j]) - semi_metric(domain, L[i], L[j]))
    return worst


def minimal_connection(config: Configuration, domain: Domain) -> float:
    return min_cost_matching(boundary_augment(config), domain).cost


def sigma_exact(config: Configuration, domain: Domain) -> float:
    """2*pi times the minimal connection length."""
    return 2 * math.pi * minimal_connection(config, domain)
