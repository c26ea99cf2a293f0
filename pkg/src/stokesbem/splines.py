"""B-spline basis evaluation, Greville abscissae and knot insertion.

Everything here works on open (clamped) knot vectors.  Basis values are
computed with the Cox-de Boor recursion directly; rational (NURBS) geometry
is handled one level up by evaluating weighted control points homogeneously
and projecting.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SplineError(ValueError):
    """Invalid spline input (parameter out of range, bad refinement, ...)."""


@dataclass(frozen=True)
class KnotVector:
    """Open knot vector of degree ``p``.

    ``len(knots) == n_basis + p + 1`` and the first/last knot are repeated
    exactly ``p + 1`` times.
    """

    knots: np.ndarray
    degree: int

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        object.__setattr__(self, "knots", knots)
        p = self.degree
        if p < 0:
            raise SplineError("degree must be nonnegative")
        if len(knots) < 2 * (p + 1):
            raise SplineError("knot vector too short for degree")
        if np.any(np.diff(knots) < 0):
            raise SplineError("knots must be nondecreasing")
        if not (np.all(knots[: p + 1] == knots[0]) and np.all(knots[-(p + 1):] == knots[-1])):
            raise SplineError("knot vector must be open (clamped)")

    @property
    def n_basis(self) -> int:
        return len(self.knots) - self.degree - 1

    @property
    def start(self) -> float:
        return float(self.knots[0])

    @property
    def end(self) -> float:
        return float(self.knots[-1])

    def spans(self) -> np.ndarray:
        """Indices i of all nonempty spans [knots[i], knots[i+1])."""
        k = self.knots
        return np.nonzero(k[1:] > k[:-1])[0]

    def find_span(self, u: float) -> int:
        """Span index i with knots[i] <= u < knots[i+1] (last span closed)."""
        k, p = self.knots, self.degree
        if u < k[0] or u > k[-1]:
            raise SplineError(f"parameter {u} outside knot range [{k[0]}, {k[-1]}]")
        n = self.n_basis
        if u >= k[n]:  # right end: clamp into the last nonempty span
            i = n - 1
            while k[i] == k[i + 1]:
                i -= 1
            return i
        return int(np.searchsorted(k, u, side="right") - 1)


@dataclass
class BasisValues:
    """Nonzero basis functions at one parameter value.

    ``values[j]`` belongs to basis function ``span_index - p + j``; the rows
    of ``derivatives`` hold the requested derivative orders (1st, 2nd, ...).
    """

    span_index: int
    values: np.ndarray
    derivatives: np.ndarray

    @property
    def first_func(self) -> int:
        return self.span_index - (len(self.values) - 1)


def eval_basis(kv: KnotVector, u, n_ders: int = 1):
    """Nonzero B-spline basis values (and derivatives) at ``u``.

    ``u`` may be a scalar or an array of parameters lying in one common
    span; arrays are evaluated vectorized.  Returns ``BasisValues`` for a
    scalar, else ``(span, values(m,p+1), ders(n_ders,m,p+1))``.
    """
    scalar = np.isscalar(u) or np.ndim(u) == 0
    uu = np.atleast_1d(np.asarray(u, dtype=float))
    span = kv.find_span(float(uu[0]))
    if not scalar:
        for x in uu:
            if kv.find_span(float(x)) != span:
                raise SplineError("vectorized eval_basis requires one common span")
    vals, ders = _basis_and_ders(kv.knots, kv.degree, span, uu, n_ders)
    if scalar:
        return BasisValues(span, vals[0], ders[:, 0, :])
    return span, vals, ders


def _basis_and_ders(knots, p, span, u, n_ders):
    """Cox-de Boor triangle with derivatives (vectorized over u).

    Returns (values (m, p+1), ders (n_ders, m, p+1)).
    """
    m = len(u)
    dt = u.dtype if u.dtype in (np.float64, np.longdouble) else np.float64
    ndu = np.zeros((p + 1, p + 1, m), dtype=dt)
    ndu[0, 0] = 1.0
    left = np.zeros((p + 1, m), dtype=dt)
    right = np.zeros((p + 1, m), dtype=dt)
    for j in range(1, p + 1):
        left[j] = u - knots[span + 1 - j]
        right[j] = knots[span + j] - u
        saved = np.zeros(m)
        for r in range(j):
            ndu[j, r] = right[r + 1] + left[j - r]
            with np.errstate(divide="ignore", invalid="ignore"):
                temp = np.where(ndu[j, r] != 0.0, ndu[r, j - 1] / ndu[j, r], 0.0)
            ndu[r, j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j, j] = saved
    values = ndu[:, p].T.copy()  # (m, p+1)

    n_ders = min(n_ders, p) if n_ders >= 0 else 0
    ders = np.zeros((max(n_ders, 0), m, p + 1), dtype=dt)
    for r in range(p + 1):
        s1, s2 = 0, 1
        a = np.zeros((2, p + 1, m), dtype=dt)
        a[0, 0] = 1.0
        for k in range(1, n_ders + 1):
            d = np.zeros(m)
            rk, pk = r - k, p - k
            if r >= k:
                a[s2, 0] = np.where(ndu[pk + 1, rk] != 0, a[s1, 0] / ndu[pk + 1, rk], 0.0)
                d = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2, j] = np.where(
                    ndu[pk + 1, rk + j] != 0,
                    (a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j],
                    0.0,
                )
                d = d + a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, k] = np.where(ndu[pk + 1, r] != 0, -a[s1, k - 1] / ndu[pk + 1, r], 0.0)
                d = d + a[s2, k] * ndu[r, pk]
            ders[k - 1, :, r] = d
            s1, s2 = s2, s1
    # multiply through by p! / (p-k)!
    fac = float(p)
    for k in range(1, n_ders + 1):
        ders[k - 1] *= fac
        fac *= p - k
    return values, ders


def greville_abscissae(kv: KnotVector) -> np.ndarray:
    """Knot averages: gamma_i = mean(knots[i+1 : i+p+1])."""
    p = kv.degree
    if p == 0:
        return kv.knots[:-1].copy()
    k = kv.knots
    return np.array([k[i + 1: i + p + 1].mean() for i in range(kv.n_basis)])


def insert_knot(kv: KnotVector, controls: np.ndarray, u: float) -> tuple[KnotVector, np.ndarray]:
    """Boehm single-knot insertion; geometry is preserved exactly.

    ``controls`` has shape (n_basis, k); for NURBS pass homogeneous
    (weighted) coordinates.  Raises if the new multiplicity would exceed p.
    """
    p, knots = kv.degree, kv.knots
    if not (knots[0] < u < knots[-1]):
        raise SplineError("insertion knot must lie strictly inside the range")
    mult = int(np.sum(knots == u))
    if mult >= p:
        raise SplineError(f"multiplicity of {u} would exceed degree {p}")
    span = kv.find_span(u)
    ctrl = np.asarray(controls, dtype=float)
    if ctrl.shape[0] != kv.n_basis:
        raise SplineError("control count does not match knot vector")
    new = np.empty((ctrl.shape[0] + 1,) + ctrl.shape[1:])
    new[: span - p + 1] = ctrl[: span - p + 1]
    new[span + 1:] = ctrl[span:]
    for i in range(span - p + 1, span + 1):
        denom = knots[i + p] - knots[i]
        alpha = (u - knots[i]) / denom if denom > 0 else 0.0
        new[i] = alpha * ctrl[i] + (1.0 - alpha) * ctrl[i - 1]
    new_kv = KnotVector(np.insert(knots, span + 1, u), p)
    return new_kv, new


def refine_knots(kv: KnotVector, controls: np.ndarray, new_knots) -> tuple[KnotVector, np.ndarray]:
    """Insert several knots (sorted insertion order does not matter)."""
    out_kv, out_c = kv, np.asarray(controls, dtype=float)
    for u in sorted(new_knots):
        out_kv, out_c = insert_knot(out_kv, out_c, float(u))
    return out_kv, out_c


def span_midpoints(kv: KnotVector) -> np.ndarray:
    k = kv.knots
    s = kv.spans()
    return (k[s] + k[s + 1]) / 2.0


def uniform_open_knots(n_elements: int, degree: int = 2, lo: float = 0.0, hi: float = 1.0) -> KnotVector:
    """Open knot vector with ``n_elements`` equal spans on [lo, hi]."""
    if n_elements < 1:
        raise SplineError("need at least one element")
    interior = np.linspace(lo, hi, n_elements + 1)
    knots = np.concatenate([np.full(degree, lo), interior, np.full(degree, hi)])
    return KnotVector(knots, degree)
