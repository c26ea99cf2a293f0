"""Quadrature rules on the master element [-1,1]^2 and their hybrid dispatch.

Four rule families are provided:

* classical Gauss-Legendre tensor rules,
* modified Gauss-Legendre rules (classical rules on the virtual
  sub-elements bounded by the collocation lines, so that quadrature points
  can never coincide with collocation points),
* Duffy-transformation fans whose Jacobian cancels a 1/r singularity at
  the collocation point,
* 3x3 Gauss-Legendre rules with moment-fitted (adjusted) weights that
  integrate N_A/r exactly on near-singular elements.

``hybrid_rules`` combines them per (scheme, collocation point, element)
for the four schemes G, DG, DGr and DGw.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np


class QuadratureError(ValueError):
    pass


class UnsupportedCollocationError(QuadratureError):
    """Duffy fan requested at a location other than corner/edge-mid/center."""


class FitFailureError(QuadratureError):
    """Moment-fitting system too ill-conditioned to trust."""


@dataclass(frozen=True)
class QuadRule:
    """Parametric points on [-1,1]^2 with weights and a descriptive tag."""

    points: np.ndarray  # (n, 2)
    weights: np.ndarray  # (n,)
    tag: str

    @property
    def size(self) -> int:
        return len(self.weights)


@dataclass(frozen=True)
class SchemeConfig:
    """Hybrid scheme selection: scheme in {G, DG, DGr, DGw} plus density n0."""

    scheme: str = "DGr"
    n0: int = 3
    dgw_mode: str = "table"  # "table" or "fit"

    def __post_init__(self):
        s = self.scheme.upper().replace("GW", "Gw").replace("GR", "Gr")
        object.__setattr__(self, "scheme", {"G": "G", "DG": "DG", "DGR": "DGr", "DGW": "DGw"}[self.scheme.upper()])
        if self.n0 < 2:
            raise QuadratureError("quadrature density n0 must be >= 2")
        if self.dgw_mode not in ("table", "fit"):
            raise QuadratureError("dgw_mode must be 'table' or 'fit'")


def gauss_legendre_1d(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Legendre nodes/weights on [-1,1] by Newton iteration.

    Chebyshev points seed the iteration; weights follow from
    2 / ((1-x^2) P_n'(x)^2).
    """
    if n < 1:
        raise QuadratureError("need at least one point")
    return _gl_cached(int(n))


@lru_cache(maxsize=None)
def _gl_cached(n):
    if n == 1:
        return np.array([0.0]), np.array([2.0])
    k = np.arange(n)
    x = -np.cos(np.pi * (k + 0.75) / (n + 0.5))
    for _ in range(100):
        p, dp = _legendre_and_deriv(n, x)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-16:
            break
    p, dp = _legendre_and_deriv(n, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    # enforce exact symmetry about the origin
    x = (x - x[::-1]) / 2.0
    w = (w + w[::-1]) / 2.0
    return x, w


def _legendre_and_deriv(n, x):
    p0 = np.ones_like(x)
    p1 = x.copy()
    for k in range(2, n + 1):
        p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
    dp = n * (x * p1 - p0) / (x * x - 1.0)
    return p1, dp


def classical_gl_2d(n_tilde: int) -> QuadRule:
    """Tensor-product Gauss-Legendre rule with n_tilde^2 points."""
    return _classical_cached(int(n_tilde))


@lru_cache(maxsize=None)
def _classical_cached(n_tilde):
    x, w = gauss_legendre_1d(n_tilde)
    XI1, XI2 = np.meshgrid(x, x, indexing="xy")
    pts = np.column_stack([XI1.ravel(), XI2.ravel()])
    wts = np.outer(w, w).ravel()
    return QuadRule(pts, wts, f"gl{n_tilde}")


def modified_gl(p: int, q: int, n_tilde: int) -> QuadRule:
    """Classical rules on the p*q virtual sub-elements between collocation lines.

    Each sub-element carries ceil(n_tilde/p)^2 points (per-direction count
    ceil(n_tilde/p), same in both directions as in the biquadratic focus of
    this library), scaled by the sub-element area fraction 1/(p*q).
    """
    return _modified_cached(int(p), int(q), int(n_tilde))


@lru_cache(maxsize=None)
def _modified_cached(p, q, n_tilde):
    if p < 1 or q < 1:
        raise QuadratureError("degrees must be >= 1")
    n_sub = math.ceil(n_tilde / p)
    base = classical_gl_2d(n_sub)
    xi_col = -1.0 + 2.0 * np.arange(p + 1) / p
    eta_col = -1.0 + 2.0 * np.arange(q + 1) / q
    pts, wts = [], []
    for j in range(q):
        for i in range(p):
            cx = (xi_col[i] + xi_col[i + 1]) / 2.0
            cy = (eta_col[j] + eta_col[j + 1]) / 2.0
            pts.append(np.column_stack([cx + base.points[:, 0] / p, cy + base.points[:, 1] / q]))
            wts.append(base.weights / (p * q))
    return QuadRule(np.vstack(pts), np.concatenate(wts), f"mgl{p}x{q}n{n_tilde}")


_DUFFY_LOCS = {"corner", "edge", "center", "pole_edge"}


def duffy_location(xi0) -> str:
    """Classify a master-element collocation location for the Duffy rule."""
    x, y = float(xi0[0]), float(xi0[1])
    def is_end(t):
        return abs(abs(t) - 1.0) < 1e-12
    def is_mid(t):
        return abs(t) < 1e-12
    if is_end(x) and is_end(y):
        return "corner"
    if (is_end(x) and is_mid(y)) or (is_mid(x) and is_end(y)):
        return "edge"
    if is_mid(x) and is_mid(y):
        return "center"
    raise UnsupportedCollocationError(f"unsupported Duffy collocation location {xi0}")


def duffy_rule(xi0, n_tilde: int) -> QuadRule:
    """Duffy fan anchored at xi0 (a corner, edge midpoint or the center).

    The element is split at the collocation lines through xi0 into 1, 2 or
    4 sub-rectangles with xi0 at a corner of each; every sub-rectangle is
    covered by two Duffy triangles carrying an n_tilde x n_tilde tensor
    Gauss grid.  Point totals are therefore 2, 4 and 8 times n_tilde^2 for
    corner, edge-midpoint and center locations.  The map Jacobian is
    proportional to the distance from xi0, which cancels a 1/r kernel
    singularity there.
    """
    x0, y0 = float(xi0[0]), float(xi0[1])
    return _duffy_cached(round(x0, 12), round(y0, 12), int(n_tilde))


@lru_cache(maxsize=None)
def _duffy_cached(x0, y0, n_tilde):
    loc = duffy_location((x0, y0))
    if loc == "corner":
        xs, ys = [(-1.0, 1.0)], [(-1.0, 1.0)]
    elif loc == "edge":
        if abs(x0) < 1e-12:  # split along xi1
            xs, ys = [(-1.0, 0.0), (0.0, 1.0)], [(-1.0, 1.0)]
        else:
            xs, ys = [(-1.0, 1.0)], [(-1.0, 0.0), (0.0, 1.0)]
    else:  # center
        xs, ys = [(-1.0, 0.0), (0.0, 1.0)], [(-1.0, 0.0), (0.0, 1.0)]
    pts, wts = [], []
    for (xa, xb) in xs:
        for (ya, yb) in ys:
            corners = np.array([[xa, ya], [xb, ya], [xb, yb], [xa, yb]])
            d = np.max(np.abs(corners - [x0, y0]), axis=1)
            apex = int(np.argmin(d))
            if d[apex] > 1e-12:
                raise UnsupportedCollocationError("collocation point not at a sub-rectangle corner")
            others = [corners[(apex + k) % 4] for k in (1, 2, 3)]
            for tri in ((corners[apex], others[0], others[1]), (corners[apex], others[1], others[2])):
                p, w = _duffy_triangle(*tri, n_tilde)
                pts.append(p)
                wts.append(w)
    return QuadRule(np.vstack(pts), np.concatenate(wts), f"duffy{loc[0]}n{n_tilde}")


def _duffy_triangle(p0, p1, p2, n_tilde):
    """Tensor Gauss grid on [0,1]^2 pushed through the Duffy map onto (p0,p1,p2)."""
    x, w = gauss_legendre_1d(n_tilde)
    a = (x + 1.0) / 2.0
    wa = w / 2.0
    A, B = np.meshgrid(a, a, indexing="ij")
    WA, WB = np.meshgrid(wa, wa, indexing="ij")
    e1 = np.asarray(p1, dtype=float) - p0
    e2 = np.asarray(p2, dtype=float) - p0
    pts = p0 + A[..., None] * ((1.0 - B)[..., None] * e1 + B[..., None] * e2)
    jac = abs(e1[0] * e2[1] - e1[1] * e2[0])
    wts = WA * WB * A * jac
    return pts.reshape(-1, 2), wts.ravel()


def duffy_pole_rule(collapsed_edge: str, n_tilde: int) -> QuadRule:
    """Corner fan for a collocation point on a collapsed (pole) edge.

    The whole edge maps to the pole, so anchoring the two-triangle corner
    fan at either end of that edge places the apex on the singularity; the
    vanishing surface stretch along the edge keeps the integrand bounded.
    """
    corner = {"v0": (-1.0, -1.0), "v1": (-1.0, 1.0), "u0": (-1.0, -1.0), "u1": (1.0, -1.0)}[collapsed_edge]
    rule = duffy_rule(corner, n_tilde)
    return QuadRule(rule.points, rule.weights, f"duffyp{collapsed_edge}n{n_tilde}")


# -- moment-fitted (adjusted) weights -----------------------------------

_GL3 = None
_GL16 = None


def _gl3_gl16():
    global _GL3, _GL16
    if _GL3 is None:
        _GL3, _GL16 = classical_gl_2d(3), classical_gl_2d(16)
    return _GL3, _GL16


def _bernstein9(pts: np.ndarray) -> np.ndarray:
    """Tensor biquadratic Bernstein values on [-1,1]^2, xi1-major."""
    s = (pts + 1.0) / 2.0
    b = np.stack([(1 - s) ** 2, 2 * s * (1 - s), s ** 2], axis=-1)  # (n,2,3)
    out = np.empty((len(pts), 9))
    for iy in range(3):
        for ix in range(3):
            out[:, ix + 3 * iy] = b[:, 0, ix] * b[:, 1, iy]
    return out


def _solve_moment_system(shape_B, invr_B, J_B, f):
    """Solve A w = f with A_AB = N_A(xi_B) J(xi_B) / r(xi_B)."""
    A = shape_B.T * (J_B * invr_B)[None, :]
    if np.linalg.cond(A, 1) > 1e14:
        raise FitFailureError("moment-fitting system is numerically singular")
    w = np.linalg.solve(A, f)
    res = np.abs(A @ w - f).max()
    if res > 1e-12 * max(np.abs(f).max(), 1e-300):
        raise FitFailureError(f"moment residual too large ({res:.2e})")
    return w


@lru_cache(maxsize=None)
def _flat_adjusted(dx: float, dy: float) -> tuple:
    """Adjusted 3x3 weights for a flat square element, colpt at (dx, dy).

    Master coordinates; the element is [-1,1]^2 with unit stretch.  Scale
    invariance of N/r against the right-hand side makes the result valid
    for flat regular elements of any physical size.
    """
    gl3, gl16 = _gl3_gl16()
    delta = np.array([dx, dy])
    rq = np.linalg.norm(gl16.points - delta, axis=1)
    f = _bernstein9(gl16.points).T @ (gl16.weights / rq)
    rb = np.linalg.norm(gl3.points - delta, axis=1)
    w = _solve_moment_system(_bernstein9(gl3.points), 1.0 / rb, np.ones(9), f)
    return tuple(w)


# the seven offset classes of a regular biquadratic sheet, in master units
ADJUSTED_CLASSES = {(2, 0), (2, 2), (3, 1), (3, 3), (2, 1), (3, 0), (3, 2)}

_D4 = []
for _c in ((1, 0), (-1, 0), (0, 1), (0, -1)):
    for _d in ((0, 1), (0, -1), (1, 0), (-1, 0)):
        _M = np.array([_c, _d]).T
        if abs(round(float(np.linalg.det(_M)))) == 1 and np.all(_M @ _M.T == np.eye(2)):
            _D4.append(_M)


def _grid_perm(M) -> np.ndarray:
    """Index permutation of the 3x3 grid under a D4 transform of offsets."""
    perm = np.empty(9, dtype=int)
    for iy in range(3):
        for ix in range(3):
            o2 = M @ np.array([ix - 1, iy - 1])
            perm[(int(o2[0]) + 1) + 3 * (int(o2[1]) + 1)] = ix + 3 * iy
    return perm


def adjusted_weights_for_offset(delta) -> np.ndarray:
    """Oriented flat-sheet adjusted weights for a collocation offset.

    ``delta`` is the collocation-point position in the near element's
    master frame (so its components lie in {0, +-1, +-2, +-3} for the
    regular-sheet classes).  Raises UnsupportedCollocationError when the
    offset is not one of the seven classes.
    """
    d = np.asarray(delta, dtype=float)
    di = np.round(d).astype(int)
    if np.max(np.abs(d - di)) > 1e-6:
        raise UnsupportedCollocationError(f"offset {d} not on the regular-sheet grid")
    key = (int(max(abs(di))), int(min(abs(di))))
    if key not in {(k[0], k[1]) for k in ((2, 0), (2, 1), (2, 2), (3, 0), (3, 1), (3, 2), (3, 3))}:
        raise UnsupportedCollocationError(f"offset {tuple(di)} matches no adjusted-weight class")
    canon = np.array([-key[0], -key[1]])
    w_star = np.asarray(_flat_adjusted(float(canon[0]), float(canon[1])))
    for M in _D4:
        if np.all(M @ canon == di):
            return w_star[_grid_perm(M)]
    raise UnsupportedCollocationError(f"no D4 transform maps {tuple(canon)} to {tuple(di)}")


def moment_fit_adjusted(mesh, element, colpt) -> QuadRule:
    """Per-element moment fit of the 3x3 weights (curved surfaces too).

    Builds A and the right-hand side from the element's own shape
    functions, surface stretch and the true distances to the collocation
    point; the 16x16 classical rule supplies the reference moments.
    """
    gl3, gl16 = _gl3_gl16()
    fb16 = mesh.frames(element, gl16.points)
    r16 = np.linalg.norm(fb16.x - colpt.position, axis=1)
    f = fb16.shapes.T @ (fb16.J * gl16.weights / r16)
    fb3 = mesh.frames(element, gl3.points)
    r3 = np.linalg.norm(fb3.x - colpt.position, axis=1)
    w = _solve_moment_system(fb3.shapes, 1.0 / r3, fb3.J, f)
    return QuadRule(gl3.points, w, "adjw-fit")


# -- hybrid dispatch ----------------------------------------------------

@dataclass
class ElementRules:
    """Per-collocation-point quadrature assignment.

    ``special`` holds the elements with a non-default rule; every other
    element uses ``default`` (classical GL with n0 points per direction).
    """

    default: QuadRule
    special: dict
    fallbacks: tuple = ()

    def rule_for(self, el_index: int) -> QuadRule:
        return self.special.get(el_index, self.default)

    def total_points(self, n_el: int) -> int:
        return self.default.size * (n_el - len(self.special)) + sum(
            r.size for r in self.special.values()
        )


def hybrid_rules(mesh, colpt, cfg: SchemeConfig) -> ElementRules:
    """Quadrature rules for one collocation point under a hybrid scheme.

    G    : singular -> modified GL(n0) at interior/edge locations,
           classical GL(n0) at corners and poles; rest classical GL(n0).
    DG   : singular -> Duffy(2 n0); rest classical GL(n0).
    DGr  : singular -> Duffy(2 n0); near -> classical GL(2 n0).
    DGw  : singular -> Duffy(2 n0); near -> adjusted 3x3 weights, with
           classical GL(2 n0) on pole-adjacent neighbors of degenerate
           elements and on neighbors whose parametric offset is ambiguous
           (three-patch corners) or outside the seven flat-sheet classes.
    """
    from .geometry import classify

    cls = classify(mesh, colpt)
    special = {}
    fallbacks = []
    default = classical_gl_2d(cfg.n0)
    for e in cls.singular:
        loc = cls.xi0[e]
        if isinstance(loc, tuple) and loc[0] == "pole":
            if cfg.scheme == "G":
                continue  # classical GL, same as default
            special[e] = duffy_pole_rule(loc[1], 2 * cfg.n0)
            continue
        xi0 = loc
        kind = duffy_location(xi0)
        if cfg.scheme == "G":
            if kind in ("edge", "center"):
                pa = mesh.patches[mesh.elements[e].patch_id]
                special[e] = modified_gl(pa.p, pa.q, cfg.n0)
            # corner locations keep the classical default
        else:
            special[e] = duffy_rule(xi0, 2 * cfg.n0)
    if cfg.scheme == "DGr":
        refined = classical_gl_2d(2 * cfg.n0)
        for e in cls.near:
            special[e] = refined
    elif cfg.scheme == "DGw":
        refined = classical_gl_2d(2 * cfg.n0)
        for e in cls.near:
            if e in cls.pole_adjacent_near:
                special[e] = refined
                continue
            try:
                special[e] = _adjusted_rule(mesh, colpt, mesh.elements[e], cfg)
            except FitFailureError:
                special[e] = classical_gl_2d(16)
                fallbacks.append((e, "fit-failure"))
            except UnsupportedCollocationError:
                special[e] = refined
                fallbacks.append((e, "no-class"))
    return ElementRules(default, special, tuple(fallbacks))


def _adjusted_rule(mesh, colpt, element, cfg) -> QuadRule:
    if cfg.dgw_mode == "fit":
        return moment_fit_adjusted(mesh, element, colpt)
    offsets = set()
    for inst in colpt.instances:
        for (u, v) in mesh.unfold(inst, element.patch_id):
            xi = element.master_of(u, v)
            if np.max(np.abs(xi)) <= 3.0 + 1e-6:
                offsets.add((round(float(xi[0]), 6), round(float(xi[1]), 6)))
    if len(offsets) != 1:
        raise UnsupportedCollocationError(
            f"ambiguous or missing parametric offset ({sorted(offsets)})"
        )
    delta = next(iter(offsets))
    w = adjusted_weights_for_offset(delta)
    gl3, _ = _gl3_gl16()
    return QuadRule(gl3.points, w, f"adjw-table({delta[0]:g},{delta[1]:g})")


def count_quadrature_points(mesh, cfg: SchemeConfig) -> int:
    """Total n_qp = sum over collocation points and elements (Eq.-style tally)."""
    total = 0
    for cp in mesh.collocation:
        total += hybrid_rules(mesh, cp, cfg).total_points(mesh.n_el)
    return total


# -- integration over elements ------------------------------------------

def integrate(rule: QuadRule, mesh, element, kernel):
    """Sum kernel(frame) * J * w over the rule points.

    ``kernel`` maps a SurfaceFrame to a float or array.  Raises on
    non-finite kernel values, reporting the offending point.
    """
    total = None
    for xi, w in zip(rule.points, rule.weights):
        fr = mesh.frame(element, xi)
        val = np.asarray(kernel(fr), dtype=float)
        if not np.all(np.isfinite(val)):
            raise QuadratureError(
                f"non-finite kernel at xi={tuple(xi)} of element {element.index}"
            )
        total = val * (fr.J * w) if total is None else total + val * (fr.J * w)
    return total if total is not None and total.shape else float(total)


def min_distance(rule: QuadRule, mesh, element, colpt) -> float:
    fb = mesh.frames(element, rule.points, shapes=False)
    return float(np.min(np.linalg.norm(fb.x - colpt.position, axis=1)))
