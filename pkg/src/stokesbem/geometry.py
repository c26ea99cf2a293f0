"""Benchmark surfaces and their mesh structure.

Builders: a flat biquadratic B-spline sheet, an exact single-patch NURBS
sphere of revolution (degenerate poles), an approximate six-patch sphere
(per-level Greville interpolation of cube-face points projected to the
sphere) and an anisotropically scaled ellipsoid.

The SurfaceMesh couples patches, elements, deduplicated global control
points, collocation points at the Greville abscissae, element adjacency
through shared corner vertices (across patch boundaries and degenerate
poles) and the patch-side correspondences needed to unfold parametric
neighborhoods across patch boundaries.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .splines import KnotVector, eval_basis, greville_abscissae, refine_knots, span_midpoints, uniform_open_knots


class GeometryError(ValueError):
    pass


@dataclass
class NurbsPatch:
    """Tensor-product rational patch: degrees, knot vectors, weighted net."""

    U: KnotVector
    V: KnotVector
    cps: np.ndarray      # (nu, nv, 3)
    weights: np.ndarray  # (nu, nv)

    def __post_init__(self):
        nu, nv = self.U.n_basis, self.V.n_basis
        if self.cps.shape != (nu, nv, 3):
            raise GeometryError("control net inconsistent with knot vectors")
        if self.weights.shape != (nu, nv):
            raise GeometryError("weight grid inconsistent with knot vectors")
        if np.any(self.weights <= 0):
            raise GeometryError("weights must be positive")

    @property
    def p(self) -> int:
        return self.U.degree

    @property
    def q(self) -> int:
        return self.V.degree

    def evaluate(self, u: float, v: float, ders: bool = False):
        """Surface point (and first parametric derivatives)."""
        bu = eval_basis(self.U, u)
        bv = eval_basis(self.V, v)
        iu, iv = bu.first_func, bv.first_func
        w = self.weights[iu: iu + self.p + 1, iv: iv + self.q + 1]
        hp = self.cps[iu: iu + self.p + 1, iv: iv + self.q + 1] * w[..., None]
        W = np.einsum("i,j,ij->", bu.values, bv.values, w)
        A = np.einsum("i,j,ijk->k", bu.values, bv.values, hp)
        S = A / W
        if not ders:
            return S
        Wu = np.einsum("i,j,ij->", bu.derivatives[0], bv.values, w)
        Wv = np.einsum("i,j,ij->", bu.values, bv.derivatives[0], w)
        Au = np.einsum("i,j,ijk->k", bu.derivatives[0], bv.values, hp)
        Av = np.einsum("i,j,ijk->k", bu.values, bv.derivatives[0], hp)
        Su = (Au - Wu * S) / W
        Sv = (Av - Wv * S) / W
        return S, Su, Sv


@dataclass
class Element:
    """One knot-span product of a patch, mapped affinely from [-1,1]^2."""

    index: int
    patch_id: int
    span_u: tuple[float, float]
    span_v: tuple[float, float]
    iu: int  # knot span index in U
    iv: int
    ctrl_gids: np.ndarray        # (p+1)*(q+1) global control ids, u-major
    corner_vids: tuple[int, ...] = ()
    degenerate_edges: tuple[str, ...] = ()

    def param_of(self, xi):
        xi = np.atleast_2d(xi)
        u0, u1 = self.span_u
        v0, v1 = self.span_v
        u = u0 + (xi[:, 0] + 1.0) * 0.5 * (u1 - u0)
        v = v0 + (xi[:, 1] + 1.0) * 0.5 * (v1 - v0)
        return u, v

    def master_of(self, u, v):
        u0, u1 = self.span_u
        v0, v1 = self.span_v
        return np.array([2.0 * (u - u0) / (u1 - u0) - 1.0, 2.0 * (v - v0) / (v1 - v0) - 1.0])

    def contains_param(self, u, v, tol=1e-12):
        return (self.span_u[0] - tol <= u <= self.span_u[1] + tol) and (
            self.span_v[0] - tol <= v <= self.span_v[1] + tol
        )


@dataclass
class SurfaceFrame:
    """Position, parametric tangents, unit normal and master-area stretch."""

    x: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    normal: np.ndarray
    J: float
    degenerate: bool = False


@dataclass
class CollocationPoint:
    index: int
    position: np.ndarray
    instances: list          # [(patch_id, u, v), ...] parametric preimages
    kind: str = "M"          # C, E, M, pole, patch_edge, patch_corner
    is_pole: bool = False


@dataclass
class FrameBatch:
    """Vectorized frames at many master points of one element."""

    x: np.ndarray        # (n, 3)
    normal: np.ndarray   # (n, 3)
    J: np.ndarray        # (n,)
    shapes: np.ndarray   # (n, n_loc) element shape functions


class SurfaceMesh:
    def __init__(self, patches, closed, planar, name=""):
        self.patches: list[NurbsPatch] = patches
        self.closed = closed
        self.planar = planar
        self.name = name
        self._build()

    # -- construction -------------------------------------------------
    def _build(self):
        self._dedup_controls()
        self._build_elements()
        self._build_vertices()
        self._build_collocation()
        self._build_topology()

    def _dedup_controls(self):
        pts, owner = [], []
        for pid, pa in enumerate(self.patches):
            nu, nv = pa.U.n_basis, pa.V.n_basis
            for i in range(nu):
                for j in range(nv):
                    pts.append(pa.cps[i, j])
                    owner.append((pid, i, j))
        pts = np.asarray(pts)
        bbox = pts.max(axis=0) - pts.min(axis=0)
        self.char_length = float(np.linalg.norm(bbox)) or 1.0
        gids = _dedup_points(pts, 1e-10 * self.char_length)
        self.n_no = int(gids.max()) + 1
        self.ctrl_gid = {}
        self.ctrl_xyz = np.zeros((self.n_no, 3))
        for (pid, i, j), g, x in zip(owner, gids, pts):
            self.ctrl_gid[(pid, i, j)] = int(g)
            self.ctrl_xyz[g] = x

    def _build_elements(self):
        self.elements: list[Element] = []
        self._el_index = {}
        self._span_bins = []
        for pid, pa in enumerate(self.patches):
            for iv in pa.V.spans():
                for iu in pa.U.spans():
                    # u-major ordering: local A = i_loc + (p+1)*j_loc
                    gids = np.array(
                        [self.ctrl_gid[(pid, iu - pa.p + a, iv - pa.q + b)]
                         for b in range(pa.q + 1) for a in range(pa.p + 1)],
                        dtype=int,
                    )
                    el = Element(
                        index=len(self.elements),
                        patch_id=pid,
                        span_u=(pa.U.knots[iu], pa.U.knots[iu + 1]),
                        span_v=(pa.V.knots[iv], pa.V.knots[iv + 1]),
                        iu=int(iu),
                        iv=int(iv),
                        ctrl_gids=gids,
                    )
                    self._el_index[(pid, int(iu), int(iv))] = el.index
                    self.elements.append(el)
            ubp = np.unique(pa.U.knots[np.concatenate([pa.U.spans(), pa.U.spans() + 1])])
            vbp = np.unique(pa.V.knots[np.concatenate([pa.V.spans(), pa.V.spans() + 1])])
            self._span_bins.append((ubp, pa.U.spans(), vbp, pa.V.spans()))
        self.n_el = len(self.elements)

    def owning_elements(self, pid: int, u: float, v: float, tol: float = 1e-12) -> list[int]:
        """Elements of a patch whose closed span contains (u, v)."""
        ubp, uspans, vbp, vspans = self._span_bins[pid]

        def hits(bp, spans, t):
            k = int(np.searchsorted(bp, t + tol)) - 1
            out = []
            for j in (k - 1, k):
                if 0 <= j < len(spans) and bp[j] - tol <= t <= bp[j + 1] + tol:
                    out.append(int(spans[j]))
            return out

        found = []
        for iu in hits(ubp, uspans, u):
            for iv in hits(vbp, vspans, v):
                found.append(self._el_index[(pid, iu, iv)])
        return found

    def _build_vertices(self):
        corners = []
        for el in self.elements:
            pa = self.patches[el.patch_id]
            u0, u1 = el.span_u
            v0, v1 = el.span_v
            for (u, v) in ((u0, v0), (u1, v0), (u1, v1), (u0, v1)):
                corners.append(pa.evaluate(u, v))
        corners = np.asarray(corners)
        vids = _dedup_points(corners, 1e-10 * self.char_length)
        self.n_vertices = int(vids.max()) + 1
        self.vertex_xyz = np.zeros((self.n_vertices, 3))
        degen_vertices = set()
        for k, el in enumerate(self.elements):
            cv = tuple(int(vids[4 * k + c]) for c in range(4))
            el.corner_vids = cv
            for c in range(4):
                self.vertex_xyz[cv[c]] = corners[4 * k + c]
            degen = []
            if cv[0] == cv[1]:
                degen.append("v0")
            if cv[3] == cv[2]:
                degen.append("v1")
            if cv[0] == cv[3]:
                degen.append("u0")
            if cv[1] == cv[2]:
                degen.append("u1")
            el.degenerate_edges = tuple(degen)
            for side, (a, b) in (("v0", (0, 1)), ("v1", (3, 2)), ("u0", (0, 3)), ("u1", (1, 2))):
                if cv[a] == cv[b]:
                    degen_vertices.add(cv[a])
        self.pole_vids = degen_vertices
        self.vertex_elements = [[] for _ in range(self.n_vertices)]
        for el in self.elements:
            for v in set(el.corner_vids):
                self.vertex_elements[v].append(el.index)
        self._neighbors = []
        for el in self.elements:
            nbr = set()
            for v in set(el.corner_vids):
                nbr.update(self.vertex_elements[v])
            nbr.discard(el.index)
            self._neighbors.append(sorted(nbr))

    def neighbors(self, el_index: int) -> list[int]:
        """Elements sharing at least one corner vertex (edge- or vertex-wise)."""
        return self._neighbors[el_index]

    def edge_neighbors(self, el_index: int) -> list[int]:
        mine = set(self.elements[el_index].corner_vids)
        out = []
        for j in self._neighbors[el_index]:
            if len(mine & set(self.elements[j].corner_vids)) >= 2:
                out.append(j)
        return out

    def _build_collocation(self):
        self.greville = []
        for pa in self.patches:
            self.greville.append((greville_abscissae(pa.U), greville_abscissae(pa.V)))
        groups = {}
        for pid, pa in enumerate(self.patches):
            gu, gv = self.greville[pid]
            for i in range(pa.U.n_basis):
                for j in range(pa.V.n_basis):
                    groups.setdefault(self.ctrl_gid[(pid, i, j)], []).append((pid, float(gu[i]), float(gv[j])))
        self.collocation: list[CollocationPoint] = []
        for g in range(self.n_no):
            inst = groups[g]
            pos = [self.patches[pid].evaluate(u, v) for (pid, u, v) in inst]
            pos = np.asarray(pos)
            if np.max(np.linalg.norm(pos - pos[0], axis=1)) > 1e-8 * self.char_length:
                raise GeometryError("collocation instances of one control point disagree")
            self.collocation.append(CollocationPoint(g, pos[0], inst))
        self._assign_colpt_kinds()
        assert len(self.collocation) == self.n_no

    def _assign_colpt_kinds(self):
        vtx_tree = cKDTree(self.vertex_xyz) if self.n_vertices else None
        tol = 1e-9 * self.char_length
        for cp in self.collocation:
            d, v = vtx_tree.query(cp.position)
            if d < tol and int(v) in self.pole_vids:
                cp.is_pole = True
                cp.kind = "pole"
                continue
            owners = self._owning_elements(cp)
            patches = {self.elements[e].patch_id for e in owners}
            on_boundary = any(
                u < 1e-12 or u > 1 - 1e-12 or v_ < 1e-12 or v_ > 1 - 1e-12 for (_, u, v_) in cp.instances
            )
            cross = len(patches) > 1 or (on_boundary and len(cp.instances) > 1)
            n_own = len(owners)
            if n_own >= 3:
                cp.kind = "patch_corner" if cross else "C"
            elif n_own == 2:
                cp.kind = "patch_edge" if cross else "E"
            else:
                el = self.elements[owners[0]]
                xi = el.master_of(*cp.instances[0][1:])
                ax, ay = abs(xi[0]), abs(xi[1])
                if ax > 1 - 1e-9 and ay > 1 - 1e-9:
                    cp.kind = "C"
                elif ax > 1 - 1e-9 or ay > 1 - 1e-9:
                    cp.kind = "E"
                else:
                    cp.kind = "M"

    def _owning_elements(self, cp: CollocationPoint) -> list[int]:
        owners = set()
        for (pid, u, v) in cp.instances:
            owners.update(self.owning_elements(pid, u, v))
        return sorted(owners)

    def _build_topology(self):
        """Match nondegenerate patch sides through shared corner vertices."""
        tree = cKDTree(self.vertex_xyz)
        tol = 1e-9 * self.char_length
        sides = []
        for pid, pa in enumerate(self.patches):
            cpos = {
                (0, 0): pa.evaluate(0.0, 0.0),
                (1, 0): pa.evaluate(1.0, 0.0),
                (1, 1): pa.evaluate(1.0, 1.0),
                (0, 1): pa.evaluate(0.0, 1.0),
            }
            cvid = {}
            for key, x in cpos.items():
                d, v = tree.query(x)
                if d > tol:
                    raise GeometryError("patch corner does not match any element vertex")
                cvid[key] = int(v)
            for side, (a, b) in (("u0", ((0, 0), (0, 1))), ("u1", ((1, 0), (1, 1))),
                                 ("v0", ((0, 0), (1, 0))), ("v1", ((0, 1), (1, 1)))):
                va, vb = cvid[a], cvid[b]
                if va == vb:
                    continue  # collapsed (pole) side
                sides.append((pid, side, va, vb))
        by_pair = {}
        for s in sides:
            by_pair.setdefault(frozenset((s[2], s[3])), []).append(s)
        self.side_matches = {}
        for pair, ss in by_pair.items():
            if len(ss) == 2:
                (p1, s1, a1, _), (p2, s2, a2, _) = ss
                same = a1 == a2
                self.side_matches[(p1, s1)] = (p2, s2, same)
                self.side_matches[(p2, s2)] = (p1, s1, same)

    def unfold(self, instance, target_patch: int):
        """Parametric coordinates of an instance in a neighbor patch's plane.

        Returns a list of (u', v') candidates: the identity when the
        instance lives on the target patch (plus periodic images across a
        self-matched seam), or the single image across the matched side
        shared with the target patch.
        """
        pid, u, v = instance
        out = []
        if pid == target_patch:
            out.append((u, v))
            for side in ("u0", "u1", "v0", "v1"):
                m = self.side_matches.get((pid, side))
                if m and m[0] == pid:  # self-adjacent seam
                    if side in ("u0", "u1"):
                        out.extend([(u + 1.0, v), (u - 1.0, v)])
                    else:
                        out.extend([(u, v + 1.0), (u, v - 1.0)])
            return out
        for side in ("u0", "u1", "v0", "v1"):
            m = self.side_matches.get((pid, side))
            if not m or m[0] != target_patch:
                continue
            _, tside, same = m
            d, t = {
                "u0": (u, v), "u1": (1.0 - u, v), "v0": (v, u), "v1": (1.0 - v, u),
            }[side]
            tt = t if same else 1.0 - t
            out.append({
                "u0": (-d, tt), "u1": (1.0 + d, tt), "v0": (tt, -d), "v1": (tt, 1.0 + d),
            }[tside])
        return out

    # -- frames --------------------------------------------------------
    def frames(self, el: Element, xi, shapes: bool = True, dtype=None) -> FrameBatch:
        """Vectorized frames (and shape functions) at master points of el.

        ``dtype=np.longdouble`` evaluates in extended precision, which keeps
        x - y accurate when quadrature points approach a collocation point
        (the r.n cancellation discussed with the stress kernel).
        """
        pa = self.patches[el.patch_id]
        u, v = el.param_of(xi)
        if dtype is not None:
            u = u.astype(dtype)
            v = v.astype(dtype)
        _, bu_vals, bu_ders = eval_basis_span(pa.U, el.iu, u)
        _, bv_vals, bv_ders = eval_basis_span(pa.V, el.iv, v)
        p1, q1 = pa.p + 1, pa.q + 1
        iu0, iv0 = el.iu - pa.p, el.iv - pa.q
        wloc = pa.weights[iu0: iu0 + p1, iv0: iv0 + q1]
        cloc = pa.cps[iu0: iu0 + p1, iv0: iv0 + q1]
        if dtype is not None:
            wloc = wloc.astype(dtype)
            cloc = cloc.astype(dtype)
        hp = cloc * wloc[..., None]
        W = np.einsum("ni,nj,ij->n", bu_vals, bv_vals, wloc)
        A = np.einsum("ni,nj,ijk->nk", bu_vals, bv_vals, hp)
        Wu = np.einsum("ni,nj,ij->n", bu_ders[0], bv_vals, wloc)
        Wv = np.einsum("ni,nj,ij->n", bu_vals, bv_ders[0], wloc)
        Au = np.einsum("ni,nj,ijk->nk", bu_ders[0], bv_vals, hp)
        Av = np.einsum("ni,nj,ijk->nk", bu_vals, bv_ders[0], hp)
        S = A / W[:, None]
        Su = (Au - Wu[:, None] * S) / W[:, None]
        Sv = (Av - Wv[:, None] * S) / W[:, None]
        du = 0.5 * (el.span_u[1] - el.span_u[0])
        dv = 0.5 * (el.span_v[1] - el.span_v[0])
        cr = np.cross(Su, Sv)
        nrm = np.linalg.norm(cr, axis=1)
        J = nrm * du * dv
        with np.errstate(invalid="ignore", divide="ignore"):
            normal = np.where(nrm[:, None] > 0, cr / np.maximum(nrm, 1e-300)[:, None], 0.0)
        sh = None
        if shapes:
            # rational shape functions, u-major to match Element.ctrl_gids
            sh = (bu_vals[:, :, None] * bv_vals[:, None, :] * wloc[None, :, :]) / W[:, None, None]
            sh = sh.transpose(0, 2, 1).reshape(len(u), p1 * q1)
        return FrameBatch(S, normal, J, sh)

    def frame(self, el: Element, xi) -> SurfaceFrame:
        """Single-point frame; degenerate points get a limit normal."""
        pa = self.patches[el.patch_id]
        xi = np.asarray(xi, dtype=float)
        u, v = el.param_of(xi[None, :])
        S, Su, Sv = pa.evaluate(float(u[0]), float(v[0]), ders=True)
        du = 0.5 * (el.span_u[1] - el.span_u[0])
        dv = 0.5 * (el.span_v[1] - el.span_v[0])
        cr = np.cross(Su, Sv)
        nrm = np.linalg.norm(cr)
        scale = self.char_length
        if nrm < 1e-14 * scale * scale:
            xi_in = np.clip(xi, -1.0, 1.0) * (1.0 - 1e-8)
            u2, v2 = el.param_of(xi_in[None, :])
            _, Su2, Sv2 = pa.evaluate(float(u2[0]), float(v2[0]), ders=True)
            cr2 = np.cross(Su2, Sv2)
            n2 = cr2 / np.linalg.norm(cr2)
            return SurfaceFrame(S, Su, Sv, n2, nrm * du * dv, degenerate=True)
        return SurfaceFrame(S, Su, Sv, cr / nrm, nrm * du * dv)

    def element_diameter(self, el: Element) -> float:
        c = self.vertex_xyz[list(el.corner_vids)]
        return float(max(np.linalg.norm(c[i] - c[j]) for i in range(4) for j in range(i + 1, 4)))

    def area(self, n_gl: int = 4) -> float:
        from .quadrature import classical_gl_2d

        rule = classical_gl_2d(n_gl)
        total = 0.0
        for el in self.elements:
            fb = self.frames(el, rule.points, shapes=False)
            total += float(fb.J @ rule.weights)
        return total

    def volume(self, n_gl: int = 4) -> float:
        """Enclosed volume via the divergence theorem (positive if outward)."""
        from .quadrature import classical_gl_2d

        rule = classical_gl_2d(n_gl)
        total = 0.0
        for el in self.elements:
            fb = self.frames(el, rule.points, shapes=False)
            total += float(np.einsum("n,n,n->", np.einsum("nk,nk->n", fb.x, fb.normal), fb.J, rule.weights))
        return total / 3.0

    def dump_json(self) -> str:
        doc = {
            "name": self.name,
            "closed": self.closed,
            "planar": self.planar,
            "n_el": self.n_el,
            "n_no": self.n_no,
            "patches": [
                {
                    "p": pa.p,
                    "q": pa.q,
                    "U": pa.U.knots.tolist(),
                    "V": pa.V.knots.tolist(),
                    "cps": [
                        [*pa.cps[i, j].tolist(), float(pa.weights[i, j])]
                        for i in range(pa.U.n_basis)
                        for j in range(pa.V.n_basis)
                    ],
                }
                for pa in self.patches
            ],
            "elements": [
                {
                    "patch": el.patch_id,
                    "span_u": list(el.span_u),
                    "span_v": list(el.span_v),
                    "controls": el.ctrl_gids.tolist(),
                    "corners": list(el.corner_vids),
                }
                for el in self.elements
            ],
            "collocation": [
                {
                    "id": cp.index,
                    "x": cp.position.tolist(),
                    "type": cp.kind,
                    "instances": [[pid, u, v] for (pid, u, v) in cp.instances],
                }
                for cp in self.collocation
            ],
        }
        return json.dumps(doc, indent=1)


def eval_basis_span(kv: KnotVector, span: int, u: np.ndarray):
    """Vectorized basis evaluation for parameters within one known span."""
    from .splines import _basis_and_ders

    uu = np.asarray(u, dtype=float)
    vals, ders = _basis_and_ders(kv.knots, kv.degree, span, uu, 1)
    return span, vals, ders


def _dedup_points(pts: np.ndarray, tol: float) -> np.ndarray:
    """Union-find grouping of points within tol of each other."""
    n = len(pts)
    parent = np.arange(n)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    tree = cKDTree(pts)
    for i, j in tree.query_pairs(tol):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    gid = {}
    out = np.empty(n, dtype=int)
    for i in range(n):
        r = find(i)
        if r not in gid:
            gid[r] = len(gid)
        out[i] = gid[r]
    return out


# -- classification ----------------------------------------------------

@dataclass
class Classification:
    singular: list[int]
    near: list[int]
    xi0: dict                       # element -> master-coordinate location
    colpt_is_pole: bool = False
    in_degenerate_element: bool = False
    pole_adjacent_near: frozenset = frozenset()

    def regular(self, mesh: SurfaceMesh) -> list[int]:
        excl = set(self.singular) | set(self.near)
        return [e for e in range(mesh.n_el) if e not in excl]


def classify(mesh: SurfaceMesh, colpt: CollocationPoint) -> Classification:
    """Partition elements into singular/near-singular/regular for a colpt.

    Singular elements contain the point in their closed parametric domain;
    near-singular ones share an edge or a vertex with a singular element
    (patch boundaries and poles included).  A collocation point at a pole
    owns all adjacent elements as singular and has no near ring.
    """
    singular = {}
    if colpt.is_pole:
        pole_v = None
        tol = 1e-9 * mesh.char_length
        for v in mesh.pole_vids:
            if np.linalg.norm(mesh.vertex_xyz[v] - colpt.position) < tol:
                pole_v = v
                break
        for e in mesh.vertex_elements[pole_v]:
            el = mesh.elements[e]
            edge = next(s for s in el.degenerate_edges
                        if _collapsed_vertex(el, s) == pole_v)
            singular[e] = ("pole", edge)
        return Classification(sorted(singular), [], {e: singular[e] for e in singular}, colpt_is_pole=True)

    for (pid, u, v) in colpt.instances:
        for e in mesh.owning_elements(pid, u, v):
            el = mesh.elements[e]
            xi = el.master_of(u, v)
            prev = singular.get(el.index)
            if prev is None or _interiority(xi) > _interiority(prev):
                singular[el.index] = xi
    near = set()
    for e in singular:
        near.update(mesh.neighbors(e))
    near -= set(singular)
    in_degen = any(mesh.elements[e].degenerate_edges for e in singular)
    pole_adj = frozenset(
        e for e in near if set(mesh.elements[e].corner_vids) & mesh.pole_vids
    ) if in_degen else frozenset()
    return Classification(
        sorted(singular), sorted(near), singular,
        in_degenerate_element=in_degen, pole_adjacent_near=pole_adj,
    )


def _interiority(xi):
    return min(1.0 - abs(float(xi[0])), 1.0 - abs(float(xi[1])))


def _collapsed_vertex(el: Element, side: str) -> int:
    return {"v0": el.corner_vids[0], "v1": el.corner_vids[3],
            "u0": el.corner_vids[0], "u1": el.corner_vids[1]}[side]


# -- builders ----------------------------------------------------------

def build_sheet(n_x: int, n_y: int, side: float = 1.0) -> SurfaceMesh:
    """Flat biquadratic B-spline sheet with n_x x n_y elements on [0,L]^2."""
    if n_x < 1 or n_y < 1:
        raise GeometryError("need at least one element per direction")
    U = uniform_open_knots(n_x, 2)
    V = uniform_open_knots(n_y, 2)
    gx = greville_abscissae(U) * side
    gy = greville_abscissae(V) * side
    cps = np.zeros((U.n_basis, V.n_basis, 3))
    cps[:, :, 0] = gx[:, None]
    cps[:, :, 1] = gy[None, :]
    w = np.ones((U.n_basis, V.n_basis))
    return SurfaceMesh([NurbsPatch(U, V, cps, w)], closed=False, planar=True,
                       name=f"sheet{n_x}x{n_y}")


_CIRCLE_XY = np.array([
    [1, 0], [1, 1], [0, 1], [-1, 1], [-1, 0], [-1, -1], [0, -1], [1, -1], [1, 0],
], dtype=float)
_SQ2 = 1.0 / math.sqrt(2.0)
_CIRCLE_W = np.array([1, _SQ2, 1, _SQ2, 1, _SQ2, 1, _SQ2, 1])
_CIRCLE_KNOTS = np.array([0, 0, 0, 0.25, 0.25, 0.5, 0.5, 0.75, 0.75, 1, 1, 1])


def build_single_patch_sphere(level: int, radius: float = 1.0) -> SurfaceMesh:
    """Exact NURBS sphere of revolution, refined by knot insertion.

    A nine-point rational quadratic full circle is revolved along a
    rational semicircle generatrix (south pole to north pole), giving the
    standard degenerate-pole sphere; level ``l`` bisects every knot span
    ``l`` times, for 2^(l+2) x 2^(l+1) elements.
    """
    if level < 1:
        raise GeometryError("level must be >= 1")
    U = KnotVector(_CIRCLE_KNOTS, 2)
    # generatrix in the (r, z) half-plane: south pole -> north pole
    gen_rz = np.array([[0, -1], [1, -1], [1, 0], [1, 1], [0, 1]], dtype=float)
    gen_w = np.array([1, _SQ2, 1, _SQ2, 1])
    V = KnotVector(np.array([0, 0, 0, 0.5, 0.5, 1, 1, 1]), 2)
    nu, nv = U.n_basis, V.n_basis
    cps = np.zeros((nu, nv, 3))
    wts = np.zeros((nu, nv))
    for i in range(nu):
        for j in range(nv):
            r, z = gen_rz[j]
            cps[i, j] = [radius * r * _CIRCLE_XY[i, 0], radius * r * _CIRCLE_XY[i, 1], radius * z]
            wts[i, j] = _CIRCLE_W[i] * gen_w[j]
    for _ in range(level):
        U, V, cps, wts = _bisect_all_spans(U, V, cps, wts)
    mesh = SurfaceMesh([NurbsPatch(U, V, cps, wts)], closed=True, planar=False,
                       name=f"single-patch-sphere-l{level}")
    mesh.radius = radius
    return mesh


def _bisect_all_spans(U, V, cps, wts):
    """Insert the midpoint of every nonempty span in both directions."""
    hom = np.concatenate([cps * wts[..., None], wts[..., None]], axis=-1)
    new_u = span_midpoints(U)
    nu, nv = hom.shape[0], hom.shape[1]
    flat = hom.reshape(nu, nv * 4)
    U2, flat = refine_knots(U, flat, new_u)
    hom = flat.reshape(U2.n_basis, nv, 4)
    new_v = span_midpoints(V)
    flat = hom.transpose(1, 0, 2).reshape(nv, U2.n_basis * 4)
    V2, flat = refine_knots(V, flat, new_v)
    hom = flat.reshape(V2.n_basis, U2.n_basis, 4).transpose(1, 0, 2)
    wts2 = hom[..., 3]
    cps2 = hom[..., :3] / wts2[..., None]
    return U2, V2, cps2, wts2


# cube-face frames: (outward axis, u axis, v axis) with t1 x t2 = outward
_CUBE_FACES = [
    (np.array([0, 0, 1.0]), np.array([1.0, 0, 0]), np.array([0, 1.0, 0])),   # +z
    (np.array([0, 0, -1.0]), np.array([0, 1.0, 0]), np.array([1.0, 0, 0])),  # -z
    (np.array([1.0, 0, 0]), np.array([0, 1.0, 0]), np.array([0, 0, 1.0])),   # +x
    (np.array([-1.0, 0, 0]), np.array([0, 0, 1.0]), np.array([0, 1.0, 0])),  # -x
    (np.array([0, 1.0, 0]), np.array([0, 0, 1.0]), np.array([1.0, 0, 0])),   # +y
    (np.array([0, -1.0, 0]), np.array([1.0, 0, 0]), np.array([0, 0, 1.0])),  # -y
]


def build_six_patch_sphere(level: int, radius: float = 1.0) -> SurfaceMesh:
    """Approximate sphere from six biquadratic B-spline patches.

    Each cube face is interpolated at the tensor Greville abscissae of a
    uniform open biquadratic basis with 2^level spans per direction, the
    data being cube-face points projected radially onto the sphere.  Shared
    edges interpolate identical data, so boundary control points coincide
    across patches and are deduplicated.

    Interpolation alone leaves O(h^2) tangent-plane kinks across patch
    boundaries, which would spoil the double-layer identity at the edge
    collocation points (the solid angle there would differ from 2 pi).
    Two O(h^3) control-net corrections therefore follow the fit: edge-row
    end tangents are projected into the exact sphere tangent plane at the
    cube corners, and the interior controls of each second row are shifted
    so the cross-boundary derivative at every interior edge collocation
    point lies in the plane of the shared great circle.  Both patches at an
    edge then span the same tangent plane at each collocation point.
    """
    if level < 1:
        raise GeometryError("level must be >= 1")
    n = 2 ** level
    kv = uniform_open_knots(n, 2)
    g = greville_abscissae(kv)
    C = _collocation_matrix(kv, g)
    Ci = np.linalg.inv(C)
    nets = []
    for (axis, t1, t2) in _CUBE_FACES:
        a = 2.0 * g - 1.0
        A, B = np.meshgrid(a, a, indexing="ij")
        P = axis[None, None, :] + A[..., None] * t1 + B[..., None] * t2
        P = radius * P / np.linalg.norm(P, axis=-1, keepdims=True)
        nets.append(np.einsum("ai,bj,ijk->abk", Ci, Ci, P))
    for ctrl in nets:
        _fix_corner_tangents(ctrl)
    for ctrl in nets:
        _fix_edge_tangent_planes(ctrl, kv, g, C)
    patches = [NurbsPatch(kv, kv, ctrl, np.ones((kv.n_basis, kv.n_basis))) for ctrl in nets]
    mesh = SurfaceMesh(patches, closed=True, planar=False, name=f"six-patch-sphere-l{level}")
    mesh.radius = radius
    return mesh


def _fix_corner_tangents(ctrl: np.ndarray) -> None:
    """Project the edge-row tangents at patch corners into the exact
    sphere tangent planes (all three edge tangents at a cube corner then
    share one plane).  Edge rows are shared data, so every patch applies
    the identical projection."""
    n1 = ctrl.shape[0]
    for (ci, cj) in ((0, 0), (n1 - 1, 0), (0, n1 - 1), (n1 - 1, n1 - 1)):
        c = ctrl[ci, cj]
        m = c / np.linalg.norm(c)
        for (ni, nj) in (((1 if ci == 0 else n1 - 2), cj), (ci, (1 if cj == 0 else n1 - 2))):
            d = ctrl[ni, nj] - c
            ctrl[ni, nj] = c + d - (d @ m) * m


def _fix_edge_tangent_planes(ctrl, kv, g, C) -> None:
    """Zero the transverse in-plane component of the cross-edge derivative
    at the interior edge collocation points of all four patch sides.

    The movable controls form the second ring of the net; the four
    corner-adjacent ring controls serve two sides at once and get one
    direction degree of freedom per side, making the system square.
    """
    n1 = ctrl.shape[0]
    interior = slice(1, n1 - 1)
    sites = g[interior]
    n = len(sites)
    Bv = _collocation_matrix(kv, sites)
    Bd = _derivative_matrix(kv, sites)
    # side views: (inner-row index function, edge row, inner row)
    sides = (
        (lambda i: (i, 1), ctrl[:, 0, :], ctrl[:, 1, :]),
        (lambda i: (i, n1 - 2), ctrl[:, n1 - 1, :], ctrl[:, n1 - 2, :]),
        (lambda i: (1, i), ctrl[0, :, :], ctrl[1, :, :]),
        (lambda i: (n1 - 2, i), ctrl[n1 - 1, :, :], ctrl[n1 - 2, :, :]),
    )
    side_data = []
    dofs = []      # (control position, unit direction)
    rhs = []
    for pos_of, edge, inner in sides:
        n_pi = np.cross(edge[0], edge[-1])
        n_pi /= np.linalg.norm(n_pi)
        T = Bd @ edge
        W = np.cross(n_pi[None, :], T)
        W /= np.linalg.norm(W, axis=1, keepdims=True)
        D = Bv @ (inner - edge)
        for i in range(1, n1 - 1):
            dofs.append((pos_of(i), W[i - 1]))
        rhs.extend(-float(D[k] @ W[k]) for k in range(n))
        side_data.append((pos_of, W))
    pos_dirs = {}
    for dof, (pos, d) in enumerate(dofs):
        pos_dirs.setdefault(pos, []).append(dof)
    A = np.zeros((len(dofs), len(dofs)))
    r = 0
    for pos_of, W in side_data:
        inner_positions = [pos_of(i) for i in range(n1)]
        for k in range(n):
            for col, pos in enumerate(inner_positions):
                for dof in pos_dirs.get(pos, ()):
                    A[r, dof] += Bv[k, col] * float(dofs[dof][1] @ W[k])
            r += 1
    alpha = np.linalg.solve(A, np.asarray(rhs))
    for dof, (pos, d) in enumerate(dofs):
        ctrl[pos[0], pos[1]] += alpha[dof] * d


def _derivative_matrix(kv: KnotVector, sites) -> np.ndarray:
    n = kv.n_basis
    M = np.zeros((len(sites), n))
    for r, u in enumerate(sites):
        bv = eval_basis(kv, float(u))
        M[r, bv.first_func: bv.first_func + kv.degree + 1] = bv.derivatives[0]
    return M


def _collocation_matrix(kv: KnotVector, sites) -> np.ndarray:
    n = kv.n_basis
    M = np.zeros((len(sites), n))
    for r, u in enumerate(sites):
        bv = eval_basis(kv, float(u))
        M[r, bv.first_func: bv.first_func + kv.degree + 1] = bv.values
    return M


def build_ellipsoid(level: int, a: float, e: float) -> SurfaceMesh:
    """Six-patch sphere scaled to the spheroid x^2+y^2 over a^2(1-e^2), z^2 over a^2."""
    if not (0.0 <= e < 1.0):
        raise GeometryError("eccentricity must satisfy 0 <= e < 1")
    if a <= 0:
        raise GeometryError("semi-major axis must be positive")
    mesh = build_six_patch_sphere(level, radius=1.0)
    b = a * math.sqrt(1.0 - e * e)
    scale = np.array([b, b, a])
    patches = [
        NurbsPatch(pa.U, pa.V, pa.cps * scale, pa.weights.copy()) for pa in mesh.patches
    ]
    out = SurfaceMesh(patches, closed=True, planar=False, name=f"ellipsoid-l{level}-e{e}")
    out.semi_major = a
    out.eccentricity = e
    return out


def radius_error_l2(mesh: SurfaceMesh, radius: float, n_gl: int = 4) -> float:
    """L2 norm of (|x|-R)/R over the surface, normalized by the area."""
    from .quadrature import classical_gl_2d

    rule = classical_gl_2d(n_gl)
    num = 0.0
    den = 0.0
    for el in mesh.elements:
        fb = mesh.frames(el, rule.points, shapes=False)
        e = (np.linalg.norm(fb.x, axis=1) - radius) / radius
        num += float((e * e * fb.J) @ rule.weights)
        den += float(fb.J @ rule.weights)
    return math.sqrt(num / den)
