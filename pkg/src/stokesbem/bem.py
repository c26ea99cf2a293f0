"""Collocated boundary-element system for exterior steady Stokes flow.

Assembly fills the dense square matrices N, G, T (3 n_no each way) with

    G rows:  -1/(4 pi eta) int_el G_ij(x - y_A) N_B(x) da
    T rows:  +1/(4 pi)     int_el T_ijk(x - y_A) n_k(x) N_B(x) da
    N rows:  shape functions evaluated at y_A

using the per-collocation-point hybrid quadrature rules.  Dirichlet
problems solve G t = (N - T) v for the surface traction; interior
velocity/pressure follow from the domain boundary-integral
representations.
"""
from __future__ import annotations

import struct
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from ._core import backend
from .geometry import SurfaceMesh
from .quadrature import SchemeConfig, classical_gl_2d, hybrid_rules


class SolverError(RuntimeError):
    pass


class NearFieldError(ValueError):
    """Field point too close to the surface for plain Gauss quadrature."""


@dataclass
class BemSystem:
    N: np.ndarray
    G: np.ndarray
    T: np.ndarray
    eta: float
    mesh: SurfaceMesh
    cfg: SchemeConfig
    fallbacks: list

    @property
    def n_dof(self) -> int:
        return self.N.shape[0]


def assemble(mesh: SurfaceMesh, cfg: SchemeConfig, eta: float = 1.0, threads: int = 1) -> BemSystem:
    """Assemble the collocated BE matrices with hybrid quadrature.

    The outer loop runs over elements (the cheap loop order): the bulk of
    collocation points sees each element through the shared regular rule
    and is handled in one vectorized batch; singular/near pairs get their
    per-pair rules individually.
    """
    n = mesh.n_no
    ndof = 3 * n
    G4 = np.zeros((n, 3, n, 3))
    T4 = np.zeros((n, 3, n, 3))
    with_t = not mesh.planar  # flat-surface shortcut: T.n vanishes identically

    rules = [hybrid_rules(mesh, cp, cfg) for cp in mesh.collocation]
    fallbacks = [(cp.index, fb) for cp, r in zip(mesh.collocation, rules) for fb in r.fallbacks]
    special_by_el = [[] for _ in range(mesh.n_el)]
    for a, r in enumerate(rules):
        for e, rule in r.special.items():
            special_by_el[e].append((a, rule))
    default = rules[0].default
    Y = np.array([cp.position for cp in mesh.collocation])

    def element_blocks(el):
        """Returns a list of (colpt ids, g-block, t-block) for one element."""
        out = []
        specials = special_by_el[el.index]
        special_ids = np.array([a for a, _ in specials], dtype=int)
        bulk = np.setdiff1d(np.arange(n), special_ids)
        frame_cache = {}

        def frames_for(rule):
            fb = frame_cache.get(rule.tag)
            if fb is None:
                fb = mesh.frames(el, rule.points)
                frame_cache[rule.tag] = fb
            return fb

        if len(bulk):
            fb = frames_for(default)
            sjw = fb.shapes * (fb.J * default.weights)[:, None]
            g = np.zeros((len(bulk), 3, fb.shapes.shape[1], 3))
            t = np.zeros_like(g)
            backend.stokes_rows(Y[bulk], fb.x, fb.normal, sjw, g, t, with_t)
            out.append((bulk, g, t))
        for a, rule in specials:
            fb = frames_for(rule)
            sjw = fb.shapes * (fb.J * rule.weights)[:, None]
            g = np.zeros((1, 3, fb.shapes.shape[1], 3))
            t = np.zeros_like(g)
            backend.stokes_rows(Y[a: a + 1], fb.x, fb.normal, sjw, g, t, with_t)
            out.append((np.array([a]), g, t))
        return out

    def scatter(el, blocks):
        cols = el.ctrl_gids
        for ids, g, t in blocks:
            if not np.all(np.isfinite(g)) or not np.all(np.isfinite(t)):
                bad = ids[np.argwhere(~np.isfinite(g).all(axis=(1, 2, 3)))]
                raise SolverError(f"non-finite assembly block at colpt {bad}, element {el.index}")
            ix = np.ix_(ids, [0, 1, 2], cols, [0, 1, 2])
            G4[ix] += g
            T4[ix] += t

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for el, blocks in zip(mesh.elements, pool.map(element_blocks, mesh.elements, chunksize=4)):
                scatter(el, blocks)
    else:
        for el in mesh.elements:
            scatter(el, element_blocks(el))

    G = G4.reshape(ndof, ndof) * (-1.0 / (4.0 * np.pi * eta))
    T = T4.reshape(ndof, ndof) * (+1.0 / (4.0 * np.pi))

    N = np.zeros((ndof, ndof))
    for cp in mesh.collocation:
        pid, u, v = cp.instances[0]
        e = mesh.owning_elements(pid, u, v)[0]
        el = mesh.elements[e]
        fb = mesh.frames(el, el.master_of(u, v)[None, :])
        for loc, gid in enumerate(el.ctrl_gids):
            val = fb.shapes[0, loc]
            for i in range(3):
                N[3 * cp.index + i, 3 * gid + i] += val
    return BemSystem(N, G, T, eta, mesh, cfg, fallbacks)


def solve_dirichlet(sys: BemSystem, vbar: np.ndarray, solver: str = "lu") -> np.ndarray:
    """Solve G t = (N - T) vbar for the nodal traction vector."""
    vbar = np.asarray(vbar, dtype=float).ravel()
    if vbar.shape != (sys.n_dof,):
        raise SolverError("boundary velocity vector has the wrong length")
    rhs = (sys.N - sys.T) @ vbar
    if solver == "lu":
        lu, piv = scipy.linalg.lu_factor(sys.G)
        dmin = np.abs(np.diag(lu)).min()
        if dmin < 1e-14 * np.linalg.norm(sys.G, 1):
            raise SolverError(
                "G factorization is numerically singular (degenerate poles?); "
                "try solver='gmres'"
            )
        return scipy.linalg.lu_solve((lu, piv), rhs)
    if solver == "gmres":
        M = _block_diag_preconditioner(sys.G)
        t, info = scipy.sparse.linalg.gmres(sys.G, rhs, rtol=1e-10, atol=0.0, restart=50, M=M)
        if info != 0:
            raise SolverError(f"GMRES did not converge (info={info})")
        return t
    raise SolverError(f"unknown solver '{solver}'")


def _block_diag_preconditioner(G):
    n = G.shape[0] // 3
    inv = np.zeros((n, 3, 3))
    for a in range(n):
        inv[a] = np.linalg.inv(G[3 * a: 3 * a + 3, 3 * a: 3 * a + 3])

    def apply(x):
        return np.einsum("aij,aj->ai", inv, x.reshape(n, 3)).ravel()

    return scipy.sparse.linalg.LinearOperator(G.shape, matvec=apply)


def eval_velocity(mesh: SurfaceMesh, v: np.ndarray, t: np.ndarray, eta: float, y, n0: int = 3) -> np.ndarray:
    """Exterior velocity at y from the domain boundary-integral representation."""
    y = np.asarray(y, dtype=float)
    _check_far(mesh, y)
    rule = classical_gl_2d(2 * n0)
    v = v.reshape(-1, 3)
    t = t.reshape(-1, 3)
    out = np.zeros(3)
    for el in mesh.elements:
        fb = mesh.frames(el, rule.points)
        r = fb.x - y
        rn = np.linalg.norm(r, axis=1)
        rb = r / rn[:, None]
        jw = fb.J * rule.weights
        tq = fb.shapes @ t[el.ctrl_gids]
        vq = fb.shapes @ v[el.ctrl_gids]
        Gt = (tq + rb * np.einsum("qk,qk->q", rb, tq)[:, None]) / rn[:, None]
        out += -1.0 / (8 * np.pi * eta) * (jw @ Gt)
        s = -6.0 * np.einsum("qk,qk->q", rb, fb.normal) / rn**2
        vTn = s * np.einsum("qk,qk->q", rb, vq)
        out += 1.0 / (8 * np.pi) * ((jw * vTn) @ rb)
    return out


def eval_pressure(mesh: SurfaceMesh, v: np.ndarray, t: np.ndarray, eta: float, y, n0: int = 3) -> float:
    """Exterior pressure at y (use p = -t.n on the surface itself)."""
    y = np.asarray(y, dtype=float)
    _check_far(mesh, y)
    rule = classical_gl_2d(2 * n0)
    v = v.reshape(-1, 3)
    t = t.reshape(-1, 3)
    out = 0.0
    for el in mesh.elements:
        fb = mesh.frames(el, rule.points)
        r = fb.x - y
        rn = np.linalg.norm(r, axis=1)
        rb = r / rn[:, None]
        jw = fb.J * rule.weights
        tq = fb.shapes @ t[el.ctrl_gids]
        vq = fb.shapes @ v[el.ctrl_gids]
        Pt = 2.0 * np.einsum("qk,qk->q", rb, tq) / rn**2
        out += -1.0 / (8 * np.pi) * (jw @ Pt)
        Piv = (4.0 / rn**3) * (3.0 * np.einsum("qk,qk->q", rb, vq) * np.einsum("qk,qk->q", rb, fb.normal)
                               - np.einsum("qk,qk->q", vq, fb.normal))
        out += eta / (8 * np.pi) * (jw @ Piv)
    return float(out)


def _check_far(mesh, y):
    d = min(np.linalg.norm(cp.position - y) for cp in mesh.collocation)
    h = max(mesh.element_diameter(el) for el in mesh.elements)
    if d <= h:
        raise NearFieldError(
            f"field point within one element diameter of the surface (d={d:.3g}, h={h:.3g})"
        )


def error_norms(mesh: SurfaceMesh, t_num: np.ndarray, t_exact, mode: str = "absolute",
                t_max: float | None = None, n_gl: int = 4):
    """Pointwise and L2 traction errors against an exact field.

    mode='absolute' scales |t_h - t| by t_max (rotating-sphere style);
    mode='relative' scales by |t(x)| pointwise.  The L2 norm integrates
    e^2 over the surface with classical GL(n_gl) and divides by the area.
    """
    rule = classical_gl_2d(n_gl)
    t_num = t_num.reshape(-1, 3)
    num = 0.0
    area = 0.0
    emax = 0.0
    for el in mesh.elements:
        fb = mesh.frames(el, rule.points)
        th = fb.shapes @ t_num[el.ctrl_gids]
        tx = np.asarray([t_exact(x) for x in fb.x])
        diff = np.linalg.norm(th - tx, axis=1)
        if mode == "absolute":
            if t_max is None:
                raise ValueError("absolute mode needs t_max")
            e = diff / t_max
        elif mode == "relative":
            e = diff / np.linalg.norm(tx, axis=1)
        else:
            raise ValueError(f"unknown error mode '{mode}'")
        jw = fb.J * rule.weights
        num += float((e * e) @ jw)
        area += float(jw.sum())
        emax = max(emax, float(e.max()))
    return emax, float(np.sqrt(num / area))


def traction_at_collocation(mesh: SurfaceMesh, t: np.ndarray) -> np.ndarray:
    """Interpolated traction field evaluated at the collocation points."""
    t = t.reshape(-1, 3)
    out = np.zeros((mesh.n_no, 3))
    for cp in mesh.collocation:
        pid, u, v = cp.instances[0]
        el = mesh.elements[mesh.owning_elements(pid, u, v)[0]]
        fb = mesh.frames(el, el.master_of(u, v)[None, :])
        out[cp.index] = fb.shapes[0] @ t[el.ctrl_gids]
    return out


def collocation_normals(mesh: SurfaceMesh) -> np.ndarray:
    out = np.zeros((mesh.n_no, 3))
    for cp in mesh.collocation:
        pid, u, v = cp.instances[0]
        el = mesh.elements[mesh.owning_elements(pid, u, v)[0]]
        fr = mesh.frame(el, el.master_of(u, v))
        out[cp.index] = fr.normal
    return out


def export_matrix(path: str, M: np.ndarray) -> None:
    """Raw row-major dump with an 8-byte little-endian u64 n_dof header."""
    M = np.ascontiguousarray(M, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", M.shape[0]))
        fh.write(M.tobytes())


def import_matrix(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        (n,) = struct.unpack("<Q", fh.read(8))
        return np.frombuffer(fh.read(), dtype="<f8").reshape(n, n).copy()
