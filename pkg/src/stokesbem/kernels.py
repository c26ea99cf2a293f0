"""Free-space Stokes Green's functions and the integral-identity residuals.

G_ij = (delta_ij + rb_i rb_j)/r          (velocity, weakly singular)
T_ijk = -6 rb_i rb_j rb_k / r^2          (stress, strongly singular)
P_i = 2 rb_i / r^2                       (pressure of the Stokeslet)
Pi_ij = (4/r^3)(3 rb_i rb_j - delta_ij)  (pressure of the stresslet)

with rb = r_vec/r.  The closed-surface identities

    int_S G . n da = 0,    -(1/4pi) pv-int_S T . n da = I

serve as quadrature-error oracles: ``identity_residuals`` evaluates both
with the per-element rules of a hybrid scheme.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SingularKernelError(ZeroDivisionError):
    """Kernel evaluated at r = 0 (collocation/quadrature coincidence)."""


@dataclass
class KernelEval:
    G: np.ndarray | None = None    # (3,3)
    T: np.ndarray | None = None    # (3,3,3)
    P: np.ndarray | None = None    # (3,)
    Pi: np.ndarray | None = None   # (3,3)


def eval_kernels(r_vec, which=("G", "T", "P", "Pi")) -> KernelEval:
    r_vec = np.asarray(r_vec, dtype=float)
    r = float(np.linalg.norm(r_vec))
    if r == 0.0:
        raise SingularKernelError("kernel evaluated at zero separation")
    rb = r_vec / r
    out = KernelEval()
    eye = np.eye(3)
    if "G" in which:
        out.G = (eye + np.outer(rb, rb)) / r
    if "T" in which:
        out.T = -6.0 * np.einsum("i,j,k->ijk", rb, rb, rb) / (r * r)
    if "P" in which:
        out.P = 2.0 * rb / (r * r)
    if "Pi" in which:
        out.Pi = (4.0 / r**3) * (3.0 * np.outer(rb, rb) - eye)
    return out


def tn_contraction(r_vec, n) -> np.ndarray:
    """(T . n)_ij = -6 (rb.n) rb_i rb_j / r^2."""
    r_vec = np.asarray(r_vec, dtype=float)
    r = float(np.linalg.norm(r_vec))
    if r == 0.0:
        raise SingularKernelError("kernel evaluated at zero separation")
    rb = r_vec / r
    return -6.0 * float(rb @ np.asarray(n)) * np.outer(rb, rb) / (r * r)


def identity_residuals(mesh, colpt, rules) -> tuple[float, float]:
    """Quadrature errors of the two free-space identities at one colpt.

    e_SL = || int_S G.n da ||_2 and e_DL = || (1/4pi) int_S T.n da + I ||_F,
    assembled element by element with the rules of ``rules`` (an
    ElementRules mapping from ``hybrid_rules``).

    The Duffy rules place points arbitrarily close to the collocation
    point, where forming x - y in double precision wrecks the tiny r.n
    factor of the stress kernel; those elements are therefore evaluated
    in extended precision, with y re-evaluated from its own parametric
    preimage so that both points sit on the same high-precision surface.
    """
    from ._core import backend

    y = np.asarray(colpt.position, dtype=float).reshape(1, 3)
    sl = np.zeros((1, 3))
    dl = np.zeros((1, 3, 3))
    sl_hi = np.zeros(3, dtype=np.longdouble)
    dl_hi = np.zeros((3, 3), dtype=np.longdouble)
    for el in mesh.elements:
        rule = rules.rule_for(el.index)
        if rule.tag.startswith("duffy"):
            fb = mesh.frames(el, rule.points, shapes=False, dtype=np.longdouble)
            y_hi = _colpt_on_element(mesh, colpt, el)
            r = fb.x - y_hi
            rn = np.sqrt((r * r).sum(axis=1))
            rb = r / rn[:, None]
            jw = fb.J * rule.weights.astype(np.longdouble)
            bn = (rb * fb.normal).sum(axis=1)
            sl_hi += ((fb.normal + rb * bn[:, None]) / rn[:, None] * jw[:, None]).sum(axis=0)
            s = -6.0 * bn / rn**2 * jw
            dl_hi += np.einsum("q,qi,qj->ij", s, rb, rb)
        else:
            fb = mesh.frames(el, rule.points, shapes=False)
            jw = fb.J * rule.weights
            backend.identity_sums(y, fb.x, fb.normal, jw, sl, dl)
    sl_tot = sl[0] + sl_hi.astype(float)
    dl_tot = dl[0] + dl_hi.astype(float)
    if not np.all(np.isfinite(sl_tot)) or not np.all(np.isfinite(dl_tot)):
        raise SingularKernelError("non-finite identity integrand")
    e_sl = float(np.linalg.norm(sl_tot))
    e_dl = float(np.linalg.norm(dl_tot / (4.0 * np.pi) + np.eye(3)))
    return e_sl, e_dl


def _colpt_on_element(mesh, colpt, el):
    """Collocation position in extended precision, evaluated on ``el``
    when the point has a parametric preimage there."""
    for (pid, u, v) in colpt.instances:
        if pid == el.patch_id and el.contains_param(u, v):
            fb = mesh.frames(el, el.master_of(u, v)[None, :], shapes=False, dtype=np.longdouble)
            return fb.x[0]
    return colpt.position.astype(np.longdouble)
