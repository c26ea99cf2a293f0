"""Pure-NumPy implementation of the assembly hot loops.

Same contracts as the compiled ``_accel`` module; selected at import time
when the extension is unavailable (or STOKESBEM_PURE_PYTHON is set).
"""
import numpy as np

name = "numpy"

_EYE = np.eye(3)


def _pieces(Y, X):
    r = X[None, :, :] - Y[:, None, :]          # (m, nq, 3)
    rn = np.linalg.norm(r, axis=2)
    rb = r / rn[..., None]
    return rn, rb


def stokes_rows(Y, X, NRM, SJW, out_g, out_t, with_t=True):
    """Accumulate single/double-layer row blocks for m source points.

    out_g[a,i,A,j] += sum_q G_ij(x_q - y_a) * SJW[q,A]
    out_t[a,i,A,j] += sum_q (T(x_q - y_a) . n_q)_ij * SJW[q,A]
    """
    rn, rb = _pieces(Y, X)
    G = (_EYE[None, None] + rb[..., :, None] * rb[..., None, :]) / rn[..., None, None]
    out_g += np.einsum("mqij,qA->miAj", G, SJW, optimize=True)
    if with_t:
        s = -6.0 * np.einsum("mqk,qk->mq", rb, NRM) / (rn * rn)
        TN = s[..., None, None] * rb[..., :, None] * rb[..., None, :]
        out_t += np.einsum("mqij,qA->miAj", TN, SJW, optimize=True)


def identity_sums(Y, X, NRM, JW, out_sl, out_dl):
    """Accumulate int G.n da and int T.n da for m source points."""
    rn, rb = _pieces(Y, X)
    G = (_EYE[None, None] + rb[..., :, None] * rb[..., None, :]) / rn[..., None, None]
    out_sl += np.einsum("mqij,qj,q->mi", G, NRM, JW, optimize=True)
    s = -6.0 * np.einsum("mqk,qk->mq", rb, NRM) / (rn * rn)
    out_dl += np.einsum("mq,mqi,mqj,q->mij", s, rb, rb, JW, optimize=True)
