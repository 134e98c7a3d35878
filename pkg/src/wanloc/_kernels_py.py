"""Pure numpy evaluation of the discrete spread functional and its gradient.

This is the reference implementation; the compiled module ``_kernels``
provides the same entry point with identical semantics.
"""

import numpy as np


def _gather(flat_padded, table, shape):
    return flat_padded[table].reshape(shape)


def mv_terms(phi, fwd, bwd, zcoef, xcoef, want_grad=True):
    """Spread terms of a frame ``phi[k, G, a]``.

    Parameters
    ----------
    phi : complex array (nk, npw, m)
    fwd, bwd : intp arrays (d, nk*npw)
        Forward and adjoint shift gathers; index ``nk*npw`` reads zero.
    zcoef, xcoef : float arrays (dc, d)
        Cartesian weights of forward and central reduced differences.
    want_grad : bool
        Also return the residual field ``R`` that defines the gradient.

    Returns
    -------
    quad : (dc, m) mean squared norms of ``Z_c phi_a``
    center : (dc, m) mean of ``Re <phi_a, i X_c phi_a>``
    resid : (nk, npw, m) or None
    """
    phi = np.ascontiguousarray(phi, dtype=complex)
    nk, npw, m = phi.shape
    d = fwd.shape[0]
    dc = zcoef.shape[0]
    flat = np.concatenate([phi.reshape(nk * npw, m), np.zeros((1, m), complex)])
    sf = [_gather(flat, fwd[i], phi.shape) for i in range(d)]
    sb = [_gather(flat, bwd[i], phi.shape) for i in range(d)]
    quad = np.empty((dc, m))
    center = np.empty((dc, m))
    zs, xs = [], []
    for c in range(dc):
        z = np.zeros_like(phi)
        x = np.zeros_like(phi)
        for i in range(d):
            if zcoef[c, i] != 0.0:
                z += zcoef[c, i] * (sf[i] - phi)
            if xcoef[c, i] != 0.0:
                x += xcoef[c, i] * (sf[i] - sb[i])
        quad[c] = np.sum(z.real ** 2 + z.imag ** 2, axis=(0, 1)) / nk
        center[c] = -np.sum((phi.conj() * x).imag, axis=(0, 1)) / nk
        zs.append(z)
        xs.append(x)
    if not want_grad:
        return quad, center, None
    resid = np.zeros_like(phi)
    for c in range(dc):
        zflat = np.concatenate([zs[c].reshape(nk * npw, m), np.zeros((1, m), complex)])
        for i in range(d):
            if zcoef[c, i] != 0.0:
                resid += zcoef[c, i] * (_gather(zflat, bwd[i], phi.shape) - zs[c])
        resid -= 2j * center[c][None, None, :] * xs[c]
    return quad, center, resid
