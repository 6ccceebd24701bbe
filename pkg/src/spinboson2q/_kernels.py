"""Hot inner loops of the hierarchy right-hand side.

Two equivalent implementations of the same streaming pass over the
auxiliary operators: a numba ``@njit`` kernel and a vectorized numpy twin.
:mod:`spinboson2q.accel` decides which one is active.  Both walk the
auxiliary operators in index order and write each output block exactly
once, so serial and parallel evaluations agree bitwise.

Per auxiliary operator ``a`` the derivative is

    out[a] = -i [H, y[a]] - damping[a] * y[a]
             - i sum_j upf[a,j] (Q_j y[up] - y[up] Q_j)
             - i sum_j dnf[a,j] (c_j Q_j y[down] - conj(c_j) y[down] Q_j)

with every Q_j diagonal (so its action is a row or column rescale).
"""

import numpy as np

from .accel import HAS_NUMBA, njit, prange


@njit(cache=True, parallel=True)
def _rhs_numba(out, y, h, qdiag, coeff, up, down, upf, dnf, damping):
    n_ados, n_modes = up.shape
    for a in prange(n_ados):
        r = y[a]
        o = out[a]
        g = damping[a]
        for p in range(4):
            for q in range(4):
                s = 0.0j
                for k in range(4):
                    s += h[p, k] * r[k, q] - r[p, k] * h[k, q]
                o[p, q] = -1j * s - g * r[p, q]
        for j in range(n_modes):
            u = up[a, j]
            if u >= 0:
                f = upf[a, j]
                ru = y[u]
                for p in range(4):
                    qp = qdiag[j, p]
                    for q in range(4):
                        o[p, q] += -1j * f * ru[p, q] * (qp - qdiag[j, q])
            f = dnf[a, j]
            if f != 0.0:
                d = down[a, j]
                rd = y[d]
                c = coeff[j]
                cc = np.conj(c)
                for p in range(4):
                    qp = qdiag[j, p]
                    for q in range(4):
                        o[p, q] += -1j * f * (
                            c * qp * rd[p, q] - cc * rd[p, q] * qdiag[j, q]
                        )
    return out


def _rhs_numpy(out, y, h, qdiag, coeff, up, down, upf, dnf, damping):
    np.matmul(h, y, out=out)
    out -= y @ h
    out *= -1j
    out -= damping[:, None, None] * y
    n_modes = up.shape[1]
    for j in range(n_modes):
        qrow = qdiag[j][:, None]  # left multiply scales rows
        qcol = qdiag[j][None, :]  # right multiply scales columns
        mask = up[:, j] >= 0
        if mask.any():
            ru = y[up[mask, j]]
            out[mask] += (-1j * upf[mask, j])[:, None, None] * (ru * (qrow - qcol))
        mask = dnf[:, j] != 0.0
        if mask.any():
            rd = y[down[mask, j]]
            c = coeff[j]
            out[mask] += (-1j * dnf[mask, j])[:, None, None] * (
                c * qrow * rd - np.conj(c) * rd * qcol
            )
    return out


def hierarchy_rhs_kernel():
    return _rhs_numba if HAS_NUMBA else _rhs_numpy
