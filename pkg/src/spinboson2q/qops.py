"""Dense complex operator algebra shared by every backend.

Pauli/tensor constructions, commutators, partial traces, Hermitian matrix
functions and the column-stacking vectorization used for superoperators.

Conventions (fixed repo-wide):

* qubit 1 is the first tensor factor, qubit 2 the second; the
  computational basis is ``|00>, |01>, |10>, |11>`` with ``sigma_z|0> = +|0>``;
* vectorization is column-stacking, ``vec(A X B) = (B^T kron A) vec(X)``,
  with ``vec(X) = X.T.reshape(-1)`` for row-major arrays.
"""

import numpy as np

SIGMA = {
    "x": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    "y": np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    "z": np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
}
IDENT2 = np.eye(2, dtype=complex)


def tensor(*ops):
    """Kronecker product of a sequence of operators."""
    out = np.array([[1.0]], dtype=complex)
    for op in ops:
        out = np.kron(out, op)
    return out


def pauli(axis, site, n_sites=2):
    """Pauli operator on one site, identity elsewhere.

    ``axis`` is one of ``"x" | "y" | "z"``; sites count from 1.
    """
    if axis not in SIGMA:
        raise ValueError(f"unknown Pauli axis {axis!r}")
    if not 1 <= site <= n_sites:
        raise ValueError(f"site {site} out of range for {n_sites} site(s)")
    factors = [SIGMA[axis] if s == site else IDENT2 for s in range(1, n_sites + 1)]
    return tensor(*factors)


def build_system_hamiltonian(cfg):
    """Two-qubit Hamiltonian: longitudinal + transverse fields and an XX+YY
    exchange term.

    ``cfg`` needs attributes ``eps1, delta1, eps2, delta2, coupling_j``.
    """
    h = (
        0.5 * cfg.eps1 * pauli("z", 1)
        + 0.5 * cfg.delta1 * pauli("x", 1)
        + 0.5 * cfg.eps2 * pauli("z", 2)
        + 0.5 * cfg.delta2 * pauli("x", 2)
        + cfg.coupling_j * (pauli("x", 1) @ pauli("x", 2) + pauli("y", 1) @ pauli("y", 2))
    )
    return hermitize(h)


def dag(op):
    return op.conj().T


def hermitize(op):
    """Symmetrize, (A + A^dag)/2.  Used for drift control after propagation."""
    return 0.5 * (op + op.conj().T)


def is_hermitian(op, tol=1e-12):
    return np.max(np.abs(op - op.conj().T)) <= tol


def commutator(a, b):
    return a @ b - b @ a


def anticommutator(a, b):
    return a @ b + b @ a


def partial_trace(rho, keep_site):
    """Trace a 4x4 two-qubit operator down to one qubit.

    ``keep_site`` is 1 or 2.  Trace is preserved.
    """
    rho = np.asarray(rho)
    if rho.shape != (4, 4):
        raise ValueError(f"expected a 4x4 two-qubit operator, got shape {rho.shape}")
    if keep_site not in (1, 2):
        raise ValueError(f"keep_site must be 1 or 2, got {keep_site}")
    r = rho.reshape(2, 2, 2, 2)
    if keep_site == 1:
        return np.einsum("ikjk->ij", r)
    return np.einsum("kikj->ij", r)


def hermitian_log(rho, floor=1e-14):
    """Matrix logarithm of a Hermitian operator with an eigenvalue floor.

    Eigenvalues below ``floor`` are clamped to it before taking the log, so
    exactly pure states stay finite (the 0*log(0) = 0 convention is applied
    by the callers that multiply by the state again).
    """
    rho = np.asarray(rho)
    if floor <= 0:
        raise ValueError("floor must be positive")
    if not is_hermitian(rho, tol=1e-10):
        raise ValueError("hermitian_log expects a Hermitian operator")
    vals, vecs = np.linalg.eigh(hermitize(rho))
    vals = np.maximum(vals, floor)
    return (vecs * np.log(vals)) @ vecs.conj().T


def vectorize(op):
    """Column-stacked vector of a square operator."""
    return np.asarray(op).T.reshape(-1)


def unvectorize(vec, dim=None):
    """Inverse of :func:`vectorize`."""
    vec = np.asarray(vec)
    if dim is None:
        dim = int(round(np.sqrt(vec.size)))
    return vec.reshape(dim, dim).T


def left_multiply_superop(a):
    """Superoperator for X -> A X under column stacking."""
    a = np.asarray(a)
    return np.kron(np.eye(a.shape[0]), a)


def right_multiply_superop(b):
    """Superoperator for X -> X B under column stacking."""
    b = np.asarray(b)
    return np.kron(b.T, np.eye(b.shape[0]))


def commutator_superop(h):
    """Superoperator for X -> -i[H, X]."""
    return -1j * (left_multiply_superop(h) - right_multiply_superop(h))


def validate_density_matrix(rho, herm_tol=1e-12, trace_tol=1e-10, eig_floor=-1e-6):
    """Check the density-matrix invariants; raises ValueError on violation."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got {rho.shape}")
    if not np.all(np.isfinite(rho)):
        raise ValueError("density matrix has non-finite entries")
    herr = np.max(np.abs(rho - rho.conj().T))
    if herr > herm_tol:
        raise ValueError(f"density matrix not Hermitian: max deviation {herr:.3e}")
    terr = abs(np.trace(rho) - 1.0)
    if terr > trace_tol:
        raise ValueError(f"density matrix trace off by {terr:.3e}")
    wmin = np.linalg.eigvalsh(hermitize(rho)).min()
    if wmin < eig_floor:
        raise ValueError(f"density matrix indefinite: min eigenvalue {wmin:.3e}")
    return rho
