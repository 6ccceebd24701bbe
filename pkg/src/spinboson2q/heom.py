"""Hierarchy backend: right-hand side, propagation, steady state, and the
first-tier expectations that expose bath-interaction energies.

The physical reduced state is entry 0 of the hierarchy state; higher
entries carry bath memory.  States are stored as one contiguous
``(n_ados, 4, 4)`` complex array so the right-hand side is a streaming
pass (see :mod:`spinboson2q._kernels`).
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp
from scipy.special import gammaln

from ._kernels import hierarchy_rhs_kernel
from .hierarchy import Hierarchy, ResourceError
from .qops import hermitize

_RHS = hierarchy_rhs_kernel()


class IntegrationError(RuntimeError):
    """Propagation failed (step-size underflow or non-finite state)."""


class SteadyStateError(RuntimeError):
    """Linear steady-state solve failed or did not converge."""


@dataclass
class TrajectoryRecord:
    """Time grid plus recorded states and optional first-tier expectations.

    ``qsb`` holds the per-time complex pair (bath-1, bath-2) of
    sum_k Tr[sigma_z^(i) rho_1^(i,k)]; None when the hierarchy has no
    first tier or for non-hierarchy backends.
    """

    times: np.ndarray
    states: np.ndarray
    qsb: np.ndarray | None = None
    method: str = "heom"
    meta: dict = field(default_factory=dict)

    def expectation(self, op):
        """Tr[rho(t) op] along the trajectory (real part)."""
        return np.einsum("tij,ji->t", self.states, op).real


def _mode_factors(h: Hierarchy, scaled: bool):
    """Per-(ado, mode) up/down coupling factors for the kernel.

    Unscaled: up factor 1, down factor n_j (the bare equations of motion).
    Scaled: the square-root rescaling that equalizes coupling magnitudes,
    up = sqrt((n_j+1)|c_j|), down = sqrt(n_j/|c_j|).
    """
    counts = h.counts.astype(np.float64)
    has_up = h.up >= 0
    if not scaled:
        upf = np.where(has_up, 1.0, 0.0)
        dnf = counts.copy()
        return upf, dnf
    cabs = np.abs(h.coefficients)
    safe = np.where(cabs > 0, cabs, 1.0)
    upf = np.where(has_up, np.sqrt((counts + 1.0) * cabs[None, :]), 0.0)
    dnf = np.where(counts > 0, np.sqrt(counts * np.where(cabs > 0, 1.0 / safe, 0.0)[None, :]), 0.0)
    return upf, dnf


def _scale_vector(h: Hierarchy):
    """s_n = sqrt(prod_j n_j! |c_j|^n_j); maps scaled states back to bare ones."""
    cabs = np.abs(h.coefficients)
    logs = np.zeros(h.n_ados)
    counts = h.counts
    for j in range(h.n_modes):
        nj = counts[:, j]
        if cabs[j] > 0:
            logs += 0.5 * nj * np.log(cabs[j])
        logs += 0.5 * gammaln(nj + 1.0)
    return np.exp(logs)


def _qdiag_by_mode(h: Hierarchy):
    return h.coupling_diag[h.mode_bath].astype(np.float64)


def heom_rhs(h: Hierarchy, h_sys, state, out=None, scaled=False):
    """Time derivative of a full hierarchy state under the equations of motion."""
    state = np.asarray(state, dtype=np.complex128)
    if state.shape != (h.n_ados, 4, 4):
        raise ValueError(
            f"state shape {state.shape} does not match hierarchy ({h.n_ados}, 4, 4)"
        )
    if out is None:
        out = np.empty_like(state)
    upf, dnf = _mode_factors(h, scaled)
    return _RHS(
        out,
        state,
        np.ascontiguousarray(h_sys, dtype=np.complex128),
        _qdiag_by_mode(h),
        h.coefficients,
        h.up,
        h.down,
        upf,
        dnf,
        h.damping,
    )


def initial_state(h: Hierarchy, rho0):
    """Factorized initialization: physical state in entry 0, all others zero."""
    y = np.zeros((h.n_ados, 4, 4), dtype=np.complex128)
    y[0] = rho0
    return y


def first_tier_expectation(h: Hierarchy, state, bath):
    """sum_k Tr[sigma_z^(bath) rho_1^(bath,k)] from an unscaled hierarchy state.

    This is the hierarchy realization of the system-bath interaction
    expectation <sigma_z^(i) B_i>; its physical part is the real part.
    """
    if h.depth < 1:
        raise ValueError("first-tier expectations need hierarchy depth >= 1")
    if bath not in (0, 1):
        raise ValueError("bath must be 0 or 1")
    qd = h.coupling_diag[bath]
    total = 0.0j
    for pos in h.first_tier_positions(bath):
        total += np.sum(qd * np.diagonal(state[pos]))
    return total


def propagate(
    h: Hierarchy,
    h_sys,
    rho0,
    t_grid,
    rtol=1e-8,
    atol=1e-10,
    scaled=False,
    record_qsb=True,
    y0_full=None,
):
    """Integrate the hierarchy from a factorized initial state.

    Adaptive embedded Runge-Kutta 5(4) with dense output evaluated on
    ``t_grid``; the returned record holds the symmetrized physical state per
    grid time and, when the hierarchy has a first tier, the two interaction
    expectations.  The returned record's states follow the bare (unscaled)
    convention regardless of ``scaled``.

    ``y0_full`` replaces the factorized initialization with a complete
    (unscaled) hierarchy state, e.g. to re-propagate a steady state; it is
    incompatible with ``scaled``.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid[0] != 0.0 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be sorted, strictly increasing and start at 0")
    if y0_full is not None:
        if scaled:
            raise ValueError("y0_full expects the bare (unscaled) convention")
        y0 = np.asarray(y0_full, dtype=np.complex128)
        if y0.shape != (h.n_ados, 4, 4):
            raise ValueError("y0_full shape does not match the hierarchy")
    else:
        y0 = initial_state(h, rho0)

    upf, dnf = _mode_factors(h, scaled)
    qdiag = _qdiag_by_mode(h)
    hmat = np.ascontiguousarray(h_sys, dtype=np.complex128)
    shape = y0.shape

    def fun(_t, yflat):
        y = yflat.reshape(shape)
        out = np.empty_like(y)
        _RHS(out, y, hmat, qdiag, h.coefficients, h.up, h.down, upf, dnf, h.damping)
        return out.reshape(-1)

    sol = solve_ivp(
        fun,
        (t_grid[0], t_grid[-1]),
        y0.reshape(-1),
        method="RK45",
        t_eval=t_grid,
        rtol=rtol,
        atol=atol,
    )
    if not sol.success:
        raise IntegrationError(
            f"hierarchy propagation failed at t={sol.t[-1] if sol.t.size else 0}: "
            f"{sol.message}"
        )

    n_t = t_grid.size
    ys = sol.y.T.reshape(n_t, *shape)
    if scaled:
        ys = ys * _scale_vector(h)[None, :, None, None]

    states = np.empty((n_t, 4, 4), dtype=np.complex128)
    for i in range(n_t):
        states[i] = hermitize(ys[i, 0])

    qsb = None
    if record_qsb and h.depth >= 1:
        qsb = np.empty((n_t, 2), dtype=np.complex128)
        for i in range(n_t):
            qsb[i, 0] = first_tier_expectation(h, ys[i], 0)
            qsb[i, 1] = first_tier_expectation(h, ys[i], 1)

    return TrajectoryRecord(times=t_grid, states=states, qsb=qsb, method="heom"), ys[-1]


# --- assembled (sparse) generator -----------------------------------------


def _commutator_pattern(h_sys):
    """16x16 column-stacked superoperator of -i[H, .]."""
    hmat = np.asarray(h_sys, dtype=complex)
    eye = np.eye(4, dtype=complex)
    return -1j * (np.kron(eye, hmat) - np.kron(hmat.T, eye))


def assemble_liouvillian(h: Hierarchy, h_sys, max_bytes=2**32):
    """Sparse matrix form of the full hierarchy generator.

    Column-stacked layout, blocks of 16 per auxiliary operator in index
    order.  Matrix-vector products with a vectorized state equal
    :func:`heom_rhs` on that state.
    """
    n = h.n_ados
    dim = 16 * n
    comm = _commutator_pattern(h_sys)
    comm_idx = np.nonzero(comm)
    comm_vals = comm[comm_idx]
    nnz_diag = comm_vals.size

    qdiag = _qdiag_by_mode(h)
    ones4 = np.ones(4)
    # vec index of entry (p, q) is 4q + p; left multiplication by a diagonal
    # Q scales the row index p, right multiplication scales the column q
    left_diag = np.einsum("q,jp->jqp", ones4, qdiag).reshape(h.n_modes, 16)
    right_diag = np.einsum("jq,p->jqp", qdiag, ones4).reshape(h.n_modes, 16)

    est = (
        n * (nnz_diag + 16)
        + 16 * int((h.up >= 0).sum())
        + 16 * int((h.counts > 0).sum())
    )
    if est * 32 > max_bytes:
        raise ResourceError(
            f"assembled generator needs about {est * 32 / 2**20:.0f} MiB, over "
            f"the {max_bytes / 2**20:.0f} MiB budget"
        )

    rows, cols, vals = [], [], []
    base = 16 * np.arange(n, dtype=np.int64)

    # per-ado diagonal block: commutator pattern plus -damping on the diagonal
    rows.append((base[:, None] + comm_idx[0][None, :]).reshape(-1))
    cols.append((base[:, None] + comm_idx[1][None, :]).reshape(-1))
    vals.append(np.tile(comm_vals, n))
    diag16 = np.arange(16)
    rows.append((base[:, None] + diag16[None, :]).reshape(-1))
    cols.append((base[:, None] + diag16[None, :]).reshape(-1))
    vals.append(np.repeat(-h.damping.astype(complex), 16))

    for j in range(h.n_modes):
        up_diag = -1j * (left_diag[j] - right_diag[j])
        a_idx = np.flatnonzero(h.up[:, j] >= 0)
        if a_idx.size:
            u_idx = h.up[a_idx, j]
            rows.append((16 * a_idx[:, None] + diag16[None, :]).reshape(-1))
            cols.append((16 * u_idx[:, None] + diag16[None, :]).reshape(-1))
            vals.append(np.tile(up_diag, a_idx.size))
        c = h.coefficients[j]
        dn_diag = -1j * (c * left_diag[j] - np.conj(c) * right_diag[j])
        a_idx = np.flatnonzero(h.counts[:, j] > 0)
        if a_idx.size:
            d_idx = h.down[a_idx, j]
            nvals = h.counts[a_idx, j].astype(complex)
            rows.append((16 * a_idx[:, None] + diag16[None, :]).reshape(-1))
            cols.append((16 * d_idx[:, None] + diag16[None, :]).reshape(-1))
            vals.append((nvals[:, None] * dn_diag[None, :]).reshape(-1))

    mat = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(dim, dim),
    )
    mat.sum_duplicates()
    return mat


def vectorize_state(state):
    """Column-stack every block of a hierarchy state into one vector."""
    state = np.asarray(state)
    return state.transpose(0, 2, 1).reshape(-1)


def unvectorize_state(vec, n_ados):
    return vec.reshape(n_ados, 4, 4).transpose(0, 2, 1)


# --- steady state ----------------------------------------------------------

_TRACE_POSITIONS = np.array([0, 5, 10, 15])  # vec indices of rho_0 diagonal


def _replace_trace_row(liouv):
    coo = liouv.tocoo()
    keep = coo.row != 0
    rows = np.concatenate([coo.row[keep], np.zeros(4, dtype=coo.row.dtype)])
    cols = np.concatenate([coo.col[keep], _TRACE_POSITIONS])
    vals = np.concatenate([coo.data[keep], np.ones(4, dtype=coo.data.dtype)])
    return sp.csc_matrix((vals, (rows, cols)), shape=liouv.shape)


def _block_jacobi(h: Hierarchy, h_sys, shift):
    """Per-ado inverse diagonal blocks, the iterative-path preconditioner.

    The tier-0 commutator block is singular on its own, so every block is
    shifted by ``shift`` before inversion; the preconditioner only steers
    the Krylov solver and need not be exact.
    """
    comm = _commutator_pattern(h_sys)
    eye = np.eye(16, dtype=complex)
    blocks = comm[None, :, :] - (h.damping[:, None, None] + shift) * eye[None, :, :]
    return np.linalg.inv(blocks)


def steady_state(
    h: Hierarchy,
    h_sys,
    tol=1e-10,
    residual_tol=1e-8,
    method="auto",
    direct_dim_limit=70000,
    max_bytes=2**32,
    maxiter=2000,
):
    """Null vector of the assembled generator with unit physical trace.

    One row is replaced by the trace functional and the resulting
    nonsingular system solved, directly (sparse LU) when the dimension is
    moderate, otherwise by preconditioned LGMRES.  Returns the full
    hierarchy state (first tier included, for the interaction
    expectations) and the infinity-norm residual of the original generator.
    """
    if float(np.max(np.abs(h.coefficients))) == 0.0:
        raise ValueError("steady state needs at least one coupled bath")
    liouv = assemble_liouvillian(h, h_sys, max_bytes=max_bytes)
    dim = liouv.shape[0]
    lhs = _replace_trace_row(liouv)
    rhs = np.zeros(dim, dtype=complex)
    rhs[0] = 1.0

    if method == "auto":
        method = "direct" if dim <= direct_dim_limit else "iterative"

    if method == "direct":
        try:
            lu = spla.splu(lhs, permc_spec="COLAMD")
            x = lu.solve(rhs)
        except (MemoryError, RuntimeError) as exc:
            if isinstance(exc, RuntimeError) and "singular" in str(exc).lower():
                raise SteadyStateError(
                    "steady-state system is singular; the hierarchy generator "
                    "may have a degenerate null space"
                ) from exc
            warnings.warn(
                f"direct steady-state factorization failed ({exc}); "
                "falling back to the iterative solver",
                stacklevel=2,
            )
            method = "iterative"

    if method == "iterative":
        rate_scale = float(np.sum(np.abs(h.coefficients) / np.maximum(h.rates, 1e-12)))
        shift = max(rate_scale, 1e-6)
        inv_blocks = _block_jacobi(h, h_sys, shift)

        def precondition(vec):
            blocks = vec.reshape(h.n_ados, 16)
            return np.einsum("aij,aj->ai", inv_blocks, blocks).reshape(-1)

        pre = spla.LinearOperator((dim, dim), matvec=precondition, dtype=complex)
        x0 = np.zeros(dim, dtype=complex)
        x0[_TRACE_POSITIONS] = 0.25
        x, info = spla.lgmres(
            lhs, rhs, x0=x0, M=pre, rtol=tol, atol=0.0,
            maxiter=maxiter, inner_m=50,
        )
        if info != 0:
            raise SteadyStateError(
                f"iterative steady-state solve did not converge (info={info}); "
                f"residual so far {np.max(np.abs(liouv @ x)):.3e}"
            )

    residual = float(np.max(np.abs(liouv @ x)))
    if residual > residual_tol:
        warnings.warn(
            f"steady-state residual {residual:.3e} exceeds {residual_tol:g}; "
            "treat this state as non-converged",
            stacklevel=2,
        )
    state = unvectorize_state(x, h.n_ados)
    return np.ascontiguousarray(state), residual
