"""Reaction-coordinate backend.

One collective mode per bath is promoted into the system: the enlarged
"supersystem" (two qubits plus two truncated oscillator modes) evolves
under a second-order master equation in the residual Ohmic environments.

Mapping used for the overdamped spectral density alpha*w*wc/(w^2+wc^2):
an extracted mode of frequency W, qubit coupling lam = sqrt(alpha)*W and
residual Ohmic strength gam = W^2/wc reproduces it exactly as W -> inf;

    J_eff(w) = lam^2 gam w / ((W^2 - w^2)^2 + gam^2 w^2)

converges to the overdamped form on any fixed window once W is a modest
multiple of the cutoff (the mode is then strongly overdamped, gam >> W, so
no spurious resonance appears at w ~ W).  The multiple is a convergence
knob, like the Fock truncation.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .heom import IntegrationError, TrajectoryRecord
from .qops import hermitize, tensor

DEFAULT_FREQ_FACTOR = 20.0


@dataclass(frozen=True)
class RcParams:
    """Extracted-mode frequencies, qubit couplings and residual strengths."""

    freq1: float
    freq2: float
    coupling1: float
    coupling2: float
    residual1: float
    residual2: float

    def __post_init__(self):
        if self.freq1 <= 0 or self.freq2 <= 0:
            raise ValueError("reaction-coordinate frequencies must be positive")
        if self.residual1 < 0 or self.residual2 < 0:
            raise ValueError("residual coupling strengths must be >= 0")


def map_rc_parameters(spec, freq_factor=DEFAULT_FREQ_FACTOR):
    """(frequency, coupling, residual strength) for one bath.

    A decoupled bath (alpha = 0) maps to a decoupled mode: zero coupling
    and zero residual strength.
    """
    freq = freq_factor * spec.cutoff
    if spec.coupling == 0.0:
        return freq, 0.0, 0.0
    lam = np.sqrt(spec.coupling) * freq
    residual = freq**2 / spec.cutoff
    return freq, lam, residual


def build_rc_params(bath1, bath2, freq_factor=DEFAULT_FREQ_FACTOR):
    f1, l1, g1 = map_rc_parameters(bath1, freq_factor)
    f2, l2, g2 = map_rc_parameters(bath2, freq_factor)
    return RcParams(f1, f2, l1, l2, g1, g2)


def effective_spectral_density(freq, coupling, residual, omega):
    """Spectral density a qubit sees through its damped extracted mode."""
    omega = np.asarray(omega, dtype=float)
    if residual == 0.0 or coupling == 0.0:
        return np.zeros_like(omega)
    num = coupling**2 * residual * omega
    den = (freq**2 - omega**2) ** 2 + (residual * omega) ** 2
    return num / den


def _ladder(n_levels):
    return np.diag(np.sqrt(np.arange(1, n_levels, dtype=float)), 1).astype(complex)


def _mode_operators(freq, n_levels):
    """Truncated position operator and oscillator Hamiltonian.

    The Hamiltonian is the projection of (momentum^2 + freq^2 position^2)/2
    onto the lowest levels, i.e. the exact ladder freq*(n + 1/2); building
    it from products of truncated factors instead would scramble the top
    level into the middle of the spectrum.
    """
    a = _ladder(n_levels)
    pos = (a + a.conj().T) / np.sqrt(2.0 * freq)
    ham = np.diag(freq * (np.arange(n_levels, dtype=float) + 0.5)).astype(complex)
    return pos, ham


@dataclass(frozen=True)
class Supersystem:
    """Supersystem Hamiltonian, its eigenbasis, and the embedded couplings.

    ``s_eig[nu]`` is the position operator of mode nu in the eigenbasis;
    the master equation is propagated there, where the unitary part is a
    diagonal gap matrix and dissipator assembly is elementwise.
    """

    h_super: np.ndarray = field(repr=False)
    evals: np.ndarray = field(repr=False)
    evecs: np.ndarray = field(repr=False)
    s_eig: np.ndarray = field(repr=False)
    fock: tuple
    rc: RcParams

    @property
    def dim(self):
        return self.h_super.shape[0]

    def to_eigenbasis(self, op):
        return self.evecs.conj().T @ op @ self.evecs

    def from_eigenbasis(self, op):
        return self.evecs @ op @ self.evecs.conj().T

    def reduce_to_qubits(self, rho_prod):
        m1, m2 = self.fock
        r = rho_prod.reshape(4, m1, m2, 4, m1, m2)
        return np.einsum("aijbij->ab", r)

    def mode_level_populations(self, rho_prod, mode):
        """Diagonal populations of one oscillator mode (0 or 1)."""
        m1, m2 = self.fock
        r = rho_prod.reshape(4, m1, m2, 4, m1, m2)
        if mode == 0:
            return np.einsum("aijakj->ik", r).diagonal().real
        return np.einsum("aijaik->jk", r).diagonal().real


def build_supersystem(h_sys, rc: RcParams, fock1=8, fock2=None):
    """Assemble and diagonalize the two-qubit + two-mode Hamiltonian."""
    if fock2 is None:
        fock2 = fock1
    if fock1 < 2 or fock2 < 2:
        raise ValueError("each mode needs at least 2 levels")
    pos1, ham1 = _mode_operators(rc.freq1, fock1)
    pos2, ham2 = _mode_operators(rc.freq2, fock2)
    eye1 = np.eye(fock1, dtype=complex)
    eye2 = np.eye(fock2, dtype=complex)
    eye4 = np.eye(4, dtype=complex)
    sz1 = np.diag([1.0, 1.0, -1.0, -1.0]).astype(complex)
    sz2 = np.diag([1.0, -1.0, 1.0, -1.0]).astype(complex)

    h = (
        tensor(h_sys, eye1, eye2)
        + tensor(eye4, ham1, eye2)
        + tensor(eye4, eye1, ham2)
        + rc.coupling1 * tensor(sz1, pos1, eye2)
        + rc.coupling2 * tensor(sz2, eye1, pos2)
    )
    h = hermitize(h)
    evals, evecs = np.linalg.eigh(h)
    s1 = tensor(eye4, pos1, eye2)
    s2 = tensor(eye4, eye1, pos2)
    s_eig = np.stack(
        [evecs.conj().T @ s1 @ evecs, evecs.conj().T @ s2 @ evecs]
    )
    return Supersystem(
        h_super=h, evals=evals, evecs=evecs, s_eig=s_eig, fock=(fock1, fock2), rc=rc
    )


@dataclass(frozen=True)
class RcDissipator:
    """chi/theta pairs for both residual baths, in the supersystem eigenbasis."""

    chi: np.ndarray = field(repr=False)
    theta: np.ndarray = field(repr=False)


def _chi_theta_weights(gaps, residual, beta, gap_tol=1e-10):
    """Elementwise weights gamma*D*coth(beta*D/2) (even) and gamma*D (odd).

    The degenerate-gap limit of the first is 2*gamma/beta; the second
    vanishes there.
    """
    small = np.abs(gaps) < gap_tol
    safe = np.where(small, 1.0, gaps)
    w_chi = np.where(
        small,
        2.0 * residual / beta,
        residual * safe / np.tanh(0.5 * beta * safe),
    )
    w_theta = residual * np.where(small, 0.0, gaps)
    return w_chi, w_theta


def build_rc_dissipator(sys: Supersystem, rc: RcParams, temp1, temp2):
    """chi_nu = (1/2) sum_kl J(D_kl) coth(beta_nu D_kl / 2) S_nu^kl |k><l|
    and theta_nu likewise without the coth, J Ohmic with strength
    residual_nu, D_kl the eigenvalue gaps."""
    gaps = sys.evals[:, None] - sys.evals[None, :]
    chi = np.empty((2, sys.dim, sys.dim), dtype=complex)
    theta = np.empty_like(chi)
    for nu, (residual, beta) in enumerate(
        [(rc.residual1, 1.0 / temp1), (rc.residual2, 1.0 / temp2)]
    ):
        if residual == 0.0:
            chi[nu] = 0.0
            theta[nu] = 0.0
            continue
        w_chi, w_theta = _chi_theta_weights(gaps, residual, beta)
        chi[nu] = 0.5 * w_chi * sys.s_eig[nu]
        theta[nu] = 0.5 * w_theta * sys.s_eig[nu]
    return RcDissipator(chi=chi, theta=theta)


def thermal_mode_state(freq, n_levels, temperature):
    """Thermal occupation of a truncated mode at its own frequency."""
    w = np.exp(-freq * np.arange(n_levels) / temperature)
    return np.diag(w / w.sum()).astype(complex)


def initial_supersystem_state(sys: Supersystem, rho_sys, temp1, temp2):
    """System state times thermal states of both extracted modes."""
    th1 = thermal_mode_state(sys.rc.freq1, sys.fock[0], temp1)
    th2 = thermal_mode_state(sys.rc.freq2, sys.fock[1], temp2)
    return tensor(np.asarray(rho_sys, dtype=complex), th1, th2)


class _MasterEquation:
    """dr/dt = G r + r Gt + sum_nu (S_nu r B_nu + A_nu r S_nu), in eigenbasis.

    A = chi - theta, B = chi + theta; G = -i diag(E) - sum S A and
    Gt = +i diag(E) - sum B A-side products.  The double-commutator /
    anticommutator structure is traceless and Hermiticity-preserving
    (A^dag = B).
    """

    def __init__(self, sys: Supersystem, diss: RcDissipator):
        d = sys.dim
        self.dim = d
        self.s = sys.s_eig
        self.a_ops = diss.chi - diss.theta
        self.b_ops = diss.chi + diss.theta
        g = -1j * np.diag(sys.evals).astype(complex)
        gt = 1j * np.diag(sys.evals).astype(complex)
        for nu in range(2):
            g -= self.s[nu] @ self.a_ops[nu]
            gt -= self.b_ops[nu] @ self.s[nu]
        self.g = g
        self.gt = gt

    def apply(self, rho):
        out = self.g @ rho
        out += rho @ self.gt
        for nu in range(2):
            out += self.s[nu] @ rho @ self.b_ops[nu]
            out += self.a_ops[nu] @ rho @ self.s[nu]
        return out

    def matvec(self, vec):
        return self.apply(vec.reshape(self.dim, self.dim)).reshape(-1)


def krylov_expm_step(matvec, v, dt, tol=1e-10, m_max=64, min_sub=1e-8):
    """w ~= exp(dt*L) v by Arnoldi with substepping.

    Standard a-posteriori estimate (last-entry of the small exponential);
    the step is halved until the estimate meets ``tol`` relative to |v|.
    """
    norm_v = np.linalg.norm(v)
    if norm_v == 0.0 or dt == 0.0:
        return v.copy()
    remaining = dt
    w = v.copy()
    while remaining > 1e-14 * dt:
        beta = np.linalg.norm(w)
        basis = np.empty((m_max + 1, w.size), dtype=complex)
        basis[0] = w / beta
        hess = np.zeros((m_max + 1, m_max), dtype=complex)
        m_eff = m_max
        happy = False
        for j in range(m_max):
            p = matvec(basis[j])
            for i in range(j + 1):
                c = np.vdot(basis[i], p)
                hess[i, j] = c
                p -= c * basis[i]
            for i in range(j + 1):  # one re-orthogonalization pass
                c = np.vdot(basis[i], p)
                hess[i, j] += c
                p -= c * basis[i]
            h_next = np.linalg.norm(p)
            hess[j + 1, j] = h_next
            if h_next < 1e-14 * beta:
                m_eff = j + 1
                happy = True
                break
            basis[j + 1] = p / h_next
        tau = remaining
        while True:
            small = expm(tau * hess[:m_eff, :m_eff])
            if happy:
                err = 0.0
            else:
                err = abs(tau * hess[m_eff, m_eff - 1] * small[m_eff - 1, 0]) * beta
            if err <= tol * norm_v or tau <= max(min_sub, remaining * 1e-6):
                break
            tau *= 0.5
        w = beta * (basis[:m_eff].T @ small[:, 0])
        remaining -= tau
    return w


def rcm_propagate(
    sys: Supersystem,
    diss: RcDissipator,
    rho_sys0,
    temp1,
    temp2,
    t_grid,
    tol=1e-10,
    method="krylov",
    positivity_tol=1e-3,
    occupation_tol=1e-4,
):
    """Propagate the supersystem master equation and reduce to the qubits.

    The initial supersystem state is the qubit state times thermal states
    of both extracted modes.  Observables are recorded on ``t_grid``; the
    trajectory holds the reduced (4x4) states.  Transient negativity of the
    reduced state beyond ``positivity_tol`` and top-Fock-level occupation
    beyond ``occupation_tol`` are reported as warnings, never clamped.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid[0] != 0.0 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be sorted, strictly increasing and start at 0")
    eq = _MasterEquation(sys, diss)
    rho0 = initial_supersystem_state(sys, rho_sys0, temp1, temp2)
    rho_eig = sys.to_eigenbasis(rho0)

    n_t = t_grid.size
    states = np.empty((n_t, 4, 4), dtype=complex)
    min_eig = 0.0
    top_pop = np.zeros(2)

    def record(i, rho_e):
        nonlocal min_eig, top_pop
        rho_prod = sys.from_eigenbasis(rho_e)
        red = hermitize(sys.reduce_to_qubits(rho_prod))
        states[i] = red
        min_eig = min(min_eig, float(np.linalg.eigvalsh(red).min()))
        for mode in range(2):
            top_pop[mode] = max(
                top_pop[mode], sys.mode_level_populations(rho_prod, mode)[-1]
            )

    if method == "krylov":
        vec = rho_eig.reshape(-1)
        record(0, rho_eig)
        for i in range(1, n_t):
            vec = krylov_expm_step(eq.matvec, vec, t_grid[i] - t_grid[i - 1], tol=tol)
            record(i, vec.reshape(sys.dim, sys.dim))
    elif method == "rk45":
        sol = solve_ivp(
            lambda _t, y: eq.matvec(y),
            (t_grid[0], t_grid[-1]),
            rho_eig.reshape(-1),
            method="RK45",
            t_eval=t_grid,
            rtol=max(tol, 1e-12),
            atol=max(tol * 1e-2, 1e-14),
        )
        if not sol.success:
            raise IntegrationError(f"supersystem propagation failed: {sol.message}")
        for i in range(n_t):
            record(i, sol.y[:, i].reshape(sys.dim, sys.dim))
    else:
        raise ValueError(f"unknown rcm integrator {method!r}")

    if min_eig < -positivity_tol:
        warnings.warn(
            f"reduced state dipped to eigenvalue {min_eig:.3e}; second-order "
            "master equations can transiently violate positivity",
            stacklevel=2,
        )
    for mode in range(2):
        if top_pop[mode] > occupation_tol:
            warnings.warn(
                f"mode {mode + 1} occupies its top Fock level at {top_pop[mode]:.2e}; "
                "raise the truncation",
                stacklevel=2,
            )

    return TrajectoryRecord(
        times=t_grid,
        states=states,
        qsb=None,
        method="rcm",
        meta={"min_reduced_eigenvalue": min_eig, "top_level_population": top_pop.copy()},
    )
