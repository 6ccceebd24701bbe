"""Coherence, distinguishability, entropy, entropy production and the
steady-state heat/spin currents.

Everything operates on plain density matrices or trajectory records; the
hierarchy-specific pieces (interaction energies, bath-side currents) take
the hierarchy and its full state explicitly.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .heom import TrajectoryRecord, first_tier_expectation
from .qops import commutator, hermitize, pauli

_SELF_CHECK_TOL = 1e-10
_IMAG_DIAG_TOL = 1e-6


def l1_coherence(rho):
    """Sum of absolute off-diagonal elements in the computational basis."""
    rho = np.asarray(rho)
    return float(np.sum(np.abs(rho)) - np.sum(np.abs(np.diagonal(rho))))


def trace_distance(rho1, rho2):
    """Half the trace norm of the difference of two states."""
    rho1 = np.asarray(rho1)
    rho2 = np.asarray(rho2)
    if rho1.shape != rho2.shape:
        raise ValueError(f"shape mismatch {rho1.shape} vs {rho2.shape}")
    evals = np.linalg.eigvalsh(hermitize(rho1 - rho2))
    return float(0.5 * np.sum(np.abs(evals)))


def blp_witness(td_series):
    """(measure, revival count) of a trace-distance series on a time grid.

    The measure sums the positive increments between consecutive samples;
    a revival is a maximal increasing run.  Any positive measure witnesses
    information backflow.
    """
    td = np.asarray(td_series, dtype=float)
    if td.size < 2:
        raise ValueError("need at least two trace-distance samples")
    diffs = np.diff(td)
    measure = float(np.sum(diffs[diffs > 0]))
    rising = diffs > 0
    revivals = int(np.sum(rising & ~np.concatenate([[False], rising[:-1]])))
    return measure, revivals


def von_neumann_entropy(rho):
    """-sum p log p over eigenvalues (natural log, 0 log 0 = 0)."""
    evals = np.linalg.eigvalsh(hermitize(np.asarray(rho)))
    p = evals[evals > 0.0]
    return float(-np.sum(p * np.log(p)))


def entropy_production(traj: TrajectoryRecord, beta, h_sys):
    """Irreversibility along a hierarchy trajectory with equal-temperature baths.

    Sigma(t) = S[rho(t)] - S[rho(0)]
               - beta * (Q_S(t) + Q_SB1(t) + Q_SB2(t)),

    with Q_S the change of system energy and Q_SBi the change of the
    bath-i interaction expectation taken from the first-tier data recorded
    on the trajectory.  Only the equal-temperature form is implemented.
    """
    if traj.qsb is None:
        raise ValueError(
            "entropy production needs first-tier data; propagate with depth >= 1 "
            "and record_qsb=True"
        )
    t1 = traj.meta.get("temp1")
    t2 = traj.meta.get("temp2")
    if t1 is not None and t2 is not None and not np.isclose(t1, t2):
        raise ValueError(
            f"equal-temperature form only: trajectory has T1={t1}, T2={t2}"
        )
    imag_peak = float(np.max(np.abs(traj.qsb.imag)))
    if imag_peak > _IMAG_DIAG_TOL:
        warnings.warn(
            f"first-tier interaction expectations have imaginary residue "
            f"{imag_peak:.2e}; treat the entropy-production series with care",
            stacklevel=2,
        )
    s0 = von_neumann_entropy(traj.states[0])
    e0 = float(np.real(np.trace(traj.states[0] @ h_sys)))
    qsb0 = traj.qsb[0].real
    out = np.empty(traj.times.size)
    for i, rho in enumerate(traj.states):
        ds = von_neumann_entropy(rho) - s0
        q_sys = float(np.real(np.trace(rho @ h_sys))) - e0
        q_int = float(np.sum(traj.qsb[i].real - qsb0))
        out[i] = ds - beta * (q_sys + q_int)
    return out


def _pauli_expectations(rho):
    rho = np.asarray(rho)
    sz1sy2 = pauli("z", 1) @ pauli("y", 2)
    sx1sy2 = pauli("x", 1) @ pauli("y", 2)
    sy1sx2 = pauli("y", 1) @ pauli("x", 2)
    sy1 = pauli("y", 1)
    expect = lambda op: float(np.real(np.trace(op @ rho)))
    return {
        "sz1sy2": expect(sz1sy2),
        "cross": expect(sx1sy2) - expect(sy1sx2),
        "sy1": expect(sy1),
    }


def _local_hamiltonians(cfg):
    h1 = 0.5 * cfg.eps1 * pauli("z", 1) + 0.5 * cfg.delta1 * pauli("x", 1)
    h2 = 0.5 * cfg.eps2 * pauli("z", 2) + 0.5 * cfg.delta2 * pauli("x", 2)
    h12 = cfg.coupling_j * (
        pauli("x", 1) @ pauli("x", 2) + pauli("y", 1) @ pauli("y", 2)
    )
    return h1, h2, h12


def heat_current_j21(rho, cfg):
    """Steady-state heat current from qubit 2 into qubit 1.

    Pauli-string form
        D1*J*<sz1 sy2> - e1*J*(<sx1 sy2> - <sy1 sx2>),
    checked against the generic commutator form i Tr([H12, H1] rho); a
    disagreement signals a Pauli-algebra bug, not bad input.
    """
    rho = np.asarray(rho)
    ex = _pauli_expectations(rho)
    value = cfg.delta1 * cfg.coupling_j * ex["sz1sy2"] - cfg.eps1 * cfg.coupling_j * ex["cross"]
    h1, _h2, h12 = _local_hamiltonians(cfg)
    generic = float(np.real(1j * np.trace(commutator(h12, h1) @ rho)))
    if abs(value - generic) > _SELF_CHECK_TOL * max(1.0, abs(value), abs(generic)):
        raise AssertionError(
            f"heat-current forms disagree: string {value!r} vs commutator {generic!r}"
        )
    return value


def spin_current_j12(rho, cfg):
    """Steady-state spin current out of qubit 1 toward qubit 2.

    Pauli-string form
        -D1*<sy1> + 2J*(<sx1 sy2> - <sy1 sx2>),
    checked against -i Tr([H12, sz1] rho) plus the tunneling part
    -i Tr([H1, sz1] rho).
    """
    rho = np.asarray(rho)
    ex = _pauli_expectations(rho)
    value = -cfg.delta1 * ex["sy1"] + 2.0 * cfg.coupling_j * ex["cross"]
    h1, _h2, h12 = _local_hamiltonians(cfg)
    sz1 = pauli("z", 1)
    generic = float(
        np.real(-1j * np.trace(commutator(h12, sz1) @ rho))
        + np.real(-1j * np.trace(commutator(h1, sz1) @ rho))
    )
    if abs(value - generic) > _SELF_CHECK_TOL * max(1.0, abs(value), abs(generic)):
        raise AssertionError(
            f"spin-current forms disagree: string {value!r} vs commutator {generic!r}"
        )
    return value


def bath_side_current(hier, state, bath, h_sys, cfg=None, part="interface"):
    """Energy flux from one bath into the system, from first-tier data.

    ``part="interface"`` uses the full system Hamiltonian,
        -i sum_k Tr([H_S, Q_i] rho_1^(i,k)),
    whose two-bath sum is exactly d<H_S>/dt and therefore vanishes in a
    steady state (the node-balance check).  ``part="local"`` replaces H_S
    by the bath's own qubit Hamiltonian, which isolates the flux entering
    that qubit; in a steady state it balances the inter-qubit heat current.
    """
    if hier.depth < 1:
        raise ValueError("bath-side currents need hierarchy depth >= 1")
    if part == "interface":
        ham = np.asarray(h_sys)
    elif part == "local":
        if cfg is None:
            raise ValueError("part='local' needs the model config")
        h1, h2, _h12 = _local_hamiltonians(cfg)
        ham = h1 if bath == 0 else h2
    else:
        raise ValueError(f"unknown part {part!r}")
    q_op = np.diag(hier.coupling_diag[bath]).astype(complex)
    comm = commutator(ham, q_op)
    total = 0.0j
    for pos in hier.first_tier_positions(bath):
        total += -1j * np.trace(comm @ state[pos])
    return float(total.real)


@dataclass
class NessReport:
    """Everything the steady-state command emits for one solve."""

    rho: np.ndarray
    coherence: float
    heat_current: float
    spin_current: float
    bath_current_1: float
    bath_current_2: float
    bath_current_local_1: float
    bath_current_local_2: float
    residual: float
    meta: dict = field(default_factory=dict)

    @property
    def converged(self):
        return self.residual <= 1e-8


def build_ness_report(hier, state, residual, cfg, h_sys):
    """Evaluate the full steady-state observable set on a solved hierarchy state."""
    rho = hermitize(state[0])
    report = NessReport(
        rho=rho,
        coherence=l1_coherence(rho),
        heat_current=heat_current_j21(rho, cfg),
        spin_current=spin_current_j12(rho, cfg),
        bath_current_1=bath_side_current(hier, state, 0, h_sys),
        bath_current_2=bath_side_current(hier, state, 1, h_sys),
        bath_current_local_1=bath_side_current(hier, state, 0, h_sys, cfg, part="local"),
        bath_current_local_2=bath_side_current(hier, state, 1, h_sys, cfg, part="local"),
        residual=residual,
        meta={
            "qsb1": complex(first_tier_expectation(hier, state, 0)),
            "qsb2": complex(first_tier_expectation(hier, state, 1)),
        },
    )
    return report
