"""High-level runners tying configs to the two backends.

The CLI, the test-suite and the acceptance checks all drive the same
functions, so a config resolves to identical numbers everywhere.
"""

import numpy as np

from . import bath, heom, observables, rcm
from .config import ModelConfig
from .hierarchy import build_hierarchy
from .qops import build_system_hamiltonian, pauli


def default_grid(cfg: ModelConfig):
    n = int(round(cfg.t_max / cfg.dt))
    return np.linspace(0.0, n * cfg.dt, n + 1)


def bath_expansions(cfg: ModelConfig):
    num = cfg.numerics
    exps = tuple(
        bath.correlation_expansion(spec, num.n_exp, num.scheme)
        for spec in (cfg.bath1, cfg.bath2)
    )
    if num.validate_bath:
        for e in exps:
            if e.spec.coupling > 0:
                bath.validate_expansion(e, stacklevel=3)
    return exps


def hierarchy_for(cfg: ModelConfig, depth=None):
    exp1, exp2 = bath_expansions(cfg)
    return build_hierarchy(
        exp1, exp2,
        cfg.numerics.depth if depth is None else depth,
        max_bytes=cfg.numerics.max_bytes,
    )


def _meta(cfg: ModelConfig, **extra):
    meta = {
        "temp1": cfg.bath1.temperature,
        "temp2": cfg.bath2.temperature,
        "initial_state": cfg.initial_state,
    }
    meta.update(extra)
    return meta


def heom_dynamics(cfg: ModelConfig, t_grid=None, depth=None, rho0=None):
    """Hierarchy propagation of the configured problem."""
    if t_grid is None:
        t_grid = default_grid(cfg)
    h = hierarchy_for(cfg, depth)
    h_sys = build_system_hamiltonian(cfg)
    rho0 = cfg.initial_matrix() if rho0 is None else rho0
    traj, final = heom.propagate(
        h, h_sys, rho0, t_grid,
        rtol=cfg.numerics.rtol, atol=cfg.numerics.atol,
        scaled=cfg.numerics.scaled,
    )
    traj.meta.update(_meta(cfg, depth=h.depth, n_ados=h.n_ados))
    return traj, final, h


def rcm_dynamics(cfg: ModelConfig, t_grid=None, rho0=None):
    """Reaction-coordinate propagation of the configured problem."""
    if t_grid is None:
        t_grid = default_grid(cfg)
    h_sys = build_system_hamiltonian(cfg)
    params = rcm.build_rc_params(cfg.bath1, cfg.bath2, cfg.numerics.freq_factor)
    sys = rcm.build_supersystem(h_sys, params, cfg.numerics.fock, cfg.fock2)
    diss = rcm.build_rc_dissipator(
        sys, params, cfg.bath1.temperature, cfg.bath2.temperature
    )
    rho0 = cfg.initial_matrix() if rho0 is None else rho0
    traj = rcm.rcm_propagate(
        sys, diss, rho0,
        cfg.bath1.temperature, cfg.bath2.temperature,
        t_grid, tol=cfg.numerics.rcm_tol, method=cfg.numerics.rcm_method,
    )
    traj.meta.update(_meta(cfg, fock=sys.fock, dim=sys.dim))
    return traj, sys


def steady_report(cfg: ModelConfig, depth=None):
    """Steady-state solve plus the full observable report."""
    h = hierarchy_for(cfg, cfg.steady_depth if depth is None else depth)
    h_sys = build_system_hamiltonian(cfg)
    state, residual = heom.steady_state(
        h, h_sys,
        method=cfg.numerics.steady_method,
        max_bytes=cfg.numerics.max_bytes,
    )
    report = observables.build_ness_report(h, state, residual, cfg, h_sys)
    report.meta.update(_meta(cfg, depth=h.depth, n_ados=h.n_ados))
    return report, state, h


def closed_system_expectation(cfg: ModelConfig, t_grid, op=None, rho0=None):
    """Exact unitary <op>(t) for the bare system (the alpha = 0 reference)."""
    h_sys = build_system_hamiltonian(cfg)
    evals, vecs = np.linalg.eigh(h_sys)
    rho0 = cfg.initial_matrix() if rho0 is None else rho0
    op = pauli("z", 1) if op is None else op
    rho_e = vecs.conj().T @ rho0 @ vecs
    op_e = vecs.conj().T @ op @ vecs
    out = np.empty(len(t_grid))
    for i, t in enumerate(t_grid):
        phase = np.exp(-1j * evals * t)
        rho_t = phase[:, None] * rho_e * phase.conj()[None, :]
        out[i] = np.real(np.trace(rho_t @ op_e))
    return out


def trajectory_columns(traj, cfg: ModelConfig):
    """Named observable columns for CSV emission."""
    h_sys = build_system_hamiltonian(cfg)
    cols = {
        "t": traj.times,
        "sz1": traj.expectation(pauli("z", 1)),
        "sz2": traj.expectation(pauli("z", 2)),
        "coherence_l1": np.array([observables.l1_coherence(r) for r in traj.states]),
        "entropy": np.array([observables.von_neumann_entropy(r) for r in traj.states]),
    }
    equal_t = np.isclose(cfg.bath1.temperature, cfg.bath2.temperature)
    if traj.method == "heom" and traj.qsb is not None and equal_t:
        beta = 1.0 / cfg.bath1.temperature
        cols["entropy_production"] = observables.entropy_production(traj, beta, h_sys)
        cols["qsb1"] = traj.qsb[:, 0].real
        cols["qsb2"] = traj.qsb[:, 1].real
    if cfg.bath1.coupling == 0.0 and cfg.bath2.coupling == 0.0:
        cols["sz1_exact"] = closed_system_expectation(cfg, traj.times)
    return cols
