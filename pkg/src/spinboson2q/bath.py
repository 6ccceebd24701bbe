"""Spectral densities and exponential decompositions of bath correlations.

Everything here feeds the hierarchy coefficients on one side and the
reaction-coordinate extraction on the other.  Units: hbar = k_B = 1, so
couplings, cutoffs and temperatures share one energy unit and time is its
inverse.

The correlation function of a bath with spectral density J at inverse
temperature beta is

    C(t) = (1/pi) * int_0^inf J(w) [coth(beta w / 2) cos(w t) - i sin(w t)] dw

and for the overdamped (Drude-Lorentz) density used here it decomposes into
a Drude pole plus Matsubara or Pade terms for the Bose function,

    C(t) ~= sum_k c_k exp(-nu_k t),   Re(nu_k) > 0.

Note the exact C(t) of an overdamped bath diverges logarithmically as
t -> 0+ (ultraviolet tail of the real part); the expansion is a faithful
representation for t > 0 away from that cusp, which is where all grids in
this package sample it.
"""

import warnings
from dataclasses import dataclass, field

import mpmath as mp
import numpy as np
from scipy.integrate import quad

#: Pade residues solve a moment-matching system; 60 digits keeps K <= 12 exact.
_MP_DPS = 60


class QuadratureError(RuntimeError):
    """Raised when the correlation quadrature fails to converge."""


@dataclass(frozen=True)
class BathSpec:
    """One bosonic bath: dimensionless coupling, cutoff and temperature."""

    coupling: float
    cutoff: float
    temperature: float

    def __post_init__(self):
        if self.coupling < 0:
            raise ValueError(f"bath coupling must be >= 0, got {self.coupling}")
        if self.cutoff <= 0:
            raise ValueError(f"bath cutoff must be > 0, got {self.cutoff}")
        if self.temperature <= 0:
            raise ValueError(f"bath temperature must be > 0, got {self.temperature}")

    @property
    def beta(self):
        return 1.0 / self.temperature


@dataclass(frozen=True)
class BathExpansion:
    """Exponential decomposition C(t) ~= sum_k c_k exp(-nu_k t).

    The first term is always the Drude pole (rate = cutoff); the remaining
    ``n_terms`` come from the chosen expansion of the Bose function.
    """

    coefficients: np.ndarray
    rates: np.ndarray
    scheme: str
    n_terms: int
    spec: BathSpec = field(repr=False)

    def __post_init__(self):
        if np.any(np.real(self.rates) <= 0):
            raise ValueError("all expansion rates must have positive real part")

    def reconstruct(self, times):
        """Evaluate sum_k c_k exp(-nu_k t) on an array of times."""
        t = np.atleast_1d(np.asarray(times, dtype=float))
        return np.sum(
            self.coefficients[:, None] * np.exp(-np.outer(self.rates, t)), axis=0
        )


def spectral_density(spec, omega):
    """Overdamped (Drude-Lorentz) spectral density, odd in omega."""
    omega = np.asarray(omega, dtype=float)
    return spec.coupling * omega * spec.cutoff / (omega**2 + spec.cutoff**2)


def correlation_oracle(spec, t, rel_tol=1e-8):
    """Brute-force quadrature of the bath correlation function at t > 0.

    Independent of the exponential decomposition; used as the oracle the
    expansions are checked against.  The real part is a Fourier cosine
    integral with a 1/w tail, handled by the oscillatory-weight quadrature.
    """
    if t < 0:
        raise ValueError("correlation_oracle requires t >= 0")
    if t == 0:
        raise QuadratureError(
            "Re C(t) of an overdamped bath diverges logarithmically at t = 0; "
            "evaluate at t > 0"
        )
    alpha, wc, beta = spec.coupling, spec.cutoff, spec.beta

    def noise_kernel(w):
        if w < 1e-12:
            return 2.0 * alpha / (np.pi * beta * wc)
        return alpha * wc * w / ((w * w + wc * wc) * np.tanh(0.5 * beta * w) * np.pi)

    def friction_kernel(w):
        return alpha * wc * w / ((w * w + wc * wc) * np.pi)

    scale = alpha / beta + alpha * wc
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        re, ere = quad(
            noise_kernel, 0, np.inf, weight="cos", wvar=t,
            limit=400, limlst=400, epsabs=rel_tol * scale * 1e-2,
        )
        im, eim = quad(
            friction_kernel, 0, np.inf, weight="sin", wvar=t,
            limit=400, limlst=400, epsabs=rel_tol * scale * 1e-2,
        )
    err = ere + eim
    if not np.isfinite(re + im) or err > rel_tol * max(abs(re) + abs(im), scale):
        raise QuadratureError(
            f"correlation quadrature did not converge at t={t}: "
            f"value={re}{-im:+}j, error estimate={err:.3e}"
        )
    return re - 1j * im


def matsubara_rates_residues(n_terms):
    """Poles (in x = beta*omega) and unit residues of the plain Bose expansion."""
    k = np.arange(1, n_terms + 1, dtype=float)
    return 2.0 * np.pi * k, np.ones(n_terms)


def pade_rates_residues(n_terms):
    """[N-1/N] Pade decomposition of the Bose function.

    Returns poles xi_j and residues eta_j such that

        1/(e^x - 1) ~= 1/x - 1/2 + sum_j 2 eta_j x / (x^2 + xi_j^2).

    Poles come from the eigenvalues of the standard symmetric tridiagonal
    matrix; residues from matching the first N moments (even zeta values)
    in high precision.  Low poles approach the Matsubara values 2*pi*k.
    """
    if n_terms == 0:
        return np.zeros(0), np.zeros(0)
    diag = np.array(
        [1.0 / np.sqrt((2 * k + 5.0) * (2 * k + 3.0)) for k in range(2 * n_terms - 1)]
    )
    m = np.diag(diag, 1)
    m += m.T
    evals = np.linalg.eigvalsh(m)
    xi = np.sort(2.0 / evals[evals > 0])

    with mp.workdps(_MP_DPS):
        a = mp.matrix(n_terms, n_terms)
        b = mp.matrix(n_terms, 1)
        for mo in range(n_terms):
            for j in range(n_terms):
                a[mo, j] = mp.mpf(1) / mp.mpf(xi[j]) ** (2 * mo + 2)
            b[mo] = mp.zeta(2 * mo + 2) / (2 * mp.pi) ** (2 * mo + 2)
        eta = mp.lu_solve(a, b)
    return xi, np.array([float(e) for e in eta])


def correlation_expansion(spec, n_terms=4, scheme="pade"):
    """Drude pole plus ``n_terms`` Bose-expansion exponentials.

    ``scheme`` is ``"pade"`` (default, the production choice) or
    ``"matsubara"`` (slower decay in ``n_terms``, kept for cross-checks).
    """
    if scheme not in ("pade", "matsubara"):
        raise ValueError(f"unknown expansion scheme {scheme!r}")
    if n_terms < 0:
        raise ValueError("n_terms must be >= 0")
    alpha, wc, beta = spec.coupling, spec.cutoff, spec.beta

    if n_terms == 0 and beta * wc > 0.5:
        warnings.warn(
            f"n_terms=0 with beta*cutoff={beta * wc:.3g}: the bare Drude term is "
            "likely an unconverged representation of this bath",
            stacklevel=2,
        )

    coeffs = [0.5 * alpha * wc * (1.0 / np.tan(0.5 * beta * wc) - 1.0j)]
    rates = [wc]
    if scheme == "matsubara":
        xi, eta = matsubara_rates_residues(n_terms)
    else:
        xi, eta = pade_rates_residues(n_terms)
    for j in range(n_terms):
        nu = xi[j] / beta
        coeffs.append(eta[j] * (2.0 * alpha * wc / beta) * nu / (nu**2 - wc**2))
        rates.append(nu)
    return BathExpansion(
        coefficients=np.asarray(coeffs, dtype=complex),
        rates=np.asarray(rates, dtype=complex),
        scheme=scheme,
        n_terms=n_terms,
        spec=spec,
    )


def default_check_grid(spec, n_points=200):
    """200 positive times spanning (0, 10/cutoff], the standard check window."""
    tmax = 10.0 / spec.cutoff
    return np.arange(1, n_points + 1) * (tmax / n_points)


def reconstruction_error(expansion, times=None, oracle=correlation_oracle):
    """max_t |reconstruction - oracle| / max_t |oracle| on a positive-time grid.

    The peak of |C| over the grid is the normalizer (the exact C(0) is
    ultraviolet-divergent for overdamped baths, so relative-to-peak is the
    honest scale).
    """
    if times is None:
        times = default_check_grid(expansion.spec)
    times = np.asarray(times, dtype=float)
    ref = np.array([oracle(expansion.spec, t) for t in times])
    rec = expansion.reconstruct(times)
    return float(np.max(np.abs(rec - ref)) / np.max(np.abs(ref)))


def reconstruction_error_fast(expansion, times=None, reference_terms=1000):
    """Like :func:`reconstruction_error` but against a large-K Matsubara
    reference instead of quadrature.

    Exact to ~1e-10 for t bounded away from zero and cheap enough to run on
    every CLI invocation as the convergence warning check; the quadrature
    version stays the test oracle.
    """
    if times is None:
        times = default_check_grid(expansion.spec)
    times = np.asarray(times, dtype=float)
    ref_exp = correlation_expansion(expansion.spec, reference_terms, "matsubara")
    ref = ref_exp.reconstruct(times)
    rec = expansion.reconstruct(times)
    return float(np.max(np.abs(rec - ref)) / np.max(np.abs(ref)))


def validate_expansion(expansion, tol=1e-4, stacklevel=2):
    """Surface a warning when the reconstruction error exceeds ``tol``."""
    err = reconstruction_error_fast(expansion)
    if err > tol:
        warnings.warn(
            f"bath expansion ({expansion.scheme}, n_terms={expansion.n_terms}) "
            f"reconstructs its correlation function to {err:.2e} > {tol:g}; "
            "increase n_terms",
            stacklevel=stacklevel,
        )
    return err
