import numpy as np
import pytest

from spinboson2q.bath import (
    BathSpec,
    QuadratureError,
    correlation_expansion,
    correlation_oracle,
    default_check_grid,
    matsubara_rates_residues,
    pade_rates_residues,
    reconstruction_error,
    reconstruction_error_fast,
    spectral_density,
)

# couplings and temperatures of the four dynamics regimes plus the
# cross-validation point; cutoffs per bath
REGIME_BATHS = [
    BathSpec(0.05 / np.pi, 0.1, 1.04),
    BathSpec(0.05 / np.pi, 0.16, 1.39),
    BathSpec(2.5 / np.pi, 0.1, 1.04),
    BathSpec(2.5 / np.pi, 0.16, 1.39),
    BathSpec(0.2 / np.pi, 0.05, 1.04),
]


class TestSpectralDensity:
    def test_zero_at_origin(self):
        assert spectral_density(BathSpec(1.0, 0.5, 1.0), 0.0) == 0.0

    def test_peak_value(self):
        for alpha, wc in [(1.0, 0.5), (0.3, 2.0)]:
            spec = BathSpec(alpha, wc, 1.0)
            assert np.isclose(spectral_density(spec, wc), alpha / 2)

    def test_direct_arithmetic(self):
        spec = BathSpec(1.0, 0.1, 1.0)
        assert np.isclose(spectral_density(spec, 0.2), 0.4)

    def test_odd_symmetry(self):
        spec = BathSpec(0.7, 0.3, 1.0)
        w = np.linspace(-5, 5, 101)
        assert np.allclose(spectral_density(spec, -w), -spectral_density(spec, w))


class TestCorrelationOracle:
    def test_short_time_imaginary_part_matches_drude_residue(self):
        spec = BathSpec(0.2 / np.pi, 0.1, 1.04)
        t = 1e-3 / spec.cutoff
        val = correlation_oracle(spec, t)
        assert np.isclose(val.imag, -0.5 * spec.coupling * spec.cutoff, rtol=2e-2)

    def test_decay_at_late_times(self):
        spec = BathSpec(0.05 / np.pi, 0.1, 1.04)
        early = abs(correlation_oracle(spec, 0.05 / spec.cutoff))
        late = abs(correlation_oracle(spec, 10.0 / spec.cutoff))
        assert late < 1e-3 * early

    def test_classical_scaling_with_temperature(self):
        spec_cold = BathSpec(0.1, 0.2, 50.0)
        spec_hot = BathSpec(0.1, 0.2, 100.0)
        t = 0.05 / spec_cold.cutoff
        ratio = correlation_oracle(spec_hot, t).real / correlation_oracle(spec_cold, t).real
        assert np.isclose(ratio, 2.0, rtol=2e-2)

    def test_rejects_t_zero(self):
        with pytest.raises(QuadratureError):
            correlation_oracle(BathSpec(0.1, 0.1, 1.0), 0.0)


class TestExpansion:
    def test_drude_rate_is_cutoff(self):
        spec = BathSpec(0.3, 0.17, 1.1)
        exp = correlation_expansion(spec, 3, "pade")
        assert np.isclose(exp.rates[0].real, spec.cutoff)
        err = reconstruction_error(exp)
        assert err < 1e-4

    def test_matsubara_rates(self):
        spec = BathSpec(0.3, 0.17, 1.1)
        exp = correlation_expansion(spec, 5, "matsubara")
        k = np.arange(1, 6)
        assert np.allclose(exp.rates[1:].real, 2 * np.pi * k / spec.beta)

    def test_matsubara_20_reconstructs(self):
        spec = BathSpec(0.05 / np.pi, 0.1, 1.04)
        exp = correlation_expansion(spec, 20, "matsubara")
        assert reconstruction_error(exp) <= 1e-4

    @pytest.mark.parametrize("spec", REGIME_BATHS, ids=lambda s: f"a{s.coupling:.3f}-wc{s.cutoff}-T{s.temperature}")
    def test_pade_4_reconstructs_at_regime_temperatures(self, spec):
        exp = correlation_expansion(spec, 4, "pade")
        assert reconstruction_error(exp) <= 1e-4

    def test_positive_rates(self):
        for scheme in ("pade", "matsubara"):
            exp = correlation_expansion(BathSpec(0.4, 0.2, 0.9), 4, scheme)
            assert np.all(exp.rates.real > 0)

    def test_unconverged_warning(self):
        spec = BathSpec(0.1, 2.0, 0.5)  # beta*cutoff = 4, bare Drude term is poor
        with pytest.warns(UserWarning, match="unconverged"):
            correlation_expansion(spec, 0, "matsubara")

    def test_detailed_balance_of_reconstruction(self):
        # C(-t) = C(t)* holds for the exact function; the reconstruction at
        # +t must therefore match the conjugate quadrature within tolerance
        spec = BathSpec(0.2 / np.pi, 0.1, 1.04)
        exp = correlation_expansion(spec, 4, "pade")
        times = default_check_grid(spec)[::20]
        for t in times:
            rec = exp.reconstruct([t])[0]
            ref = correlation_oracle(spec, t)
            assert abs(np.conj(rec) - np.conj(ref)) < 1e-4 * abs(ref) + 1e-12

    def test_unknown_scheme(self):
        with pytest.raises(ValueError):
            correlation_expansion(BathSpec(0.1, 0.1, 1.0), 2, "chebyshev")


class TestPadeVersusMatsubara:
    def test_pade_never_worse_on_short_time_grid(self):
        # the comparison grid must reach small times, where the quality of
        # the Bose-function approximation actually differs; on far-time
        # grids both schemes are converged to noise
        for spec in REGIME_BATHS[:4]:
            times = np.geomspace(spec.beta / 50.0, 10.0 / spec.cutoff, 200)
            for k in (1, 2, 3, 4):
                pade = correlation_expansion(spec, k, "pade")
                mats = correlation_expansion(spec, k, "matsubara")
                err_p = reconstruction_error_fast(pade, times)
                err_m = reconstruction_error_fast(mats, times)
                assert err_p <= err_m * (1 + 1e-9), (spec, k, err_p, err_m)

    def test_pade_low_poles_approach_matsubara(self):
        xi, eta = pade_rates_residues(8)
        mats_xi, _ = matsubara_rates_residues(3)
        assert np.allclose(xi[:3], mats_xi, rtol=1e-4)
        assert np.allclose(eta[:3], 1.0, atol=1e-3)


class TestFastReconstruction:
    def test_fast_matches_quadrature_based_error(self):
        spec = BathSpec(0.2 / np.pi, 0.1, 1.2)
        exp = correlation_expansion(spec, 2, "pade")
        times = default_check_grid(spec)[::10]
        slow = reconstruction_error(exp, times)
        fast = reconstruction_error_fast(exp, times)
        assert np.isclose(slow, fast, rtol=1e-3, atol=1e-9)


class TestBathSpecValidation:
    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(coupling=-0.1, cutoff=0.1, temperature=1.0),
            dict(coupling=0.1, cutoff=0.0, temperature=1.0),
            dict(coupling=0.1, cutoff=0.1, temperature=0.0),
        ],
    )
    def test_rejects_bad_parameters(self, kwargs):
        with pytest.raises(ValueError):
            BathSpec(**kwargs)
