import json

import numpy as np
import pytest

from spop.esd import (
    alpha_from_decay,
    compute_esd,
    fit_power_law,
    report_to_dict,
    reports_to_jsonl,
    spectral_report,
)
from spop.specfun import power_transform


def synthetic_spectrum(n, s):
    """Eigenvalues k^(-2s), the ESD of sigma_k = k^(-s)."""
    return np.arange(1, n + 1, dtype=float) ** (-2.0 * s)


class TestComputeEsd:
    def test_orthogonal_all_ones(self):
        q, _ = np.linalg.qr(np.random.default_rng(1).standard_normal((8, 8)))
        np.testing.assert_allclose(compute_esd(q), np.ones(8), atol=1e-12)

    def test_diagonal(self):
        np.testing.assert_allclose(compute_esd(np.diag([3.0, 2.0])), [9.0, 4.0])

    def test_matches_squared_singular_values(self):
        rng = np.random.default_rng(3)
        w = rng.standard_normal((100, 50))
        esd = compute_esd(w)
        ref = np.linalg.svd(w, compute_uv=False) ** 2
        np.testing.assert_allclose(esd, ref, rtol=1e-9)

    def test_transpose_invariant_nonzero_spectrum(self):
        rng = np.random.default_rng(5)
        w = rng.standard_normal((20, 9))
        np.testing.assert_allclose(compute_esd(w), compute_esd(w.T), rtol=1e-9)

    def test_length_is_min_dim(self):
        assert compute_esd(np.ones((30, 7))).shape == (7,)


class TestAlphaFromDecay:
    def test_reference_points(self):
        assert alpha_from_decay(0.5) == pytest.approx(2.0)
        assert alpha_from_decay(0.25) == pytest.approx(3.0)

    def test_monotone_limit(self):
        assert alpha_from_decay(100.0) == pytest.approx(1.005)
        assert alpha_from_decay(10.0) > alpha_from_decay(100.0)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            alpha_from_decay(0.0)


class TestFitPowerLaw:
    @pytest.mark.parametrize("s", [0.25, 0.5, 1.0])
    def test_synthetic_decay_matches_analytic_exponent(self, s):
        fit = fit_power_law(synthetic_spectrum(2000, s))
        want = alpha_from_decay(s)
        assert abs(fit.alpha - want) / want < 0.10

    def test_pareto_sample(self):
        rng = np.random.default_rng(123)
        u = rng.uniform(size=100_000)
        sample = u ** (-1.0 / 2.0)  # survival x^-2, density exponent 3
        fit = fit_power_law(sample)
        assert 2.9 <= fit.alpha <= 3.1
        assert fit.n_tail >= 10

    def test_uniform_spectrum_flagged_not_heavy(self):
        rng = np.random.default_rng(7)
        uni = rng.uniform(1.0, 2.0, size=2000)
        try:
            fit = fit_power_law(uni)
        except ValueError:
            return  # rejection is acceptable for a tail-free spectrum
        assert fit.alpha > 10.0
        assert 0.0 <= fit.ks_stat <= 1.0

    def test_scale_equivariance(self):
        lam = synthetic_spectrum(1000, 0.5)
        f1 = fit_power_law(lam)
        f2 = fit_power_law(7.5 * lam)
        assert f2.alpha == pytest.approx(f1.alpha, rel=1e-9)
        assert f2.xmin == pytest.approx(7.5 * f1.xmin, rel=1e-9)

    def test_rejects_small_spectra(self):
        with pytest.raises(ValueError, match="at least 50"):
            fit_power_law(np.arange(1.0, 40.0))

    def test_rejects_degenerate(self):
        with pytest.raises(ValueError, match="degenerate spectrum"):
            fit_power_law(np.ones(100))

    def test_ignores_zero_eigenvalues(self):
        lam = np.concatenate([synthetic_spectrum(500, 0.5), np.zeros(100)])
        fit = fit_power_law(lam)
        assert abs(fit.alpha - 2.0) < 0.2

    def test_invariants(self):
        fit = fit_power_law(synthetic_spectrum(300, 0.5))
        assert fit.alpha > 1.0
        assert fit.xmin > 0.0
        assert fit.n_tail >= 10
        assert 0.0 <= fit.ks_stat <= 1.0


class TestHeavyTailOrdering:
    def test_power_transform_ordering_and_analytic_agreement(self):
        # spectrum sigma_k = k^(-s): raising it to power p rescales the
        # decay to s*p, so the fitted exponent grows as p shrinks
        s = 0.5
        n = 1000
        m = np.diag(np.arange(1, n + 1, dtype=float) ** (-s))
        alphas = {}
        for p in (0.5, 0.25, 0.125):
            fit = fit_power_law(compute_esd(power_transform(m, p)))
            want = alpha_from_decay(s * p)
            assert abs(fit.alpha - want) / want < 0.15
            alphas[p] = fit.alpha
        assert alphas[0.5] < alphas[0.25] < alphas[0.125]


class TestSpectralReport:
    def test_identical_layers_identical_reports(self):
        rng = np.random.default_rng(11)
        w = rng.standard_normal((80, 60))
        reports, mean_alpha = spectral_report([("a", w), ("b", w)])
        assert reports[0].alpha == reports[1].alpha
        assert mean_alpha == pytest.approx(reports[0].alpha.alpha)

    def test_synthetic_layer_matches_analytic_alpha(self):
        s = 0.5
        w = np.diag(np.arange(1, 501, dtype=float) ** (-s))
        reports, mean_alpha = spectral_report([("pl", w)])
        want = alpha_from_decay(s)
        assert abs(reports[0].alpha.alpha - want) / want < 0.10
        assert mean_alpha == pytest.approx(reports[0].alpha.alpha)

    def test_norm_ordering(self):
        rng = np.random.default_rng(13)
        layers = [(f"l{k}", rng.standard_normal((60, 60))) for k in range(3)]
        reports, _ = spectral_report(layers)
        for r in reports:
            assert r.spectral_norm <= r.frobenius_norm <= r.nuclear_norm
            assert r.spectral_norm**2 == pytest.approx(r.esd[0], rel=1e-9)

    def test_fit_failure_recorded_not_fatal(self):
        rng = np.random.default_rng(17)
        layers = [("tiny", rng.standard_normal((1, 64))), ("ok", rng.standard_normal((80, 60)))]
        reports, mean_alpha = spectral_report(layers)
        assert reports[0].alpha is None
        assert reports[0].fit_error is not None
        assert reports[1].alpha is not None
        assert mean_alpha == pytest.approx(reports[1].alpha.alpha)


class TestJsonl:
    def test_field_names_and_truncation(self):
        rng = np.random.default_rng(19)
        reports, _ = spectral_report([("w", rng.standard_normal((70, 64)))])
        d = report_to_dict(reports[0], esd_top=16)
        assert set(d) == {
            "layer_name", "alpha", "spectral_norm", "frobenius_norm",
            "nuclear_norm", "esd", "fit_error",
        }
        assert len(d["esd"]) == 16
        line = reports_to_jsonl(reports).splitlines()[0]
        assert json.loads(line)["layer_name"] == "w"
