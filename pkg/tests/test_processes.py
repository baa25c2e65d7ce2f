"""Tests for the scenario generators, contamination and sample files."""

import math

import numpy as np
import pytest
from scipy import special

from deconvhazard import (
    AR1,
    ConfigurationError,
    InputDataError,
    LogNormalMA,
    NoiseSpec,
    TruncatedMAInf,
    WeibullIID,
    contaminate,
    generate_latent,
    latent_sigma,
    read_sample,
    write_sample,
)


def test_spec_validation():
    with pytest.raises(ConfigurationError):
        AR1(1.2)
    with pytest.raises(ConfigurationError):
        AR1(0.0)
    with pytest.raises(ConfigurationError):
        TruncatedMAInf(1.4)
    with pytest.raises(ConfigurationError):
        WeibullIID(-1.0, 1.0)
    with pytest.raises(ConfigurationError):
        LogNormalMA("sloppy")
    with pytest.raises(ConfigurationError):
        NoiseSpec(nsr=-0.1, sigma_x=1.0)


def test_determinism():
    for spec in (AR1(0.5), TruncatedMAInf(2.5), LogNormalMA(), WeibullIID(1.5)):
        a = generate_latent(spec, 500, seed=123)
        b = generate_latent(spec, 500, seed=123)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, generate_latent(spec, 500, seed=124))


def test_noise_stream_is_disjoint_from_latent_stream():
    spec = WeibullIID(1.0)
    latent = generate_latent(spec, 400, seed=9)
    noise = NoiseSpec(nsr=0.2, sigma_x=1.0)
    s1 = contaminate(latent, noise, seed=9)
    s2 = contaminate(latent, noise, seed=10)
    # latent draw unchanged; only the noise differs
    np.testing.assert_array_equal(generate_latent(spec, 400, seed=9), latent)
    assert not np.array_equal(s1.observations, s2.observations)
    assert np.all(s1.observations - latent != 0.0)
    assert np.all(s2.observations - latent != 0.0)


def test_zero_noise_limit_is_exact():
    latent = generate_latent(WeibullIID(1.0), 200, seed=1)
    sample = contaminate(latent, NoiseSpec(nsr=0.0, sigma_x=1.0), seed=1)
    np.testing.assert_array_equal(sample.observations, latent)


def test_weibull_exponential_mean():
    x = generate_latent(WeibullIID(1.0, 1.0), 1_000_000, seed=5)
    assert abs(x.mean() - 1.0) < 0.01


def test_lognormal_unit_variance_log():
    x = generate_latent(LogNormalMA(), 1_000_000, seed=6)
    assert abs(np.var(np.log(x), ddof=1) - 1.0) < 0.01
    y = generate_latent(LogNormalMA("paper-literal"), 1_000_000, seed=6)
    assert abs(np.var(np.log(y), ddof=1) - 0.5) < 0.01


def test_ar1_stationary_autocovariance():
    # replicate-path oracle: exact stationary covariance phi^k / (1 - phi^2)
    phi = 0.5
    spec = AR1(phi)
    paths = np.stack([generate_latent(spec, 20_000, seed=s) for s in range(50)])
    for k in (1, 2, 3):
        per_path = np.mean(
            (paths[:, :-k] - paths.mean(axis=1, keepdims=True))
            * (paths[:, k:] - paths.mean(axis=1, keepdims=True)),
            axis=1,
        )
        target = phi**k / (1.0 - phi**2)
        se = per_path.std(ddof=1) / math.sqrt(len(per_path))
        assert abs(per_path.mean() - target) < 3.0 * se + 1e-12


def test_ar1_marginal_is_stationary_from_first_draw():
    # first element alone follows the stationary marginal (no burn-in)
    first = np.array([generate_latent(AR1(0.6), 2, seed=s)[0] for s in range(4000)])
    target_var = 1.0 / (1.0 - 0.36)
    assert abs(np.var(first, ddof=1) - target_var) < 0.1


def test_ma_truncation_tail_bound():
    spec = TruncatedMAInf(2.5)
    # Hurwitz-zeta oracle for the discarded tail sum_{i > T} (i+1)^(-delta)
    tail = special.zeta(2.5, spec.truncation + 2)
    assert tail < 1e-6
    total = spec.coefficients().sum()
    assert abs(total - special.zeta(2.5, 1)) < 1e-6


def test_ma_autocovariance_positive():
    spec = TruncatedMAInf(2.0, truncation=400)
    x = generate_latent(spec, 200_000, seed=3)
    xc = x - x.mean()
    lag1 = np.mean(xc[:-1] * xc[1:])
    # oracle: sum_i alpha_i alpha_{i+1}
    a = spec.coefficients()
    assert lag1 == pytest.approx(float(np.sum(a[:-1] * a[1:])), abs=0.02)


def test_positive_association_smoke():
    # pairwise covariance positive at five Monte Carlo standard errors
    for spec, n_pairs in ((AR1(0.5), 4000), (LogNormalMA(), 10_000)):
        pairs = np.stack([generate_latent(spec, 2, seed=s)[:2] for s in range(n_pairs)])
        prod = (pairs[:, 0] - pairs[:, 0].mean()) * (pairs[:, 1] - pairs[:, 1].mean())
        cov = prod.mean()
        se = prod.std(ddof=1) / math.sqrt(n_pairs)
        assert cov > 5.0 * se


def test_contaminate_noise_to_signal_ratio():
    spec = WeibullIID(1.0)
    latent = generate_latent(spec, 1_000_000, seed=2)
    noise = NoiseSpec(nsr=0.25, sigma_x=latent_sigma(spec))
    sample = contaminate(latent, noise, seed=2)
    ratio = np.std(sample.observations - latent, ddof=1) / np.std(latent, ddof=1)
    assert abs(ratio - 0.25) < 0.01


def test_laplace_noise_characteristic_function():
    noise = NoiseSpec(nsr=0.5, sigma_x=2.0)
    b = noise.scale
    latent = np.zeros(1_000_000)
    draws = contaminate(latent, noise, seed=8).observations
    emp = np.cos(draws).mean()
    se = np.cos(draws).std(ddof=1) / math.sqrt(draws.size)
    assert abs(emp - 1.0 / (1.0 + b * b)) < 3.0 * se


def test_noise_scale_definition():
    noise = NoiseSpec(nsr=0.1, sigma_x=2.0)
    assert noise.scale == pytest.approx(0.1 * 2.0 / math.sqrt(2.0), rel=1e-15)


def test_latent_sigma_values():
    assert latent_sigma(WeibullIID(1.0, 1.0)) == pytest.approx(1.0, abs=1e-12)
    assert latent_sigma(AR1(0.5)) == pytest.approx(1.0 / math.sqrt(0.75), abs=1e-12)
    # gamma-function oracle for the Weibull(1.5, 1) marginal
    g = special.gamma
    oracle = math.sqrt(g(1 + 2 / 1.5) - g(1 + 1 / 1.5) ** 2)
    assert latent_sigma(WeibullIID(1.5, 1.0)) == pytest.approx(oracle, rel=1e-12)
    assert latent_sigma(LogNormalMA()) == pytest.approx(
        math.sqrt((math.e - 1.0) * math.e), rel=1e-12
    )


def test_sample_file_round_trip(tmp_path):
    latent = generate_latent(WeibullIID(1.5), 50, seed=4)
    sample = contaminate(latent, NoiseSpec(nsr=0.1, sigma_x=1.0), seed=4)
    path = tmp_path / "sample.txt"
    write_sample(sample, path, scenario_label="weibull shape=1.5 scale=1")
    loaded = read_sample(path)
    np.testing.assert_array_equal(loaded.observations, sample.observations)
    assert loaded.provenance["nsr"] == "0.1"


def test_sample_file_bad_line_names_line_number(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("1.0\n2.0\nnot-a-number\n", encoding="ascii")
    with pytest.raises(InputDataError, match="line 3"):
        read_sample(path)


def test_sample_file_too_short(tmp_path):
    path = tmp_path / "one.txt"
    path.write_text("1.0\n", encoding="ascii")
    with pytest.raises(InputDataError):
        read_sample(path)
