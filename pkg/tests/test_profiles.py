from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from caplab.profiles import (
    KelvinProfile,
    PowerSeriesProfile,
    ProfileError,
    RadialProfile,
    SampledProfile,
    csv_header_rows,
    load_profile_csv,
    write_profile_csv,
)


def _schwarzschild_profile(m: float = 2.0) -> PowerSeriesProfile:
    return PowerSeriesProfile.from_mapping({0.0: 1.0, -1.0: 0.5 * m})


@pytest.mark.smoke
def test_power_series_values_and_derivatives() -> None:
    u = _schwarzschild_profile()
    r = np.array([0.5, 1.0, 4.0])

    assert np.allclose(u.value(r), 1.0 + 1.0 / r)
    assert np.allclose(u.first(r), -1.0 / r**2)
    assert np.allclose(u.second(r), 2.0 / r**3)
    assert u.is_harmonic
    assert not u.regular_at_origin
    assert isinstance(u, RadialProfile)


def test_from_mapping_drops_zero_terms_and_sorts() -> None:
    u = PowerSeriesProfile.from_mapping({-1.0: 0.0, 2.0: 3.0, 0.0: 1.0})

    assert u.terms == ((0.0, 1.0), (2.0, 3.0))
    assert u == PowerSeriesProfile.from_mapping({0.0: 1.0, 2.0: 3.0})
    assert not u.is_harmonic


def test_power_series_keeps_scalar_shape() -> None:
    u = PowerSeriesProfile.from_mapping({0.0: 1.0})

    assert np.shape(u.value(3.0)) == ()
    assert u.first(3.0) == 0.0


def test_sampled_profile_matches_harmonic_data() -> None:
    r = np.geomspace(1.0, 100.0, 200)
    profile = SampledProfile(r=r, f=1.0 + 1.0 / r)
    radii = np.geomspace(1.05, 95.0, 37)

    assert np.allclose(profile.value(radii), 1.0 + 1.0 / radii, atol=1e-8)
    assert np.allclose(profile.first(radii), -1.0 / radii**2, atol=1e-6)
    assert np.allclose(profile.second(radii), 2.0 / radii**3, atol=1e-4)


def test_sampled_profile_continues_as_harmonic_tail() -> None:
    r = np.geomspace(1.0, 10.0, 64)
    profile = SampledProfile(r=r, f=1.0 + 2.0 / r)
    far = np.array([20.0, 1e3])

    assert np.allclose(profile.value(far), 1.0 + 2.0 / far, rtol=1e-12)
    assert np.allclose(profile.first(far), -2.0 / far**2, rtol=1e-12)
    assert profile.sample_end == pytest.approx(10.0)


def test_sampled_profile_resamples_non_uniform_input() -> None:
    r = np.concatenate([np.linspace(1.0, 2.0, 40), np.linspace(2.1, 20.0, 80)])
    profile = SampledProfile(r=r, f=1.0 + 1.0 / r)

    x = np.log(profile.r)
    assert np.allclose(np.diff(x), x[1] - x[0])
    assert profile.value(3.0) == pytest.approx(1.0 + 1.0 / 3.0, rel=1e-6)


def test_sampled_profile_rejects_bad_samples() -> None:
    with pytest.raises(ProfileError, match="at least"):
        SampledProfile(r=np.array([1.0, 2.0, 3.0]), f=np.ones(3))
    with pytest.raises(ProfileError, match="increasing"):
        SampledProfile(r=np.array([1.0, 3.0, 2.0, 4.0, 5.0, 6.0]), f=np.ones(6))


def test_sampled_profile_refuses_radii_below_domain() -> None:
    r = np.geomspace(1.0, 10.0, 32)
    profile = SampledProfile(r=r, f=np.ones_like(r))

    with pytest.raises(ProfileError, match="below sampled domain"):
        profile.value(0.5)


def test_kelvin_profile_of_schwarzschild_is_shifted_flat_potential() -> None:
    v = KelvinProfile(_schwarzschild_profile(m=2.0))
    s = np.array([0.1, 0.5, 2.0])

    # u(1/s)/s = 1/s + m/2
    assert np.allclose(v.value(s), 1.0 / s + 1.0)
    assert np.allclose(v.first(s), -1.0 / s**2)
    assert np.allclose(v.second(s), 2.0 / s**3)
    assert v.domain == (0.0, np.inf)


def test_profile_csv_with_header(tmp_path: Path) -> None:
    path = tmp_path / "u.csv"
    r = np.geomspace(0.5, 50.0, 48)
    write_profile_csv(path, r, 1.0 + 0.5 / r)

    assert path.read_text(encoding="utf-8").startswith("r,u\n")
    profile = load_profile_csv(path)
    assert profile.value(5.0) == pytest.approx(1.1, rel=1e-7)


def test_profile_csv_rejects_non_positive_factor(tmp_path: Path) -> None:
    path = tmp_path / "u.csv"
    path.write_text("1,1.0\n2,0.5\n3,0.0\n4,0.5\n5,1\n6,1\n", encoding="utf-8")

    with pytest.raises(ProfileError, match="positive"):
        load_profile_csv(path)


def test_csv_header_rows(tmp_path: Path) -> None:
    headed = tmp_path / "headed.csv"
    bare = tmp_path / "bare.csv"
    empty = tmp_path / "empty.csv"
    headed.write_text("r,u\n1,2\n", encoding="utf-8")
    bare.write_text("1,2\n3,4\n", encoding="utf-8")
    empty.write_text("", encoding="utf-8")

    assert csv_header_rows(headed) == 1
    assert csv_header_rows(bare) == 0
    assert csv_header_rows(empty) == 0


def test_missing_profile_file_is_reported(tmp_path: Path) -> None:
    with pytest.raises(ProfileError, match="Cannot read"):
        load_profile_csv(tmp_path / "missing.csv")
