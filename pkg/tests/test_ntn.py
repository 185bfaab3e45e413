import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from u2ntn.errors import ConfigError, DomainError, UnsupportedModelError
from u2ntn.ntn import (
    REFERENCE_ANGLES,
    AbovegroundChannel,
    EnvTables,
    Environment,
    LossMode,
    PLATFORM_DEFAULTS,
    Platform,
    PlatformKind,
    elevation_from_ground_offset,
    elevation_from_slant,
    free_space_loss_db,
    g2u_path_loss_db,
    g2u_shadow_sigma_db,
    g2x_path_loss_db,
    reference_angle,
    slant_distance,
)

TABLES = EnvTables.load()


def single_row_tables(p_los, clutter, sigma_los=4.0, sigma_nlos=8.0):
    text = "environment,elevation_deg,p_los,sigma_los_db,sigma_nlos_db,clutter_nlos_db\n" + "".join(
        f"rural,{a},{p_los},{sigma_los},{sigma_nlos},{clutter}\n" for a in REFERENCE_ANGLES
    )
    return EnvTables.from_text(text)


class TestGeometry:
    def test_zenith_is_altitude(self):
        assert slant_distance(550e3, 90.0) == 550e3

    def test_leo_rim(self):
        assert slant_distance(550e3, 10.0) / 1e3 == pytest.approx(1815.1, abs=0.1)

    def test_hap_rim(self):
        assert slant_distance(20e3, 10.0) / 1e3 == pytest.approx(109.9, abs=0.1)

    def test_below_minimum_elevation(self):
        with pytest.raises(DomainError):
            slant_distance(550e3, 5.0)

    def test_ground_offset_nadir(self):
        assert elevation_from_ground_offset(100.0, 0.0) == 90.0

    def test_ground_offset_uav_isosceles(self):
        assert elevation_from_ground_offset(100.0, 100.0) == pytest.approx(45.0)

    def test_inverse_of_slant(self):
        assert elevation_from_slant(550e3, 1815.1e3) == pytest.approx(10.0, abs=0.01)

    def test_reference_angle_nearest(self):
        assert reference_angle(14.9) == 10
        assert reference_angle(15.1) == 20
        assert reference_angle(90.0) == 90


class TestGroundToUav:
    def test_rural_sigma(self):
        assert g2u_shadow_sigma_db("rural", 100.0) == pytest.approx(2.651, abs=1e-3)

    def test_urban_slope(self):
        d1 = g2u_path_loss_db("urban", 100.0, 200.0, 433e6)
        d2 = g2u_path_loss_db("urban", 100.0, 400.0, 433e6)
        assert d2 - d1 == pytest.approx(22 * math.log10(2), abs=1e-9)
        assert 22 * math.log10(2) == pytest.approx(6.623, abs=1e-3)

    def test_rural_slope_at_100m(self):
        d1 = g2u_path_loss_db("rural", 100.0, 200.0, 433e6)
        d2 = g2u_path_loss_db("rural", 100.0, 2000.0, 433e6)
        assert d2 - d1 == pytest.approx(23.9 - 1.8 * 2, abs=1e-9)

    def test_shadow_draw_scales_with_sigma(self):
        base = g2u_path_loss_db("rural", 100.0, 150.0, 433e6)
        assert g2u_path_loss_db("rural", 100.0, 150.0, 433e6, 1.0) - base == pytest.approx(
            g2u_shadow_sigma_db("rural", 100.0)
        )

    def test_dense_urban_unsupported(self):
        with pytest.raises(UnsupportedModelError):
            g2u_shadow_sigma_db("dense_urban", 100.0)

    def test_uav_below_100m_rejected(self):
        with pytest.raises(ConfigError):
            Platform(PlatformKind.UAV, 50.0, 2.0)


class TestGroundToSatellite:
    def test_free_space_anchor(self):
        assert free_space_loss_db(433e6, 550e3) == pytest.approx(139.98, abs=0.01)

    def test_full_los_is_free_space(self):
        t = single_row_tables(1.0, 25.0)
        assert g2x_path_loss_db("rural", t, 45.0, 600e3, 433e6) == pytest.approx(free_space_loss_db(433e6, 600e3))

    def test_pure_nlos_adds_clutter(self):
        t = single_row_tables(0.0, 30.0)
        assert g2x_path_loss_db("rural", t, 45.0, 600e3, 433e6) == pytest.approx(
            free_space_loss_db(433e6, 600e3) + 30.0
        )

    def test_sampled_mode_requires_draw(self):
        with pytest.raises(ValueError):
            g2x_path_loss_db("rural", TABLES, 45.0, 600e3, 433e6, LossMode.SAMPLED)

    def test_tables_have_every_cell(self):
        for env in Environment:
            for a in REFERENCE_ANGLES:
                row = TABLES.lookup(env, a)
                assert 0 <= row.p_los <= 1

    def test_p_los_nondecreasing(self):
        for env in Environment:
            p = [TABLES.lookup(env, a).p_los for a in REFERENCE_ANGLES]
            assert p == sorted(p)

    def test_rejects_decreasing_p_los(self):
        text = ("environment,elevation_deg,p_los,sigma_los_db,sigma_nlos_db,clutter_nlos_db\n"
                "rural,10,0.9,1,1,1\nrural,20,0.5,1,1,1\n")
        with pytest.raises(ConfigError):
            EnvTables.from_text(text)

    def test_table_version_recorded(self):
        assert TABLES.version == "1"


class TestChannel:
    def test_expected_mode_mean_matches_sampled_mean(self):
        ch_e = AbovegroundChannel(PLATFORM_DEFAULTS[PlatformKind.LEO], "urban", 433e6, mode="expected-db",
                                  shadowing=False)
        ch_s = AbovegroundChannel(PLATFORM_DEFAULTS[PlatformKind.LEO], "urban", 433e6, mode="sampled",
                                  shadowing=False)
        d = np.full(100_000, 900e3)
        e = elevation_from_slant(550e3, 900e3)
        rng = np.random.default_rng(3)
        assert ch_s.sample(d, e, rng).mean() == pytest.approx(ch_e.sample(d[:1], e, rng)[0], abs=0.1)

    def test_uav_channel_without_shadowing_is_deterministic(self):
        ch = AbovegroundChannel(PLATFORM_DEFAULTS[PlatformKind.UAV], "rural", 433e6, shadowing=False)
        a = ch.sample(np.array([150.0]), 40.0, np.random.default_rng(1))
        b = ch.sample(np.array([150.0]), 40.0, np.random.default_rng(2))
        assert a[0] == b[0]


# --- properties ------------------------------------------------------------------


@settings(max_examples=100, deadline=None)
@given(st.floats(100.0, 2e6))
def test_zenith_exact_for_any_altitude(h):
    assert slant_distance(h, 90.0) == h


@settings(max_examples=100, deadline=None)
@given(st.floats(100.0, 2e6), st.floats(10.0, 89.0), st.floats(0.01, 1.0))
def test_slant_strictly_decreasing_in_elevation(h, e, step):
    assert slant_distance(h, e + step) < slant_distance(h, e)


@settings(max_examples=100, deadline=None)
@given(st.floats(1.0, 1e7), st.floats(1.001, 10.0))
def test_free_space_loss_increasing(d, factor):
    assert free_space_loss_db(433e6, d * factor) > free_space_loss_db(433e6, d)


@settings(max_examples=50, deadline=None)
@given(st.floats(100.0, 2e6), st.floats(10.0, 90.0))
def test_slant_elevation_round_trip(h, e):
    assert elevation_from_slant(h, slant_distance(h, e)) == pytest.approx(e, abs=1e-6)


def test_environment_ordering_where_clutter_is_ordered():
    checked = 0
    for a in REFERENCE_ANGLES:
        rows = [TABLES.lookup(env, a) for env in (Environment.RURAL, Environment.URBAN, Environment.DENSE_URBAN)]
        mean_extra = [(1 - r.p_los) * r.clutter_nlos_db for r in rows]
        if not (mean_extra[0] <= mean_extra[1] <= mean_extra[2]):
            continue
        d = slant_distance(550e3, float(a))
        loss = [g2x_path_loss_db(env, TABLES, float(a), d, 433e6)
                for env in (Environment.RURAL, Environment.URBAN, Environment.DENSE_URBAN)]
        assert loss[0] <= loss[1] <= loss[2]
        checked += 1
    assert checked >= 5
