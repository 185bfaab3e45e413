import itertools
import math
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from u2ntn.analytical import (
    AnalyticalInputs,
    arrivals,
    binomial_tail_at_least,
    header_success,
    packet_success,
    packet_success_binned,
    payload_success,
)
from u2ntn.errors import ConfigError
from u2ntn.radio import LrFhss


def rates(lam_h, lam_f, **kw):
    # header_count=1 and fragment_count=1 so that msg_rate * N equals lam_h
    inputs = AnalyticalInputs(n_devices=1.0, msg_rate_per_s=lam_h, header_count=1, fragment_count=2,
                              fragments_needed=1, **kw)
    assert inputs.header_rate == lam_h and inputs.fragment_rate == lam_f
    return inputs


class TestArrivals:
    def test_no_load(self):
        assert arrivals(AnalyticalInputs(0, 0.0)) == (0.0, 0.0)

    def test_worked_example(self):
        a_h, a_f = arrivals(rates(1.0, 2.0))
        assert a_h == pytest.approx(1.138688, abs=1e-9)
        assert a_f == pytest.approx(0.745472, abs=1e-9)


class TestHeader:
    def test_zero_zeta(self):
        assert header_success(AnalyticalInputs(1, 1, fragment_success=0.0), 5.0) == 0.0

    def test_exponent_zero(self):
        assert header_success(AnalyticalInputs(1, 1), 1.0) == 1.0

    def test_worked_example(self):
        inputs = AnalyticalInputs(1, 1, fragment_success=0.9)
        expected = 1 - (1 - 0.9 * (279 / 280) ** 9) ** 3
        assert header_success(inputs, 10.0) == pytest.approx(expected, rel=1e-12)

    def test_sub_unity_load_clamped(self):
        assert header_success(AnalyticalInputs(1, 1, fragment_success=0.5), 0.2) == header_success(
            AnalyticalInputs(1, 1, fragment_success=0.5), 1.0
        )


class TestPayload:
    def test_perfect(self):
        assert payload_success(AnalyticalInputs(1, 1), 1.0) == 1.0

    def test_dead(self):
        assert payload_success(AnalyticalInputs(1, 1, fragment_success=0.0), 1.0) == 0.0

    def test_binomial_example(self):
        assert binomial_tail_at_least(6, 2, 0.5) == pytest.approx(0.890625, abs=1e-15)


class TestPacket:
    def test_no_load_perfect_links(self):
        assert packet_success(AnalyticalInputs(1e-9, 1e-9)) == pytest.approx(1.0)

    def test_product(self):
        inputs = AnalyticalInputs(20_000, 1 / 600, fragment_success=0.9)
        a_h, a_f = arrivals(inputs)
        assert packet_success(inputs) == pytest.approx(header_success(inputs, a_h) * payload_success(inputs, a_f))

    def test_for_scheme_dr8(self):
        inputs = AnalyticalInputs.for_scheme(LrFhss(), 50_000, 600.0, 10)
        assert (inputs.header_count, inputs.fragment_count, inputs.fragments_needed, inputs.channels) == (3, 7, 3, 280)

    def test_binned_is_bin_mean(self):
        base = AnalyticalInputs(10_000, 1 / 600)
        zs = [1.0, 0.5, 0.0]
        expected = sum(packet_success(replace(base, fragment_success=z)) for z in zs) / 3
        assert packet_success_binned(base, zs) == pytest.approx(expected)

    def test_validation(self):
        with pytest.raises(ConfigError):
            AnalyticalInputs(1, 1, fragment_success=1.5)
        with pytest.raises(ConfigError):
            AnalyticalInputs(1, 1, fragments_needed=8)
        with pytest.raises(ConfigError):
            packet_success_binned(AnalyticalInputs(1, 1), [])


# --- properties ------------------------------------------------------------------

loads = st.floats(0.0, 200_000.0)
zetas = st.floats(0.0, 1.0)


@settings(max_examples=150, deadline=None)
@given(loads, loads, zetas)
def test_nonincreasing_in_devices(n1, n2, z):
    lo, hi = sorted((n1, n2))
    a = packet_success(AnalyticalInputs(lo, 1 / 600, fragment_success=z))
    b = packet_success(AnalyticalInputs(hi, 1 / 600, fragment_success=z))
    assert b <= a + 1e-12


@settings(max_examples=150, deadline=None)
@given(st.floats(1e-5, 1.0), st.floats(1e-5, 1.0), zetas)
def test_nonincreasing_in_rate(r1, r2, z):
    lo, hi = sorted((r1, r2))
    assert packet_success(AnalyticalInputs(1000, hi, fragment_success=z)) <= packet_success(
        AnalyticalInputs(1000, lo, fragment_success=z)) + 1e-12


@settings(max_examples=150, deadline=None)
@given(loads, zetas, zetas)
def test_nondecreasing_in_zeta(n, z1, z2):
    lo, hi = sorted((z1, z2))
    assert packet_success(AnalyticalInputs(n, 1 / 600, fragment_success=hi)) >= packet_success(
        AnalyticalInputs(n, 1 / 600, fragment_success=lo)) - 1e-12


@settings(max_examples=150, deadline=None)
@given(loads, zetas, st.integers(1, 2000), st.integers(1, 2000))
def test_nondecreasing_in_channels(n, z, c1, c2):
    lo, hi = sorted((c1, c2))
    assert packet_success(AnalyticalInputs(n, 1 / 600, channels=hi, fragment_success=z)) >= packet_success(
        AnalyticalInputs(n, 1 / 600, channels=lo, fragment_success=z)) - 1e-12


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 40), st.floats(0.0, 1.0))
def test_phi_one_complement(nf, p):
    assert binomial_tail_at_least(nf, 1, p) == pytest.approx(1 - (1 - p) ** nf, abs=1e-12)


@pytest.mark.parametrize("nf", range(1, 7))
def test_brute_force_enumeration(nf):
    for phi in range(1, nf + 1):
        for p in (0.0, 0.05, 0.3, 0.5, 0.71, 0.99, 1.0):
            brute = sum(
                math.prod(p if bit else 1 - p for bit in outcome)
                for outcome in itertools.product((0, 1), repeat=nf)
                if sum(outcome) >= phi
            )
            assert binomial_tail_at_least(nf, phi, p) == pytest.approx(brute, abs=1e-12)
