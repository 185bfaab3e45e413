"""Closed-form LR-FHSS packet success without capture.

Header replicas and payload fragments arrive as Poisson streams; a fragment
survives when its own SNR is sufficient (probability ``zeta``) and no other
fragment lands on the same OBW channel during its vulnerability window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import ConfigError
from .radio import LrFhss, fragments_needed


@dataclass(frozen=True)
class AnalyticalInputs:
    n_devices: float
    msg_rate_per_s: float
    header_count: int = 3
    fragment_count: int = 7
    t_h_s: float = 0.233472
    t_f_s: float = 0.1024
    channels: int = 280
    fragment_success: float = 1.0
    fragments_needed: int = 3

    def __post_init__(self):
        if self.n_devices < 0 or self.msg_rate_per_s < 0:
            raise ConfigError("n_devices and msg_rate_per_s must be >= 0")
        if min(self.header_count, self.fragment_count, self.channels) < 1:
            raise ConfigError("header_count, fragment_count and channels must be >= 1")
        if not 0.0 <= self.fragment_success <= 1.0:
            raise ConfigError(f"fragment_success must lie in [0, 1], got {self.fragment_success}")
        if not 1 <= self.fragments_needed <= self.fragment_count:
            raise ConfigError("fragments_needed must lie in [1, fragment_count]")

    @classmethod
    def for_scheme(cls, scheme: LrFhss, n_devices: float, period_s: float, payload_bytes: int,
                   fragment_success: float = 1.0) -> "AnalyticalInputs":
        p = scheme.profile
        nf = scheme.fragment_count(payload_bytes)
        return cls(
            n_devices=n_devices,
            msg_rate_per_s=1.0 / period_s,
            header_count=p.header_replicas,
            fragment_count=nf,
            t_h_s=p.header_duration_s,
            t_f_s=p.fragment_duration_s,
            channels=p.obw_channels,
            fragment_success=fragment_success,
            fragments_needed=fragments_needed(nf, p.cr),
        )

    @property
    def header_rate(self) -> float:
        return self.header_count * self.msg_rate_per_s * self.n_devices

    @property
    def fragment_rate(self) -> float:
        return self.fragment_count * self.msg_rate_per_s * self.n_devices


def arrivals(inputs: AnalyticalInputs) -> tuple[float, float]:
    """Mean fragment arrivals (A_h, A_f) overlapping a header / payload fragment."""
    lh, lf = inputs.header_rate, inputs.fragment_rate
    th, tf = inputs.t_h_s, inputs.t_f_s
    return 2 * lh * th + lf * (th + tf), 2 * lf * tf + lh * (th + tf)


def _single_survival(inputs: AnalyticalInputs, a: float) -> float:
    # exponent clamped at 0: fewer than one arrival means no contention
    return inputs.fragment_success * (1 - 1 / inputs.channels) ** max(a - 1.0, 0.0)


def header_success(inputs: AnalyticalInputs, a_h: float) -> float:
    return 1.0 - (1.0 - _single_survival(inputs, a_h)) ** inputs.header_count


def binomial_tail_at_least(n: int, k: int, p: float) -> float:
    """P[Bin(n, p) >= k], summed in the log domain."""
    if k <= 0:
        return 1.0
    if p <= 0.0:
        return 0.0
    if p >= 1.0:
        return 1.0
    lp, lq = math.log(p), math.log1p(-p)
    below = 0.0
    for j in range(k):
        below += math.exp(math.lgamma(n + 1) - math.lgamma(j + 1) - math.lgamma(n - j + 1) + j * lp + (n - j) * lq)
    return min(max(1.0 - below, 0.0), 1.0)


def payload_success(inputs: AnalyticalInputs, a_f: float) -> float:
    p_o = _single_survival(inputs, a_f)
    return binomial_tail_at_least(inputs.fragment_count, inputs.fragments_needed, p_o)


def packet_success(inputs: AnalyticalInputs) -> float:
    a_h, a_f = arrivals(inputs)
    return header_success(inputs, a_h) * payload_success(inputs, a_f)


def packet_success_binned(inputs: AnalyticalInputs, zetas) -> float:
    """Mean over distance bins, each evaluated with its own fragment success."""
    zetas = list(zetas)
    if not zetas:
        raise ConfigError("need at least one bin")
    return sum(packet_success(replace(inputs, fragment_success=float(z))) for z in zetas) / len(zetas)
