"""Path loss of the buried segment: absorption, interface refraction and a
fixed multipath margin, plus soil dielectric models feeding the absorption.

Layers are listed from the transmitter outward. Propagation is taken as
vertical, so the path length inside a layer equals its thickness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

from .errors import ConfigError, UnsupportedModelError

EPS0 = 8.8541878128e-12  # F/m
MU0 = 4e-7 * math.pi  # H/m
C0 = 299_792_458.0  # m/s

NP_TO_DB = 8.69
DEFAULT_MULTIPATH_MARGIN_DB = 27.0


@dataclass(frozen=True)
class MediumLayer:
    name: str
    thickness_m: float
    rel_permittivity: float
    attenuation_np_per_m: float = 0.0

    def __post_init__(self):
        if not self.thickness_m > 0:
            raise ConfigError(f"layer {self.name!r}: thickness_m must be > 0, got {self.thickness_m}")
        if not self.rel_permittivity >= 1:
            raise ConfigError(
                f"layer {self.name!r}: rel_permittivity must be >= 1, got {self.rel_permittivity}"
            )
        if not self.attenuation_np_per_m >= 0:
            raise ConfigError(
                f"layer {self.name!r}: attenuation_np_per_m must be >= 0, got {self.attenuation_np_per_m}"
            )


@dataclass(frozen=True)
class LayerStack:
    """Ordered media between the buried device and the air.

    ``top_permittivity`` is the medium above the last layer (air unless
    overridden); it contributes an interface but no absorption.
    """

    layers: tuple[MediumLayer, ...]
    multipath_margin_db: float = DEFAULT_MULTIPATH_MARGIN_DB
    top_permittivity: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ConfigError("layer stack needs at least one layer")
        if not self.multipath_margin_db >= 0:
            raise ConfigError(f"multipath_margin_db must be >= 0, got {self.multipath_margin_db}")
        if not self.top_permittivity >= 1:
            raise ConfigError(f"top_permittivity must be >= 1, got {self.top_permittivity}")

    def __add__(self, other: "LayerStack") -> "LayerStack":
        return replace(self, layers=self.layers + other.layers)

    def with_thickness(self, name: str, thickness_m: float) -> "LayerStack":
        return self._with_layer(name, thickness_m=thickness_m)

    def with_attenuation(self, name: str, attenuation_np_per_m: float) -> "LayerStack":
        return self._with_layer(name, attenuation_np_per_m=attenuation_np_per_m)

    def layer(self, name: str) -> MediumLayer:
        for lay in self.layers:
            if lay.name == name:
                return lay
        raise ConfigError(f"no layer named {name!r} in stack")

    def _with_layer(self, name: str, **changes) -> "LayerStack":
        self.layer(name)
        layers = tuple(replace(lay, **changes) if lay.name == name else lay for lay in self.layers)
        return replace(self, layers=layers)


def medium_absorption_db(stack: LayerStack) -> float:
    """Sum of 8.69 * alpha_k * d_k over all layers."""
    return sum(NP_TO_DB * lay.attenuation_np_per_m * lay.thickness_m for lay in stack.layers)


def wave_impedance(rel_permittivity: float) -> float:
    return math.sqrt(MU0 / (EPS0 * rel_permittivity))


def interface_loss_db(eps_a: float, eps_b: float) -> float:
    """Transmission loss (positive dB) crossing from medium a into medium b."""
    za, zb = wave_impedance(eps_a), wave_impedance(eps_b)
    gamma = (za - zb) / (za + zb)
    return -10.0 * math.log10(1.0 - gamma * gamma)


def refraction_loss_db(stack: LayerStack) -> float:
    # Each term 10*log10(1 - |Gamma|^2) is <= 0; reported as a positive loss.
    eps = [lay.rel_permittivity for lay in stack.layers] + [stack.top_permittivity]
    return abs(sum(interface_loss_db(a, b) for a, b in zip(eps, eps[1:])))


def underground_path_loss_db(stack: LayerStack) -> float:
    return medium_absorption_db(stack) + refraction_loss_db(stack) + stack.multipath_margin_db


# --- soil dielectric models -------------------------------------------------


@dataclass(frozen=True)
class SoilProperties:
    """Soil state and texture. Fractions are by weight except ``vwc_fraction``
    (volumetric). Silt is whatever remains after clay and sand."""

    vwc_fraction: float
    clay_fraction: float
    sand_fraction: float = 0.5
    bulk_density_g_cm3: float = 1.5
    particle_density_g_cm3: float = 2.66
    frequency_hz: float = 433e6

    def __post_init__(self):
        for key in ("vwc_fraction", "clay_fraction", "sand_fraction"):
            v = getattr(self, key)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{key} must lie in [0, 1], got {v}")
        if self.clay_fraction + self.sand_fraction > 1.0 + 1e-12:
            raise ConfigError("clay_fraction + sand_fraction must not exceed 1")
        for key in ("bulk_density_g_cm3", "particle_density_g_cm3", "frequency_hz"):
            if not getattr(self, key) > 0:
                raise ConfigError(f"{key} must be > 0")
        if self.bulk_density_g_cm3 >= self.particle_density_g_cm3:
            raise ConfigError("bulk density must be below particle density")

    @property
    def silt_fraction(self) -> float:
        return 1.0 - self.clay_fraction - self.sand_fraction


@dataclass(frozen=True)
class DielectricModel:
    name: str
    f_min_hz: float
    f_max_hz: float

    def check(self, frequency_hz: float) -> None:
        if not self.f_min_hz <= frequency_hz <= self.f_max_hz:
            raise UnsupportedModelError(
                f"{self.name} dielectric model is valid for "
                f"{self.f_min_hz / 1e9:g}-{self.f_max_hz / 1e9:g} GHz, got {frequency_hz / 1e9:g} GHz"
            )


PEPLINSKI = DielectricModel("peplinski", 0.3e9, 1.3e9)
MIRONOV = DielectricModel("mironov", 0.045e9, 26.5e9)
DIELECTRIC_MODELS = {m.name: m for m in (PEPLINSKI, MIRONOV)}

# free water at 20 C
_EPS_W_INF = 4.9
_EPS_W_STATIC = 80.1
_TWO_PI_TAU_W = 0.58e-10  # s


def peplinski_permittivity(props: SoilProperties) -> complex:
    """Semi-empirical mixing model for 0.3-1.3 GHz (Peplinski, Ulaby & Dobson)."""
    PEPLINSKI.check(props.frequency_hz)
    f = props.frequency_hz
    mv = props.vwc_fraction
    s, c = props.sand_fraction, props.clay_fraction
    rb, rs = props.bulk_density_g_cm3, props.particle_density_g_cm3
    a = 0.65
    beta_re = 1.2748 - 0.519 * s - 0.152 * c
    beta_im = 1.33797 - 0.603 * s - 0.166 * c
    eps_solid = (1.01 + 0.44 * rs) ** 2 - 0.062
    sigma_eff = 0.0467 + 0.2204 * rb - 0.4111 * s + 0.6614 * c

    wt = _TWO_PI_TAU_W * f
    efw_re = _EPS_W_INF + (_EPS_W_STATIC - _EPS_W_INF) / (1 + wt * wt)
    efw_im = wt * (_EPS_W_STATIC - _EPS_W_INF) / (1 + wt * wt)
    if mv > 0:
        efw_im += sigma_eff / (2 * math.pi * EPS0 * f) * (rs - rb) / (rs * mv)

    mix = 1 + rb / rs * (eps_solid**a - 1) + mv**beta_re * efw_re**a - mv
    eps_re = 1.15 * mix ** (1 / a) - 0.68
    eps_im = (mv**beta_im * efw_im**a) ** (1 / a) if mv > 0 else 0.0
    return complex(eps_re, eps_im)


def _debye_refractive(eps_static: float, tau: float, sigma: float, f: float) -> tuple[float, float]:
    x = 2 * math.pi * f * tau
    er = _EPS_W_INF + (eps_static - _EPS_W_INF) / (1 + x * x)
    ei = (eps_static - _EPS_W_INF) * x / (1 + x * x) + sigma / (2 * math.pi * EPS0 * f)
    mag = math.hypot(er, ei)
    return math.sqrt((mag + er) / 2), math.sqrt((mag - er) / 2)


def mironov_permittivity(props: SoilProperties) -> complex:
    """Mineralogy-based spectroscopic model (Mironov et al.); texture enters
    only through the clay percentage."""
    MIRONOV.check(props.frequency_hz)
    f = props.frequency_hz
    mv = props.vwc_fraction
    cp = 100.0 * props.clay_fraction

    n_dry = 1.634 - 0.539e-2 * cp + 0.2748e-4 * cp * cp
    k_dry = 0.03952 - 0.04038e-2 * cp
    mv_bound = 0.02863 + 0.30673e-2 * cp
    nb, kb = _debye_refractive(
        79.8 - 85.4e-2 * cp + 32.7e-4 * cp * cp,
        1.062e-11 + 3.450e-12 * 1e-2 * cp,
        0.3112 + 0.467e-2 * cp,
        f,
    )
    nu, ku = _debye_refractive(100.0, 8.5e-12, 0.3631 + 1.217e-2 * cp, f)

    if mv <= mv_bound:
        n = n_dry + (nb - 1) * mv
        k = k_dry + kb * mv
    else:
        n = n_dry + (nb - 1) * mv_bound + (nu - 1) * (mv - mv_bound)
        k = k_dry + kb * mv_bound + ku * (mv - mv_bound)
    return complex(n * n - k * k, 2 * n * k)


def soil_permittivity(props: SoilProperties, model: str = "mironov") -> complex:
    try:
        fn = {"peplinski": peplinski_permittivity, "mironov": mironov_permittivity}[model]
    except KeyError:
        raise UnsupportedModelError(
            f"unknown dielectric model {model!r}; choose from {sorted(DIELECTRIC_MODELS)}"
        ) from None
    return fn(props)


def attenuation_constant(eps_real: float, eps_imag: float, frequency_hz: float) -> float:
    """Attenuation constant (Np/m) of a non-magnetic lossy dielectric."""
    if eps_imag == 0:
        return 0.0
    w = 2 * math.pi * frequency_hz
    ratio = eps_imag / eps_real
    return w * math.sqrt(MU0 * EPS0 * eps_real / 2 * (math.sqrt(1 + ratio * ratio) - 1))


def low_loss_attenuation(eps_real: float, loss_tangent: float, frequency_hz: float) -> float:
    """Small-tan(delta) approximation used for pipe wall and asphalt layers."""
    return 2 * math.pi * frequency_hz / C0 * math.sqrt(eps_real) * loss_tangent / 2


def soil_attenuation_constant(props: SoilProperties, model: str = "mironov") -> tuple[float, float]:
    """Return ``(alpha_np_per_m, eps_real)`` for the soil."""
    eps = soil_permittivity(props, model)
    return attenuation_constant(eps.real, eps.imag, props.frequency_hz), eps.real


@dataclass(frozen=True)
class UndergroundSpec:
    """Serializable description of the buried segment.

    Non-soil layers carry their permittivity and either an explicit
    attenuation constant or a loss tangent. The soil layer takes its
    attenuation (and optionally permittivity) from the dielectric model
    unless overridden.
    """

    layers: tuple[dict, ...]
    soil: SoilProperties
    dielectric_model: str = "mironov"
    multipath_margin_db: float = DEFAULT_MULTIPATH_MARGIN_DB
    soil_layer: str = "soil"
    soil_permittivity_override: float | None = None
    soil_attenuation_override: float | None = None
    top_permittivity: float = 1.0

    def build(self) -> LayerStack:
        f = self.soil.frequency_hz
        built = []
        for spec in self.layers:
            name = spec["name"]
            eps = spec.get("rel_permittivity")
            if name == self.soil_layer:
                alpha, eps_model = soil_attenuation_constant(self.soil, self.dielectric_model)
                if self.soil_attenuation_override is not None:
                    alpha = self.soil_attenuation_override
                if self.soil_permittivity_override is not None:
                    eps = self.soil_permittivity_override
                elif eps is None:
                    eps = eps_model
            elif eps is None:
                raise ConfigError(f"layer {name!r} needs rel_permittivity")
            elif spec.get("attenuation_np_per_m") is not None:
                alpha = float(spec["attenuation_np_per_m"])
            else:
                alpha = low_loss_attenuation(float(eps), float(spec.get("loss_tangent", 0.0)), f)
            built.append(MediumLayer(name, float(spec["thickness_m"]), float(eps), alpha))
        return LayerStack(tuple(built), self.multipath_margin_db, self.top_permittivity)


def stack_from_thicknesses(
    thicknesses: Sequence[float],
    permittivities: Sequence[float],
    attenuations: Sequence[float],
    multipath_margin_db: float = DEFAULT_MULTIPATH_MARGIN_DB,
) -> LayerStack:
    layers = tuple(
        MediumLayer(f"layer{i}", d, e, a)
        for i, (d, e, a) in enumerate(zip(thicknesses, permittivities, attenuations))
    )
    return LayerStack(layers, multipath_margin_db)
