"""Polarization encodings, photon-number statistics and channel models for the two sender arms."""
import cmath
import math

import numpy as np
from scipy.stats import binom, poisson

from app.errors import InvalidParameterError, InvalidStateError
from app.optics_models import NORM_TOLERANCE, PolarizationState
from app.source_models import (
    ArmConfig,
    Basis,
    BasisSetting,
    PhotonNumberMixture,
    SourceKind,
)

_INV_SQRT2 = 1 / math.sqrt(2)

_ENCODING: dict[tuple[Basis, int], tuple[complex, complex]] = {
    (Basis.Z, 0): (1 + 0j, 0j),
    (Basis.Z, 1): (0j, 1 + 0j),
    (Basis.X, 0): (complex(_INV_SQRT2), complex(_INV_SQRT2)),
    (Basis.X, 1): (complex(_INV_SQRT2), complex(-_INV_SQRT2)),
    (Basis.Y, 0): (complex(_INV_SQRT2), 1j * _INV_SQRT2),
    (Basis.Y, 1): (complex(_INV_SQRT2), -1j * _INV_SQRT2),
}


def encode(setting: BasisSetting) -> PolarizationState:
    amp_h, amp_v = _ENCODING[(setting.basis, setting.bit)]
    return PolarizationState(amp_h=amp_h, amp_v=amp_v)


def _checked(pol: PolarizationState) -> PolarizationState:
    if pol.norm_error > NORM_TOLERANCE:
        raise InvalidStateError(f"polarization ({pol.amp_h}, {pol.amp_v}) is not normalized")
    return pol


def rotate_frame(pol: PolarizationState, beta: float) -> PolarizationState:
    """Equatorial frame rotation by beta: amp_v -> e^{i beta} amp_v."""
    _checked(pol)
    return PolarizationState(amp_h=pol.amp_h, amp_v=cmath.exp(1j * beta) * pol.amp_v)


def misalign(pol: PolarizationState, epsilon: float) -> PolarizationState:
    """Rotate the Jones vector by the real angle epsilon."""
    _checked(pol)
    if epsilon == 0:
        return pol
    c, s = math.cos(epsilon), math.sin(epsilon)
    return PolarizationState(
        amp_h=c * pol.amp_h - s * pol.amp_v,
        amp_v=s * pol.amp_h + c * pol.amp_v,
    )


def wcp_mixture(mu: float, truncation: int) -> PhotonNumberMixture:
    """Phase-randomized coherent state: Poisson(mu) photon numbers up to `truncation`."""
    if mu < 0 or not math.isfinite(mu):
        raise InvalidParameterError(f"mean photon number must be finite and >= 0, got {mu}")
    if truncation < 2:
        raise InvalidParameterError(f"truncation must be >= 2, got {truncation}")
    counts = np.arange(truncation + 1)
    pmf = poisson.pmf(counts, mu) if mu > 0 else (counts == 0).astype(float)
    weights = {int(n): float(p) for n, p in zip(counts, pmf)}
    truncated = max(0.0, 1.0 - math.fsum(weights.values()))
    return PhotonNumberMixture(weights=weights, mean=mu, truncated_mass=truncated)


def apply_loss_db(mu: float, loss_db: float) -> float:
    if loss_db < 0:
        raise InvalidParameterError(f"loss must be >= 0 dB, got {loss_db}")
    return mu * 10 ** (-loss_db / 10)


def channel_transmittance(loss_db: float) -> float:
    return apply_loss_db(1.0, loss_db)


def fock_loss(n: int, transmittance: float) -> PhotonNumberMixture:
    """Binomial loss channel acting on the Fock state |n>."""
    if n < 0:
        raise InvalidParameterError(f"photon number must be >= 0, got {n}")
    if not 0.0 <= transmittance <= 1.0:
        raise InvalidParameterError(f"transmittance must lie in [0, 1], got {transmittance}")
    ks = np.arange(n + 1)
    pmf = binom.pmf(ks, n, transmittance)
    weights = {int(k): float(p) for k, p in zip(ks, pmf) if p > 0}
    # binom.pmf can leave a few ulps of residual mass
    drift = 1.0 - math.fsum(weights.values())
    if weights and abs(drift) <= NORM_TOLERANCE:
        top = max(weights)
        weights[top] = max(0.0, weights[top] + drift)
    return PhotonNumberMixture(weights=weights, mean=n * transmittance, truncated_mass=0.0)


def arm_photon_mixture(arm: ArmConfig, loss_db: float, truncation: int) -> PhotonNumberMixture:
    """Photon-number mixture arriving at the analyzer from one arm."""
    if arm.source_kind == SourceKind.BLOCKED:
        return PhotonNumberMixture(weights={0: 1.0}, mean=0.0)
    if arm.source_kind == SourceKind.SINGLE_PHOTON:
        return fock_loss(1, channel_transmittance(loss_db))
    return wcp_mixture(apply_loss_db(arm.mean_photon, loss_db), truncation)


def arm_polarization(arm: ArmConfig, beta: float = 0.0) -> PolarizationState:
    """Polarization seen at the analyzer: frame rotation, then misalignment."""
    pol = arm.polarization
    if beta:
        pol = rotate_frame(pol, beta)
    return misalign(pol, arm.misalignment_angle)
