"""
Fock-space propagation through the BS + PBS Bell state analyzer.

Convention (single source of truth for the Bell-outcome grouping):
    a -> (c + d)/sqrt(2),  b -> (c - d)/sqrt(2)
    PBS transmits H, reflects V
    D1 = c_H, D2 = c_V, D3 = d_H, D4 = d_V
"""
import itertools
import math
from collections import defaultdict
from typing import Mapping

from app.errors import InvalidPairError, InvalidParameterError, InvalidStateError
from app.optics_models import (
    DETECTORS,
    NORM_TOLERANCE,
    ClickPattern,
    CoincidenceRule,
    DetectorModel,
    Occupation,
    OccupationDistribution,
    PolarizationState,
    TransferVectors,
)

_INV_SQRT2 = 1 / math.sqrt(2)

Polynomial = dict[Occupation, complex]


def _require_normalized(pol: PolarizationState) -> None:
    # model_construct() skips validation, so operations check again
    if pol.norm_error > NORM_TOLERANCE:
        raise InvalidStateError(
            f"polarization ({pol.amp_h}, {pol.amp_v}) is not normalized"
        )


def bsa_transfer(pol_a: PolarizationState, pol_b: PolarizationState) -> TransferVectors:
    """Map photons in arm a / arm b onto the four detector modes."""
    _require_normalized(pol_a)
    _require_normalized(pol_b)
    h_a, v_a = pol_a.amp_h * _INV_SQRT2, pol_a.amp_v * _INV_SQRT2
    h_b, v_b = pol_b.amp_h * _INV_SQRT2, pol_b.amp_v * _INV_SQRT2
    return TransferVectors(u=(h_a, v_a, h_a, v_a), v=(h_b, v_b, -h_b, -v_b))


def _multiply_linear(poly: Polynomial, coeffs: tuple[complex, ...]) -> Polynomial:
    """Multiply a polynomial in the creation operators A_1..A_4 by sum_k coeffs[k] A_k."""
    product: dict[Occupation, complex] = defaultdict(complex)
    for exponents, c in poly.items():
        for k, a in enumerate(coeffs):
            if a == 0:
                continue
            raised = list(exponents)
            raised[k] += 1
            product[tuple(raised)] += c * a
    return dict(product)


def output_distribution(
    m: int,
    pol_a: PolarizationState,
    n: int,
    pol_b: PolarizationState,
) -> OccupationDistribution:
    """
    Photon-number distribution at D1..D4 for m photons (polarization pol_a) in arm a
    and n photons (pol_b) in arm b.

    Expands (sum_k u_k A_k)^m (sum_k v_k A_k)^n |0> / sqrt(m! n!).
    """
    if m < 0 or n < 0:
        raise InvalidParameterError(f"photon numbers must be non-negative, got ({m}, {n})")
    transfer = bsa_transfer(pol_a, pol_b)

    poly: Polynomial = {(0, 0, 0, 0): 1 + 0j}
    for _ in range(m):
        poly = _multiply_linear(poly, transfer.u)
    for _ in range(n):
        poly = _multiply_linear(poly, transfer.v)

    norm = math.factorial(m) * math.factorial(n)
    entries: dict[Occupation, float] = {}
    for occupation, coeff in poly.items():
        # |n1..n4> = prod A_k^{n_k} |0> / sqrt(prod n_k!)
        weight = math.prod(math.factorial(k) for k in occupation)
        p = abs(coeff) ** 2 * weight / norm
        if p > 0:
            entries[occupation] = p
    return OccupationDistribution(entries=entries)


def click_pattern_probs(
    dist: OccupationDistribution,
    det: DetectorModel,
) -> dict[ClickPattern, float]:
    """Threshold-detector click patterns; detector i fires with prob 1 - (1 - kappa_i)^n_i."""
    patterns: dict[ClickPattern, float] = defaultdict(float)
    for occupation, weight in dist.entries.items():
        fire = [1.0 - (1.0 - kappa) ** count for kappa, count in zip(det.kappa, occupation)]
        if all(p_fire in (0.0, 1.0) for p_fire in fire):
            patterns[frozenset(d for d, p_fire in zip(DETECTORS, fire) if p_fire)] += weight
            continue
        for outcome in itertools.product((False, True), repeat=len(DETECTORS)):
            p = weight
            for fired, p_fire in zip(outcome, fire):
                p *= p_fire if fired else 1.0 - p_fire
            if p > 0:
                clicked = frozenset(d for d, fired in zip(DETECTORS, outcome) if fired)
                patterns[clicked] += p
    return dict(patterns)


def _check_pair(i: int, j: int) -> None:
    if i == j:
        raise InvalidPairError(f"coincidence needs two distinct detectors, got D{i} twice")
    if i not in DETECTORS or j not in DETECTORS:
        raise InvalidPairError(f"detectors must be in {DETECTORS}, got ({i}, {j})")


def coincidence_prob(
    patterns: Mapping[ClickPattern, float],
    i: int,
    j: int,
    rule: CoincidenceRule = CoincidenceRule.INCLUSIVE,
) -> float:
    """Probability that D_i and D_j register a coincidence under the given rule."""
    _check_pair(i, j)
    target = frozenset((i, j))
    if rule == CoincidenceRule.EXCLUSIVE:
        return patterns.get(target, 0.0)
    return math.fsum(p for clicked, p in patterns.items() if target <= clicked)


def single_click_prob(patterns: Mapping[ClickPattern, float], i: int) -> float:
    """Probability that D_i fires, whatever the other detectors do."""
    if i not in DETECTORS:
        raise InvalidPairError(f"detector must be in {DETECTORS}, got {i}")
    return math.fsum(p for clicked, p in patterns.items() if i in clicked)


def conditional_coincidence(
    m: int,
    pol_a: PolarizationState,
    n: int,
    pol_b: PolarizationState,
    det: DetectorModel,
    i: int,
    j: int,
) -> float:
    """P(D_ij | m_P, n_Q) with unit detector efficiency."""
    _check_pair(i, j)
    dist = output_distribution(m, pol_a, n, pol_b)
    patterns = click_pattern_probs(dist, det.with_unit_efficiency())
    return coincidence_prob(patterns, i, j, det.coincidence_rule)
