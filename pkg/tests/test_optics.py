"""
Tests for Fock-space propagation through the analyzer and threshold detection.
"""
import itertools
import math

import pytest
from pydantic import ValidationError

from app.errors import InvalidPairError, InvalidParameterError, InvalidStateError
from app.optics_models import (
    BSM_PAIR_LABELS,
    CoincidenceRule,
    DetectorModel,
    OccupationDistribution,
    PolarizationState,
    pair_label,
)
from app.optics_service import (
    bsa_transfer,
    click_pattern_probs,
    coincidence_prob,
    conditional_coincidence,
    output_distribution,
    single_click_prob,
)
from app.source_models import BasisSetting
from app.source_service import encode

H = encode(BasisSetting.parse("Z0"))
V = encode(BasisSetting.parse("Z1"))
PLUS = encode(BasisSetting.parse("X0"))
MINUS = encode(BasisSetting.parse("X1"))
R = encode(BasisSetting.parse("Y0"))
L = encode(BasisSetting.parse("Y1"))
ELLIPTIC = PolarizationState(amp_h=math.cos(0.3), amp_v=math.sin(0.3) * complex(math.cos(1.1), math.sin(1.1)))

POLARIZATION_PAIRS = [
    (H, H), (H, V), (V, H), (PLUS, PLUS), (PLUS, MINUS), (R, R),
    (R, L), (PLUS, R), (MINUS, L), (H, PLUS), (ELLIPTIC, R), (ELLIPTIC, ELLIPTIC),
]


def brute_force_distribution(m, pol_a, n, pol_b) -> dict:
    """Sum the amplitude of every photon-to-mode assignment separately."""
    s = 1 / math.sqrt(2)
    u = [pol_a.amp_h * s, pol_a.amp_v * s, pol_a.amp_h * s, pol_a.amp_v * s]
    v = [pol_b.amp_h * s, pol_b.amp_v * s, -pol_b.amp_h * s, -pol_b.amp_v * s]
    amplitudes = {}
    for modes in itertools.product(range(4), repeat=m + n):
        amp = 1 + 0j
        for k in modes[:m]:
            amp *= u[k]
        for k in modes[m:]:
            amp *= v[k]
        occupation = tuple(modes.count(k) for k in range(4))
        amplitudes[occupation] = amplitudes.get(occupation, 0j) + amp
    result = {}
    for occupation, amp in amplitudes.items():
        weight = 1
        for count in occupation:
            weight *= math.factorial(count)
        result[occupation] = abs(amp) ** 2 * weight / (math.factorial(m) * math.factorial(n))
    return result


class TestPolarizationState:
    """Tests for Jones-vector validation."""

    def test_rejects_unnormalized_state(self):
        """Test rejects unnormalized state."""
        with pytest.raises(ValidationError):
            PolarizationState(amp_h=1, amp_v=1)

    def test_operations_reject_unvalidated_state(self):
        """Test operations reject unvalidated state."""
        bad = PolarizationState.model_construct(amp_h=1 + 0j, amp_v=1 + 0j)
        with pytest.raises(InvalidStateError):
            bsa_transfer(bad, H)


class TestBsaTransfer:
    """Tests for the beamsplitter + PBS transfer rows."""

    @pytest.mark.parametrize("pol_a,pol_b", POLARIZATION_PAIRS)
    def test_rows_unit_norm_and_orthogonal(self, pol_a, pol_b):
        """Test rows unit norm and orthogonal."""
        transfer = bsa_transfer(pol_a, pol_b)
        assert sum(abs(x) ** 2 for x in transfer.u) == pytest.approx(1.0, abs=1e-12)
        assert sum(abs(x) ** 2 for x in transfer.v) == pytest.approx(1.0, abs=1e-12)
        assert abs(sum(a * b.conjugate() for a, b in zip(transfer.u, transfer.v))) < 1e-12

    def test_horizontal_photons_reach_only_d1_and_d3(self):
        """Test horizontal photons reach only D1 and D3."""
        transfer = bsa_transfer(H, H)
        assert transfer.u[1] == 0 and transfer.u[3] == 0
        assert transfer.v[2] == pytest.approx(-transfer.v[0])


class TestOutputDistribution:
    """Tests for the photon-number distribution at D1..D4."""

    @pytest.mark.parametrize("pol_a,pol_b", POLARIZATION_PAIRS)
    def test_matches_brute_force_expansion(self, pol_a, pol_b):
        """Test matches brute force expansion."""
        for m in range(5):
            for n in range(5 - m):
                expected = brute_force_distribution(m, pol_a, n, pol_b)
                actual = output_distribution(m, pol_a, n, pol_b).entries
                for occupation in set(expected) | set(actual):
                    assert actual.get(occupation, 0.0) == pytest.approx(
                        expected.get(occupation, 0.0), abs=1e-10
                    ), (m, n, occupation)

    @pytest.mark.parametrize("m,n", [(1, 1), (2, 0), (0, 3), (2, 2), (1, 3)])
    def test_pure_fock_input_sums_to_one(self, m, n):
        """Test pure Fock input sums to one."""
        assert output_distribution(m, PLUS, n, R).total == pytest.approx(1.0, abs=1e-12)

    def test_vacuum(self):
        """Test vacuum."""
        assert output_distribution(0, H, 0, H).entries == {(0, 0, 0, 0): 1.0}

    def test_hong_ou_mandel_bunching(self):
        """Test Hong-Ou-Mandel bunching."""
        entries = output_distribution(1, H, 1, H).entries
        assert set(entries) == {(2, 0, 0, 0), (0, 0, 2, 0)}
        assert entries[(2, 0, 0, 0)] == pytest.approx(0.5)

    def test_negative_photon_number_rejected(self):
        """Test negative photon number rejected."""
        with pytest.raises(InvalidParameterError):
            output_distribution(-1, H, 1, H)


class TestClickPatterns:
    """Tests for threshold detection and coincidence counting."""

    def test_unit_efficiency_patterns_follow_occupied_modes(self):
        """Test unit efficiency patterns follow occupied modes."""
        patterns = click_pattern_probs(output_distribution(1, H, 1, V), DetectorModel())
        assert sum(patterns.values()) == pytest.approx(1.0)
        assert all(len(clicked) == 2 for clicked in patterns)

    def test_fire_probability_uses_efficiency(self):
        """Test fire probability uses efficiency."""
        dist = OccupationDistribution(entries={(2, 0, 0, 0): 1.0})
        det = DetectorModel(kappa=(0.5, 1.0, 1.0, 1.0))
        patterns = click_pattern_probs(dist, det)
        assert patterns[frozenset({1})] == pytest.approx(0.75)
        assert patterns[frozenset()] == pytest.approx(0.25)
        assert single_click_prob(patterns, 1) == pytest.approx(0.75)

    def test_exclusive_rule_ignores_extra_clicks(self):
        """Test exclusive rule ignores extra clicks."""
        patterns = {frozenset({1, 2}): 0.2, frozenset({1, 2, 3}): 0.1}
        assert coincidence_prob(patterns, 1, 2) == pytest.approx(0.3)
        assert coincidence_prob(patterns, 2, 1, CoincidenceRule.EXCLUSIVE) == pytest.approx(0.2)

    @pytest.mark.parametrize("i,j", [(1, 1), (0, 2), (3, 5)])
    def test_invalid_pairs_rejected(self, i, j):
        """Test invalid pairs rejected."""
        with pytest.raises(InvalidPairError):
            coincidence_prob({}, i, j)

    def test_pair_label_is_unordered(self):
        """Test pair label is unordered."""
        assert pair_label(3, 1) == "D13"


class TestConditionalCoincidence:
    """Closed-form checks of P(D_ij | m, n)."""

    def test_identical_single_photons_never_split_between_outputs(self):
        """Test identical single photons never split between outputs."""
        det = DetectorModel()
        assert conditional_coincidence(1, H, 1, H, det, 1, 3) == pytest.approx(0.0, abs=1e-15)
        assert conditional_coincidence(1, PLUS, 1, PLUS, det, 1, 4) == pytest.approx(0.0, abs=1e-15)

    def test_single_photon_heralding_pairs(self):
        """Test single photon heralding pairs."""
        det = DetectorModel()
        for label in BSM_PAIR_LABELS:
            i, j = int(label[1]), int(label[2])
            assert conditional_coincidence(1, H, 1, V, det, i, j) == pytest.approx(0.25)
        assert conditional_coincidence(1, PLUS, 1, PLUS, det, 1, 2) == pytest.approx(0.25)

    def test_three_photons(self):
        """Test three photons."""
        det = DetectorModel()
        assert conditional_coincidence(1, PLUS, 2, PLUS, det, 1, 2) == pytest.approx(11 / 32)
        assert conditional_coincidence(1, PLUS, 2, PLUS, det, 1, 4) == pytest.approx(3 / 32)

    def test_one_arm_two_photons(self):
        """Test one arm two photons."""
        det = DetectorModel()
        for i, j in itertools.combinations(range(1, 5), 2):
            assert conditional_coincidence(2, PLUS, 0, H, det, i, j) == pytest.approx(1 / 8)

    def test_detector_efficiency_is_ignored(self):
        """Test detector efficiency is ignored."""
        lossy = DetectorModel(kappa=(0.1, 0.2, 0.3, 0.4))
        assert conditional_coincidence(1, PLUS, 1, PLUS, lossy, 3, 4) == pytest.approx(0.25)

    def test_truncation_below_two_rejected(self):
        """Test truncation below two rejected."""
        with pytest.raises(ValidationError):
            DetectorModel(truncation_total_photons=1)


class TestArmSwapSymmetry:
    """Exchanging the two input arms leaves every outcome probability unchanged."""

    @pytest.mark.parametrize("pol_a,pol_b", POLARIZATION_PAIRS)
    def test_output_distribution_symmetric(self, pol_a, pol_b):
        """Test photon-number distributions agree after swapping arms, all m + n <= 4."""
        for m in range(5):
            for n in range(5 - m):
                direct = output_distribution(m, pol_a, n, pol_b).entries
                swapped = output_distribution(n, pol_b, m, pol_a).entries
                for occupation in set(direct) | set(swapped):
                    assert swapped.get(occupation, 0.0) == pytest.approx(
                        direct.get(occupation, 0.0), abs=1e-12
                    ), (m, n, occupation)

    def test_click_patterns_symmetric_with_efficiencies(self):
        """Test click patterns agree after swapping arms with unequal detectors."""
        det = DetectorModel(kappa=(0.9, 0.5, 0.7, 0.6))
        for m in range(5):
            for n in range(5 - m):
                direct = click_pattern_probs(output_distribution(m, ELLIPTIC, n, R), det)
                swapped = click_pattern_probs(output_distribution(n, R, m, ELLIPTIC), det)
                for pattern in set(direct) | set(swapped):
                    assert swapped.get(pattern, 0.0) == pytest.approx(direct.get(pattern, 0.0), abs=1e-12)


class TestZBasisSelectionRule:
    """Equal Z polarizations never fire a heralding pair."""

    @pytest.mark.parametrize("pol", [H, V], ids=["H", "V"])
    def test_no_heralding_coincidences_up_to_truncation(self, pol):
        """Test D12, D14, D23 and D34 stay dark for every sector within truncation."""
        det = DetectorModel()
        for m in range(det.truncation_total_photons + 1):
            for n in range(det.truncation_total_photons + 1 - m):
                patterns = click_pattern_probs(output_distribution(m, pol, n, pol), det)
                for label in BSM_PAIR_LABELS:
                    i, j = int(label[1]), int(label[2])
                    assert coincidence_prob(patterns, i, j) == pytest.approx(0.0, abs=1e-15), (m, n, label)

    def test_multiphoton_noise_only_on_same_polarization_pairs(self):
        """Test three H photons only produce D13 coincidences."""
        det = DetectorModel()
        assert conditional_coincidence(2, H, 1, H, det, 1, 3) > 0
        assert conditional_coincidence(1, V, 2, V, det, 2, 4) > 0
