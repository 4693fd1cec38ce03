"""
Tests for exact and sampled count records and protocol sets.
"""
import math

import pytest
from pydantic import ValidationError

from app.errors import InvalidConfigError
from app.experiment_models import ConfigTag, CountRecord, ExperimentConfig, ProtocolSetting, RunMode
from app.experiment_service import MAX_PULSES, run, run_exact, run_protocol_set, run_sampled
from app.optics_models import ALL_PAIR_LABELS, DetectorModel
from app.source_models import ArmConfig, BasisSetting, SourceKind
from tests.conftest import lossless_experiment, settings_for


class TestExperimentConfig:
    """Tests for configuration tags."""

    def test_tag_derived_from_blocked_arm(self):
        """Test tag derived from blocked arm."""
        config = ExperimentConfig(arm_b=ArmConfig().blocked())
        assert config.effective_tag == ConfigTag.A_ONLY
        config = ExperimentConfig(arm_a=ArmConfig().blocked())
        assert config.effective_tag == ConfigTag.B_ONLY
        assert ExperimentConfig().effective_tag == ConfigTag.BOTH

    def test_protocol_setting_text(self):
        """Test protocol setting text."""
        setting = ProtocolSetting.parse("X0Y1")
        assert setting.basis_pair == "XY"
        assert str(setting) == "X0Y1"


class TestRunExact:
    """Tests for expected rates per pulse."""

    def test_record_covers_all_pairs_and_detectors(self, experiment):
        """Test record covers all pairs and detectors."""
        record = run_exact(experiment)
        assert set(record.coincidences) == set(ALL_PAIR_LABELS)
        assert set(record.singles) == {1, 2, 3, 4}
        assert record.mode == RunMode.EXACT
        assert record.mu_a == pytest.approx(0.008)

    def test_silent_arm_keeps_its_source_kind(self):
        """Test silent arm keeps its source kind."""
        record = run_exact(lossless_experiment(config_tag=ConfigTag.A_ONLY))
        assert record.config_tag == ConfigTag.A_ONLY
        assert record.mu_b == 0.0
        assert record.source_b == SourceKind.WCP

    def test_blocked_arm_scales_with_efficiencies(self):
        """Test blocked arm scales with efficiencies."""
        base = lossless_experiment(mu=0.01, config_tag=ConfigTag.A_ONLY)
        base = base.model_copy(update={"arm_a": base.arm_a.with_setting(BasisSetting.parse("X0"))})
        lossy = base.model_copy(update={"detector": DetectorModel(kappa=(0.5, 1.0, 1.0, 0.8))})
        ratio = run_exact(lossy).coincidences["D14"] / run_exact(base).coincidences["D14"]
        assert ratio == pytest.approx(0.4, rel=1e-2)

    def test_singles_single_photon_arm(self):
        """Test singles single photon arm."""
        config = lossless_experiment(config_tag=ConfigTag.A_ONLY).model_copy(
            update={"arm_a": ArmConfig(source_kind=SourceKind.SINGLE_PHOTON)}
        )
        record = run_exact(config)
        # Z0 photon: D1 or D3 with probability 1/2 each
        assert record.singles[1] == pytest.approx(0.5)
        assert record.singles[2] == 0.0
        assert record.mu_a_source == 1.0

    def test_truncated_mass_reported(self):
        """Test truncated mass reported."""
        record = run_exact(lossless_experiment(mu=0.5))
        assert 0 < record.truncated_mass < 1e-2

    def test_sampled_config_rejected(self, experiment):
        """Test sampled config rejected."""
        with pytest.raises(InvalidConfigError):
            run_exact(experiment.model_copy(update={"mode": RunMode.SAMPLED}))


class TestRunSampled:
    """Tests for Poisson-sampled counts."""

    def test_same_seed_same_counts(self, experiment):
        """Test same seed same counts."""
        config = experiment.model_copy(update={"mode": RunMode.SAMPLED, "seed": 7, "pulses": 10**7})
        first, second = run_sampled(config), run_sampled(config)
        assert first.coincidences == second.coincidences
        assert first.singles == second.singles

    def test_counts_are_integers_near_expectation(self, experiment):
        """Test counts are integers near expectation."""
        config = experiment.model_copy(update={"mode": RunMode.SAMPLED, "seed": 3, "pulses": 10**8})
        sampled = run(config)
        exact = run_exact(experiment)
        for d in (1, 2, 3, 4):
            mean = exact.singles[d] * 10**8
            assert sampled.singles[d] == int(sampled.singles[d])
            assert abs(sampled.singles[d] - mean) < 6 * math.sqrt(mean)

    def test_requires_seed(self, experiment):
        """Test requires seed."""
        with pytest.raises(InvalidConfigError):
            run_sampled(experiment.model_copy(update={"mode": RunMode.SAMPLED}))

    def test_rejects_overflowing_pulse_count(self, experiment):
        """Test rejects overflowing pulse count."""
        config = experiment.model_copy(update={"mode": RunMode.SAMPLED, "seed": 1, "pulses": MAX_PULSES * 10})
        with pytest.raises(InvalidConfigError):
            run_sampled(config)


class TestRunProtocolSet:
    """Tests for both/a_only/b_only triples."""

    def test_three_records_per_setting(self, experiment):
        """Test three records per setting."""
        records = run_protocol_set(experiment, settings_for("Z0Z1", "X0X0"))
        assert [r.config_tag for r in records] == [ConfigTag.BOTH, ConfigTag.A_ONLY, ConfigTag.B_ONLY] * 2
        assert {str(r.protocol_setting) for r in records} == {"Z0Z1", "X0X0"}
        assert len({r.triple_key for r in records}) == 2

    def test_single_arm_records_keep_settings(self, x0x0_triple):
        """Test single arm records keep settings."""
        both, a_only, b_only = x0x0_triple
        assert a_only.setting_b == both.setting_b
        assert a_only.mu_b == 0.0 and b_only.mu_a == 0.0
        assert a_only.mu_a == both.mu_a

    def test_empty_settings_rejected(self, experiment):
        """Test empty settings rejected."""
        with pytest.raises(InvalidConfigError):
            run_protocol_set(experiment, [])

    def test_sampled_records_use_distinct_streams(self, experiment):
        """Test sampled records use distinct streams."""
        config = experiment.model_copy(update={"mode": RunMode.SAMPLED, "seed": 11, "pulses": 10**8})
        records = run_protocol_set(config, settings_for("X0X0", "X0X0"))
        assert records[0].coincidences != records[3].coincidences
        again = run_protocol_set(config, settings_for("X0X0", "X0X0"))
        assert [r.coincidences for r in records] == [r.coincidences for r in again]


class TestCountRecord:
    """Tests for record validation."""

    def _payload(self, **updates) -> dict:
        payload = {
            "config_tag": "both",
            "mode": "sampled",
            "setting_a": {"basis": "X", "bit": 0},
            "setting_b": {"basis": "X", "bit": 0},
            "source_a": "wcp",
            "source_b": "wcp",
            "mu_a": 0.008,
            "mu_b": 0.008,
            "mu_a_source": 0.008,
            "mu_b_source": 0.008,
            "pulses": 1000,
            "coincidences": {label: 1.0 for label in ALL_PAIR_LABELS},
            "singles": {1: 10.0, 2: 10.0, 3: 10.0, 4: 10.0},
        }
        payload.update(updates)
        return payload

    def test_rates_divide_by_pulses(self):
        """Test rates divide by pulses."""
        record = CountRecord(**self._payload())
        assert record.coincidence_rates()["D12"] == pytest.approx(1e-3)
        assert record.single_rates()[4] == pytest.approx(1e-2)

    def test_missing_pair_rejected(self):
        """Test missing pair rejected."""
        with pytest.raises(ValidationError):
            CountRecord(**self._payload(coincidences={"D12": 1.0}))

    def test_fractional_sampled_count_rejected(self):
        """Test fractional sampled count rejected."""
        with pytest.raises(ValidationError):
            CountRecord(**self._payload(singles={1: 1.5, 2: 1.0, 3: 1.0, 4: 1.0}))

    def test_exact_rate_above_one_rejected(self):
        """Test exact rate above one rejected."""
        with pytest.raises(ValidationError):
            CountRecord(**self._payload(mode="exact"))


INVARIANT_SETTINGS = ("X0X0", "X0Y1", "Y1Y1", "Z0Z0", "Z0Z1")


def _all_rates(config: ExperimentConfig, names=INVARIANT_SETTINGS) -> list[float]:
    rates = []
    for record in run_protocol_set(config, settings_for(*names)):
        rates.extend(record.coincidences[label] for label in ALL_PAIR_LABELS)
        rates.extend(record.singles[d] for d in (1, 2, 3, 4))
    return rates


class TestExactRateInvariants:
    """Properties every exact-mode rate obeys."""

    def test_independent_of_seed_and_pulses(self, experiment):
        """Test exact rates ignore the sampling seed and pulse count."""
        reference = _all_rates(experiment)
        assert _all_rates(experiment.model_copy(update={"seed": 99, "pulses": 17})) == reference

    @pytest.mark.parametrize("detector", range(4))
    def test_non_decreasing_in_each_efficiency(self, detector):
        """Test raising one detector efficiency never lowers a rate."""
        low = [0.7, 0.7, 0.7, 0.7]
        high = list(low)
        high[detector] = 0.95
        low_rates = _all_rates(lossless_experiment(mu=0.05, detector=DetectorModel(kappa=tuple(low))))
        high_rates = _all_rates(lossless_experiment(mu=0.05, detector=DetectorModel(kappa=tuple(high))))
        for before, after in zip(low_rates, high_rates):
            assert after >= before - 1e-15

    def test_non_decreasing_in_mean_photon_number(self):
        """Test every rate grows with mu up to 0.5."""
        curves = [_all_rates(lossless_experiment(mu=mu)) for mu in (0.002, 0.01, 0.1, 0.25, 0.5)]
        for before, after in zip(curves, curves[1:]):
            for low, high in zip(before, after):
                assert high >= low - 1e-15

    def test_truncation_converged(self, experiment):
        """Test raising truncation from 4 to 6 photons moves no rate by 1e-6 relative."""
        four = _all_rates(experiment)
        six = _all_rates(experiment.model_copy(update={"detector": DetectorModel(truncation_total_photons=6)}))
        for coarse, fine in zip(four, six):
            assert coarse == pytest.approx(fine, rel=1e-6, abs=1e-30)
