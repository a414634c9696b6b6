import numpy as np
import pytest

from entwatch.entropy import shannon_entropy
from entwatch.errors import InvalidSpec
from entwatch.simulate import (
    ScenarioSpec,
    simulate_scenario,
    solve_mixture_weights,
    synthesize_histogram,
)
from entwatch.traces import write_trace


def payload_entropies(trace):
    return [(r.timestamp, shannon_entropy(r.histogram)) for r in trace.records if r.bytes > 0]


def window_mean(pairs, lo, hi):
    values = [e for t, e in pairs if lo <= t < hi]
    assert values, f"no payload records in [{lo}, {hi})"
    return sum(values) / len(values)


class TestSynthesis:
    @pytest.mark.parametrize("target", [0.5, 1.0, 2.1, 4.5, 6.3, 7.8])
    def test_hits_target_entropy(self, target):
        hist = synthesize_histogram(target, 4096, heavy_byte=65)
        assert shannon_entropy(hist) == pytest.approx(target, abs=0.05)
        assert hist.total == 4096

    def test_extremes(self):
        assert shannon_entropy(synthesize_histogram(0.0, 1024, 0)) == 0.0
        assert shannon_entropy(synthesize_histogram(8.0, 256 * 16, 0)) == pytest.approx(8.0, abs=1e-6)

    def test_mixture_solver_is_monotone(self):
        targets = np.linspace(0.0, 8.0, 33)
        lams = solve_mixture_weights(targets)
        assert (np.diff(lams) >= 0).all()

    def test_invalid_target(self):
        with pytest.raises(InvalidSpec):
            synthesize_histogram(9.0, 100, 0)


class TestSpecValidation:
    def test_unknown_kind(self):
        with pytest.raises(InvalidSpec):
            ScenarioSpec("nosuch", seed=1)

    def test_ramp_ordering(self):
        with pytest.raises(InvalidSpec):
            ScenarioSpec("ransomware", seed=1, ramp=(7.8, 2.1))
        with pytest.raises(InvalidSpec):
            ScenarioSpec("ransomware", seed=1, ramp=(2.1, 9.0))

    def test_seed_is_64_bit(self):
        with pytest.raises(InvalidSpec):
            ScenarioSpec("benign_edit", seed=2 ** 64)

    def test_default_file_count_scales_with_duration(self):
        assert ScenarioSpec("benign_edit", seed=1, duration=100.0).file_count == 20
        assert ScenarioSpec("benign_edit", seed=1, duration=60.0).file_count == 12


class TestDeterminism:
    @pytest.mark.parametrize("kind", ["benign_edit", "compressor", "ransomware"])
    def test_identical_specs_identical_files(self, kind, tmp_path):
        spec = ScenarioSpec(kind, seed=20240317)
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_trace(simulate_scenario(spec), a)
        write_trace(simulate_scenario(spec), b)
        assert a.read_bytes() == b.read_bytes()

    def test_different_seeds_differ(self, tmp_path):
        a = simulate_scenario(ScenarioSpec("benign_edit", seed=1))
        b = simulate_scenario(ScenarioSpec("benign_edit", seed=2))
        assert a != b


class TestBenignScenario:
    def test_every_record_below_five_and_a_half_bits(self):
        for seed in range(20):
            trace = simulate_scenario(ScenarioSpec("benign_edit", seed=seed))
            assert all(e <= 5.5 for _, e in payload_entropies(trace))

    def test_spreads_across_target_dirs(self):
        trace = simulate_scenario(ScenarioSpec("benign_edit", seed=5))
        dirs = {r.source_path.rsplit("/", 1)[0] for r in trace.records}
        assert dirs == set(trace.meta.target_dirs)

    def test_label(self):
        assert simulate_scenario(ScenarioSpec("benign_edit", seed=5)).meta.label == "benign"


class TestCompressorScenario:
    def test_single_output_path(self):
        trace = simulate_scenario(ScenarioSpec("compressor", seed=5))
        assert len({r.source_path for r in trace.records}) == 1

    def test_low_entropy_header_then_high_entropy_body(self):
        trace = simulate_scenario(ScenarioSpec("compressor", seed=5))
        pairs = payload_entropies(trace)
        assert pairs[0][1] < 3.0
        body = [e for _, e in pairs[1:]]
        assert min(body) > 7.4

    def test_labeled_benign(self):
        assert simulate_scenario(ScenarioSpec("compressor", seed=5)).meta.label == "benign"


class TestRansomwareScenario:
    def test_onset_at_ten_percent(self):
        trace = simulate_scenario(ScenarioSpec("ransomware", seed=5))
        assert trace.meta.onset_at == pytest.approx(0.1 * trace.meta.duration)
        assert trace.meta.label == "ransomware"
        assert trace.meta.ramp == (2.1, 7.8)

    def test_ramp_window_means(self):
        for seed in range(10):
            trace = simulate_scenario(ScenarioSpec("ransomware", seed=seed))
            pairs = payload_entropies(trace)
            onset, duration = trace.meta.onset_at, trace.meta.duration
            assert window_mean(pairs, onset, onset + 1.0) == pytest.approx(2.1, abs=0.2)
            assert window_mean(pairs, duration - 1.0, duration) == pytest.approx(7.8, abs=0.2)

    def test_contains_rename_ops(self):
        trace = simulate_scenario(ScenarioSpec("ransomware", seed=5))
        renames = [r for r in trace.records if r.op == "rename"]
        assert renames
        assert all(r.bytes == 0 and r.timestamp >= trace.meta.onset_at for r in renames)

    def test_label_soundness(self):
        # some contiguous post-onset stretch must sit well above the pre-onset mean
        for seed in range(10):
            trace = simulate_scenario(ScenarioSpec("ransomware", seed=seed))
            pairs = payload_entropies(trace)
            onset, duration = trace.meta.onset_at, trace.meta.duration
            pre = window_mean(pairs, 0.0, onset)
            tail = [window_mean(pairs, t, t + 1.0) for t in np.arange(duration - 10.0, duration - 1.0)]
            assert all(v >= pre + 2.0 for v in tail)

    def test_pre_onset_looks_benign(self):
        trace = simulate_scenario(ScenarioSpec("ransomware", seed=5))
        pre = [e for t, e in payload_entropies(trace) if t < trace.meta.onset_at]
        assert all(4.0 <= e <= 5.0 for e in pre)

    def test_custom_ramp_respected(self):
        trace = simulate_scenario(ScenarioSpec("ransomware", seed=5, ramp=(1.0, 6.0)))
        pairs = payload_entropies(trace)
        duration = trace.meta.duration
        assert window_mean(pairs, duration - 1.0, duration) == pytest.approx(6.0, abs=0.2)
