import pytest

from entwatch.baseline import fit_baseline
from entwatch.pipeline import TraceProcessor, collect_trace_deviations, fit_attack_model
from entwatch.simulate import ScenarioSpec, simulate_scenario

BASELINE_SEEDS = tuple(range(5000, 5008))


@pytest.fixture(scope="session")
def benign_profile():
    """Baseline fit from a handful of seeded benign traces."""
    pooled = {}
    for seed in BASELINE_SEEDS:
        trace = simulate_scenario(ScenarioSpec("benign_edit", seed=seed))
        for level_id, devs in collect_trace_deviations(trace.records).items():
            pooled.setdefault(level_id, []).extend(devs)
    return fit_baseline(pooled, created_at=0.0, inputs=[f"seed:{s}" for s in BASELINE_SEEDS])


@pytest.fixture(scope="session")
def attack_model():
    return fit_attack_model()


@pytest.fixture(scope="session")
def run_detection(benign_profile, attack_model):
    def _run(trace, name="trace"):
        proc = TraceProcessor(
            profile=benign_profile,
            attack_model=attack_model,
            trace_name=name,
            label=trace.meta.label,
            onset_at=trace.meta.onset_at,
        )
        proc.process(trace.records)
        return proc.finish()

    return _run
