import numpy as np
import pytest

from vqcpulse import (
    Circuit,
    GrapeConfig,
    HamiltonianSpec,
    MinTimeConfig,
    ParamAngle,
    PulseCache,
    analytic_gate_pulse,
    analytic_rotation_pulse,
    build_controls,
    compile_flexible,
    compile_gate_based,
    compile_grape,
    compile_strict,
    fidelity,
    gate_matrix,
    partition_flexible,
    partition_strict,
    precompute_strict,
    propagate,
    schedule_to_pulse,
    tune_hyperparameters,
    tune_plan,
    verify_schedule,
)
from vqcpulse.circuit import cx, h, rx, rz
from vqcpulse.grape import ControlPulse
from vqcpulse.partition import FIXED, PARAM_GATE, Block, PartitionPlan
from vqcpulse.pipeline import (
    CacheEntry,
    CacheMissError,
    CompiledSchedule,
    CompileError,
    GatePulseLibrary,
    Segment,
    cache_key,
    schedule_to_json,
)


@pytest.fixture(scope="module")
def cheap():
    return GrapeConfig(learning_rate=0.05, decay_rate=0.999, max_iterations=900, rng_seed=5)


def test_analytic_rz_pi_shape(spec1):
    pulse = analytic_rotation_pulse("rz", np.pi, spec1)
    assert pulse.n_steps == 7
    assert pulse.total_time == pytest.approx(0.35)
    assert np.all(pulse.amplitudes[0] == 0.0)
    assert np.all(np.abs(pulse.amplitudes[1]) <= spec1.flux_bound)
    achieved = propagate(pulse, build_controls(spec1))
    assert fidelity(achieved, gate_matrix("rz", np.pi)) == pytest.approx(1.0, abs=1e-12)


def test_analytic_zero_rotation_is_empty(spec1):
    assert analytic_rotation_pulse("rz", 0.0, spec1).n_steps == 0
    assert analytic_rotation_pulse("rx", 2 * np.pi, spec1).n_steps == 0


def test_analytic_rx_pi_duration_and_amplitude(spec1):
    pulse = analytic_rotation_pulse("rx", np.pi, spec1)
    assert pulse.total_time == pytest.approx(2.5)
    assert abs(pulse.amplitudes[0, 0]) == pytest.approx(spec1.charge_bound)


@pytest.mark.parametrize("angle", [-2.6, -0.3, 0.7, np.pi / 3, 3.0, 5.9])
@pytest.mark.parametrize("kind", ["rz", "rx"])
def test_analytic_rotation_exact_for_any_angle(kind, angle, spec1):
    pulse = analytic_rotation_pulse(kind, angle, spec1)
    achieved = propagate(pulse, build_controls(spec1))
    assert fidelity(achieved, gate_matrix(kind, angle)) == pytest.approx(1.0, abs=1e-12)


def test_analytic_rotation_duration_linear_in_angle(spec1):
    from vqcpulse.pipeline import analytic_rotation_duration

    quarter = analytic_rotation_duration("rx", np.pi / 4, spec1)
    full = analytic_rotation_duration("rx", np.pi, spec1)
    assert quarter == pytest.approx(full / 4, abs=0.05)
    assert full == pytest.approx(2.5)


@pytest.mark.parametrize("kind", ["h", "cx", "swap"])
def test_analytic_gate_identities(kind, spec2):
    from vqcpulse.pipeline import _gate_subspec

    pulse = analytic_gate_pulse(kind, None, spec2)
    achieved = propagate(pulse, build_controls(_gate_subspec(kind, spec2)))
    assert fidelity(achieved, gate_matrix(kind)) >= 0.999


def test_analytic_library_entries(analytic_library):
    assert set(analytic_library.entries) == {"h", "cx", "swap", "rx", "rz"}
    for entry in analytic_library.entries.values():
        assert entry.fidelity >= 0.999
        assert entry.duration == pytest.approx(entry.pulse.total_time)


def test_library_json_round_trip(analytic_library):
    back = GatePulseLibrary.from_json(analytic_library.to_json())
    assert back.spec_fingerprint == analytic_library.spec_fingerprint
    assert back.gate_times() == analytic_library.gate_times()


def test_compile_gate_based_single_rx(analytic_library, spec2):
    c = Circuit(2, 0, (rx(np.pi, 0),))
    schedule = compile_gate_based(c, (), analytic_library, spec2)
    assert len(schedule.segments) == 1
    assert schedule.total_duration == pytest.approx(2.5)
    assert schedule.segments[0].source == "analytic"


def test_compile_gate_based_empty_circuit(analytic_library, spec2):
    schedule = compile_gate_based(Circuit.empty(2), (), analytic_library, spec2)
    assert schedule.segments == ()
    assert schedule.total_duration == 0.0


def test_compile_gate_based_serial_chain(analytic_library, spec2):
    c = Circuit(2, 0, (h(0), cx(0, 1)))
    schedule = compile_gate_based(c, (), analytic_library, spec2)
    expected = analytic_library.duration("h") + analytic_library.duration("cx")
    assert schedule.total_duration == pytest.approx(expected)
    assert verify_schedule(schedule, c, (), spec2) >= 0.999


def test_compile_gate_based_skips_identity_rotations(analytic_library, spec2):
    c = Circuit(2, 0, (rz(0.0, 0), rx(2 * np.pi, 1)))
    schedule = compile_gate_based(c, (), analytic_library, spec2)
    assert schedule.segments == ()
    assert schedule.total_duration == 0.0


def test_compile_gate_based_parallel_overlap(analytic_library, spec2):
    c = Circuit(2, 0, (rx(np.pi, 0), rx(np.pi, 1)))
    schedule = compile_gate_based(c, (), analytic_library, spec2)
    assert schedule.total_duration == pytest.approx(2.5)
    assert verify_schedule(schedule, c, (), spec2) >= 0.999


def test_compile_gate_based_requires_coupling(analytic_library):
    spec = HamiltonianSpec(3, edges=((0, 1),))
    c = Circuit(3, 0, (cx(1, 2),))
    with pytest.raises(CompileError, match="coupling"):
        compile_gate_based(c, (), analytic_library, spec)


def test_compile_gate_based_zero_grape_calls(analytic_library, spec2):
    c = Circuit(2, 0, (h(0), cx(0, 1), rz(1.0, 1)))
    schedule = compile_gate_based(c, (), analytic_library, spec2)
    assert schedule.stats.grape_searches == 0
    assert schedule.stats.optimizer_iterations == 0


def test_merged_rotations_before_scheduling(analytic_library, spec2):
    c = Circuit(2, 0, (rx(np.pi / 2, 0), rx(np.pi / 2, 0)))
    schedule = compile_gate_based(c, (), analytic_library, spec2)
    assert len(schedule.segments) == 1
    assert schedule.total_duration == pytest.approx(2.5)


def test_precompute_and_compile_strict_end_to_end(cheap, spec1):
    c = Circuit(1, 1, (h(0), rz(ParamAngle.affine(0, 1.0), 0), h(0)))
    plan = partition_strict(c)
    cache = PulseCache()
    report = precompute_strict(plan, spec1, cheap, MinTimeConfig(), cache)
    assert report.computed == 1  # both h-blocks share one cache entry
    assert report.reused == 1
    warm = precompute_strict(plan, spec1, cheap, MinTimeConfig(), cache)
    assert warm.computed == 0
    assert warm.grape_searches == 0

    theta = np.pi / 2
    schedule = compile_strict(plan, cache, [theta], spec1, cheap)
    assert schedule.stats.grape_searches == 0
    assert schedule.stats.optimizer_iterations == 0
    assert verify_schedule(schedule, c, [theta], spec1) >= 0.997


def test_cached_pulses_reverify_against_blocks(cheap, spec1):
    c = Circuit(1, 0, (h(0), rz(0.7, 0)))
    plan = partition_strict(c)
    cache = PulseCache()
    precompute_strict(plan, spec1, cheap, MinTimeConfig(), cache)
    block = plan.blocks[0]
    entry = cache.get(cache_key(block, spec1, cheap))
    achieved = propagate(entry.pulse, build_controls(spec1))
    assert fidelity(achieved, block.unitary()) >= cheap.target_fidelity


def test_compile_strict_duration_arithmetic(spec1, cheap):
    block = Block(FIXED, None, (0,), Circuit(1, 0, (h(0),)))
    gate = Block(
        PARAM_GATE, 0, (0,), Circuit(1, 1, (rz(ParamAngle.affine(0, 1.0), 0),))
    )
    parent = Circuit(1, 1, (h(0), rz(ParamAngle.affine(0, 1.0), 0)))
    plan = PartitionPlan((block, gate), parent)
    cache = PulseCache()
    fake = ControlPulse(0.05, np.zeros((2, 100)))  # 5.0 ns placeholder pulse
    cache.put(
        cache_key(block, spec1, cheap),
        CacheEntry(fake, ("charge[0]", "flux[0]"), 5.0, 1.0, block.text()),
    )
    schedule = compile_strict(plan, cache, [np.pi], spec1, cheap)
    assert schedule.total_duration == pytest.approx(5.35)
    zero = compile_strict(plan, cache, [0.0], spec1, cheap)
    assert zero.total_duration == pytest.approx(5.0)


def test_compile_strict_cache_miss_names_block(spec1, cheap):
    c = Circuit(1, 0, (h(0),))
    plan = partition_strict(c)
    with pytest.raises(CacheMissError, match="cache miss for block"):
        compile_strict(plan, PulseCache(), (), spec1, cheap)


def test_cache_persists_to_disk(tmp_path, spec1, cheap):
    c = Circuit(1, 0, (h(0),))
    plan = partition_strict(c)
    cache = PulseCache(tmp_path / "cache")
    precompute_strict(plan, spec1, cheap, MinTimeConfig(), cache)
    reloaded = PulseCache(tmp_path / "cache")
    key = cache_key(plan.blocks[0], spec1, cheap)
    entry = reloaded.get(key)
    assert entry is not None
    assert entry.fidelity >= cheap.target_fidelity
    assert len(reloaded) == 1


def test_precompute_fallback_uses_gate_pulses(spec1, analytic_library):
    hopeless = GrapeConfig(max_iterations=1, learning_rate=0.05, rng_seed=1)
    c = Circuit(1, 0, (h(0),))
    plan = partition_strict(c)
    cache = PulseCache()
    report = precompute_strict(
        plan, spec1, hopeless, MinTimeConfig(), cache, library=analytic_library
    )
    assert report.fallbacks == 1
    entry = cache.get(cache_key(plan.blocks[0], spec1, hopeless))
    assert entry.source == "gate_fallback"
    assert entry.fidelity >= 0.999


def test_precompute_without_fallback_propagates(spec1):
    hopeless = GrapeConfig(max_iterations=1, learning_rate=0.05, rng_seed=1)
    c = Circuit(1, 0, (h(0),))
    plan = partition_strict(c)
    with pytest.raises(CompileError, match="precompiling block"):
        precompute_strict(plan, spec1, hopeless, MinTimeConfig(), PulseCache())


def test_verify_empty_schedule_is_exact(spec2):
    schedule = CompiledSchedule(2, "strict", (), 0.0)
    assert verify_schedule(schedule, Circuit.empty(2), (), spec2) == pytest.approx(1.0)


def test_verify_gate_based_hadamard(analytic_library, spec2):
    c = Circuit(2, 0, (h(0),))
    schedule = compile_gate_based(c, (), analytic_library, spec2)
    assert verify_schedule(schedule, c, (), spec2) >= 0.999


def test_overlapping_same_field_segments_rejected(spec1):
    pulse = analytic_rotation_pulse("rz", np.pi, spec1)
    seg1 = Segment(pulse, ("charge[0]", "flux[0]"), (0,), 0.0, "analytic")
    seg2 = Segment(pulse, ("charge[0]", "flux[0]"), (0,), 0.1, "analytic")
    schedule = CompiledSchedule(1, "gate", (seg1, seg2), 0.45)
    with pytest.raises(CompileError, match="overlapping"):
        schedule_to_pulse(schedule, spec1)


def test_schedule_json_meta(analytic_library, spec2):
    c = Circuit(2, 0, (h(0),))
    schedule = compile_gate_based(c, (), analytic_library, spec2)
    payload = schedule_to_json(schedule, spec2, fidelity=0.9995, circuit="demo")
    assert payload["meta"]["mode"] == "gate"
    assert payload["meta"]["circuit"] == "demo"
    assert payload["fidelity"] == 0.9995
    assert payload["total_time_ns"] == pytest.approx(schedule.total_duration)


def _rz_block():
    c = Circuit(1, 1, (rz(ParamAngle.affine(0, 1.0), 0),))
    return partition_flexible(c).blocks[0], c


def test_tune_singleton_grid(spec1, cheap):
    block, _ = _rz_block()
    entry = tune_hyperparameters(block, [np.pi / 2], [(0.05, 0.999)], spec1, cheap, 0.4)
    assert (entry.learning_rate, entry.decay_rate) == (0.05, 0.999)


def test_tune_returns_grid_member(spec1, cheap):
    block, _ = _rz_block()
    grid = [(lr, 0.9999) for lr in (0.001, 0.03, 0.3)]
    entry = tune_hyperparameters(block, [np.pi / 4, np.pi], grid, spec1, cheap, 0.4)
    assert (entry.learning_rate, entry.decay_rate) in grid
    assert len(entry.evaluations) == len(grid)


def test_tuned_hyperparameters_robust_across_angles(spec1):
    block, _ = _rz_block()
    budget = GrapeConfig(max_iterations=250, learning_rate=0.05, rng_seed=2)
    grid = [(float(lr), 0.9999) for lr in np.logspace(-3, 0, 7)]
    entry = tune_hyperparameters(
        block, [np.pi / 4, np.pi / 2, np.pi], grid, spec1, budget, 0.4
    )
    by_angle_rank = []
    for angle_idx in (0, 2):  # pi/4 and pi
        ranked = sorted(
            entry.evaluations,
            key=lambda e: (
                e.per_angle_infidelity[angle_idx],
                e.per_angle_iterations[angle_idx],
                e.learning_rate,
            ),
        )
        by_angle_rank.append([e.learning_rate for e in ranked])
    assert by_angle_rank[0][0] in by_angle_rank[1][:3]


def test_tune_rejects_empty_inputs(spec1, cheap):
    block, _ = _rz_block()
    with pytest.raises(CompileError, match="nonempty"):
        tune_hyperparameters(block, [], [(0.1, 1.0)], spec1, cheap, 0.4)
    with pytest.raises(CompileError, match="grid"):
        tune_hyperparameters(block, [0.3], [], spec1, cheap, 0.4)


def test_compile_flexible_counts_searches(spec1, cheap):
    c = Circuit(
        1,
        2,
        (
            h(0),
            rz(ParamAngle.affine(0, 1.0), 0),
            rx(ParamAngle.affine(1, 2.0), 0),
        ),
    )
    plan = partition_flexible(c)
    assert len(plan.blocks) == 2
    tuned = tune_plan(plan, spec1, cheap, grid=[(0.05, 0.999)], n_samples=1)
    theta = [0.8, -0.4]
    schedule = compile_flexible(plan, tuned, theta, spec1, cheap)
    assert schedule.stats.grape_searches == len(plan.blocks)
    assert schedule.stats.optimizer_iterations > 0
    # two blocks at >= 0.999 each; mismatch angles may add coherently
    assert verify_schedule(schedule, c, theta, spec1) >= 0.996


def test_compile_flexible_missing_tuned_entry(spec1, cheap):
    from vqcpulse.pipeline import TunedHyperparams

    block, c = _rz_block()
    plan = partition_flexible(c)
    with pytest.raises(CompileError, match="missing tuned hyperparameters"):
        compile_flexible(plan, TunedHyperparams(), [0.3], spec1, cheap)


def test_tuned_save_load_round_trip(tmp_path, spec1, cheap):
    block, c = _rz_block()
    plan = partition_flexible(c)
    tuned = tune_plan(plan, spec1, cheap, grid=[(0.05, 0.999), (0.2, 1.0)], n_samples=1)
    path = tmp_path / "tuned.json"
    tuned.save(path)
    from vqcpulse.pipeline import TunedHyperparams

    back = TunedHyperparams.load(path)
    key = next(iter(tuned.entries))
    assert back.get(key).learning_rate == tuned.get(key).learning_rate
    assert back.get(key).evaluations == tuned.get(key).evaluations


def test_precompute_four_distinct_blocks(spec1, cheap):
    t = ParamAngle.affine
    c = Circuit(
        1,
        1,
        (
            h(0),
            rz(t(0, 1.0), 0),
            rz(0.3, 0),
            rz(t(0, 1.0), 0),
            rx(0.7, 0),
            rz(t(0, 1.0), 0),
            h(0),
            rz(1.1, 0),
            rz(t(0, 1.0), 0),
        ),
    )
    plan = partition_strict(c)
    distinct = {b.content_hash() for b in plan.blocks if b.tag == FIXED}
    assert len(distinct) == 4
    cache = PulseCache()
    report = precompute_strict(plan, spec1, cheap, MinTimeConfig(), cache)
    assert report.computed == 4
    assert len(cache) == 4


@pytest.mark.slow
def test_strict_three_fixed_block_fidelity_bound(spec2, analytic_library):
    cfg = GrapeConfig(learning_rate=0.05, decay_rate=0.999, max_iterations=1200, rng_seed=6)
    t = ParamAngle.affine
    c = Circuit(
        2,
        2,
        (
            h(0),
            cx(0, 1),
            rz(t(0, 1.0), 1),
            h(1),
            cx(0, 1),
            rz(t(1, 1.0), 0),
            cx(0, 1),
            h(0),
        ),
    )
    plan = partition_strict(c)
    assert sum(1 for b in plan.blocks if b.tag == FIXED) == 3
    cache = PulseCache()
    precompute_strict(plan, spec2, cfg, MinTimeConfig(), cache, library=analytic_library)
    theta = [0.9, -1.7]
    schedule = compile_strict(plan, cache, theta, spec2, cfg)
    end_to_end = verify_schedule(schedule, c, theta, spec2)
    # Three blocks at barely 0.999 each: the naive product bound 0.997 is
    # empirically violated by ~1e-3 because the per-block mismatch angles
    # correlate; the coherent bound cos^2(sum of mismatch angles) holds.
    fidelities = [
        cache.get(cache_key(b, spec2, cfg)).fidelity for b in plan.blocks if b.tag == FIXED
    ]
    coherent_bound = np.cos(sum(np.arccos(np.sqrt(f)) for f in fidelities)) ** 2
    assert end_to_end >= coherent_bound - 1e-9
    assert end_to_end >= 0.99


def test_precompute_parallel_jobs(spec1, cheap):
    c = Circuit(1, 1, (h(0), rz(ParamAngle.affine(0, 1.0), 0), rz(0.3, 0)))
    plan = partition_strict(c)
    serial, parallel = PulseCache(), PulseCache()
    precompute_strict(plan, spec1, cheap, MinTimeConfig(), serial, jobs=1)
    precompute_strict(plan, spec1, cheap, MinTimeConfig(), parallel, jobs=2)
    for block in plan.blocks:
        if block.tag != FIXED:
            continue
        key = cache_key(block, spec1, cheap)
        np.testing.assert_array_equal(
            serial.get(key).pulse.amplitudes, parallel.get(key).pulse.amplitudes
        )


def test_tune_parallel_jobs_deterministic(spec1, cheap):
    c = Circuit(
        1, 2, (rz(ParamAngle.affine(0, 1.0), 0), rx(ParamAngle.affine(1, 1.0), 0))
    )
    plan = partition_flexible(c)
    grid = [(0.05, 0.999), (0.2, 0.999)]
    a = tune_plan(plan, spec1, cheap, grid=grid, n_samples=2, jobs=1)
    b = tune_plan(plan, spec1, cheap, grid=grid, n_samples=2, jobs=2)
    assert a.to_json() == b.to_json()


def test_compile_grape_single_gate(spec1, cheap):
    c = Circuit(1, 0, (rz(np.pi, 0),))
    schedule = compile_grape(c, (), spec1, cheap)
    assert schedule.stats.grape_searches == 1
    assert schedule.total_duration <= 0.4 + 1e-9
    assert verify_schedule(schedule, c, (), spec1) >= cheap.target_fidelity


def test_compile_grape_identity_collapses_to_nothing(spec1, cheap):
    c = Circuit(1, 0, (rz(0.0, 0),))
    schedule = compile_grape(c, (), spec1, cheap)
    assert schedule.total_duration == 0.0
