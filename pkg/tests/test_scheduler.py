import pytest
from hypothesis import given, strategies as st

from cascadesim.core import ValidationError, default_server_catalog
from cascadesim.engine import Engine, EventKind
from cascadesim.scheduler import (PolicyConfig, PolicyKind, Scheduler, SwitchLimits,
                                  ThresholdState, apply_multiplier,
                                  continuous_update, multitasc_step_delta,
                                  switch_decision, switch_target)


class TestContinuousUpdate:
    def test_downward_correction(self):
        assert continuous_update(95, 80, 0.005, 0.5) == pytest.approx(0.425)

    def test_zero_error(self):
        assert continuous_update(95, 95, 0.005, 0.5) == 0.5

    def test_upward_correction(self):
        assert continuous_update(95, 100, 0.005, 0.5) == pytest.approx(0.525)


class TestApplyMultiplier:
    def test_growth_branch(self):
        assert apply_multiplier(95, 100, 0.525, 1.0, 10) == (0.525, 1.01)

    def test_compounding(self):
        final, m = apply_multiplier(95, 100, 0.525, 1.01, 10)
        assert final == pytest.approx(0.53025)
        assert m == pytest.approx(1.0201)

    def test_reset_branch(self):
        assert apply_multiplier(95, 80, 0.425, 1.05, 10) == (0.425, 1.0)

    def test_equality_takes_reset_branch(self):
        assert apply_multiplier(95, 95, 0.6, 1.5, 10) == (0.6, 1.0)

    def test_clamps_to_unit_interval(self):
        final, _ = apply_multiplier(95, 100, 0.9, 1.5, 10)
        assert final == 1.0
        final, _ = apply_multiplier(95, 80, -0.2, 1.0, 10)
        assert final == 0.0

    def test_zero_active_devices_rejected(self):
        with pytest.raises(ValidationError, match=">= 1"):
            apply_multiplier(95, 100, 0.5, 1.0, 0)

    @given(st.floats(0, 100), st.floats(0, 1))
    def test_reset_whenever_at_or_below_target(self, sr, thr):
        _, m = apply_multiplier(95.0, min(sr, 95.0), thr, 1.7, 5)
        assert m == 1.0


class TestSwitchDecision:
    LIMITS = SwitchLimits(c_lower=0.3, c_upper={"low": 0.7, "mid": 0.7, "high": 0.7})

    @staticmethod
    def states(per_tier):
        out = []
        for tier, thresholds in per_tier.items():
            for i, c in enumerate(thresholds):
                out.append(ThresholdState(device_id=f"{tier}{i}", threshold=c,
                                          tier=tier, sr_target=95.0))
        return out

    def test_all_eight_combinations(self):
        below, above = (0.1, 0.2), (0.8, 0.9)
        for bits in range(8):
            tiers = {tier: (below if bits >> k & 1 else above)
                     for k, tier in enumerate(("low", "mid", "high"))}
            expected = -1 if bits else +1
            assert switch_decision(self.states(tiers), self.LIMITS) == expected

    def test_some_tier_all_below_wins_regardless_of_others(self):
        s = self.states({"low": (0.02, 0.03), "mid": (0.8, 0.9), "high": (0.5, 0.9)})
        assert switch_decision(s, self.LIMITS) == -1

    def test_mixed_tier_blocks_both(self):
        s = self.states({"low": (0.5, 0.02), "mid": (0.8, 0.9), "high": (0.8, 0.9)})
        assert switch_decision(s, self.LIMITS) == 0

    def test_boundary_values_do_not_trigger(self):
        # c == c_lower is not below; c == c_upper is not above
        s = self.states({"low": (0.3, 0.3), "mid": (0.7, 0.7), "high": (0.8, 0.8)})
        assert switch_decision(s, self.LIMITS) == 0

    def test_permutation_within_tier_invariant(self):
        a = self.states({"low": (0.1, 0.9), "mid": (0.8, 0.85), "high": (0.9, 0.95)})
        b = self.states({"low": (0.9, 0.1), "mid": (0.85, 0.8), "high": (0.95, 0.9)})
        assert switch_decision(a, self.LIMITS) == switch_decision(b, self.LIMITS)

    def test_requires_active_devices(self):
        with pytest.raises(ValidationError, match="at least one"):
            switch_decision([], self.LIMITS)

    def test_missing_tier_limit_rejected(self):
        s = self.states({"other": (0.5,)})
        with pytest.raises(ValidationError, match="other"):
            switch_decision(s, self.LIMITS)

    def test_limits_invariant(self):
        with pytest.raises(ValidationError, match="c_lower"):
            SwitchLimits(c_lower=0.8, c_upper={"low": 0.7})


class TestSwitchTarget:
    CATALOG = default_server_catalog()

    def test_faster_from_efficientnet_is_inception(self):
        assert switch_target(self.CATALOG, "efficientnetb3", -1) == "inceptionv3"

    def test_heavier_from_inception_is_efficientnet(self):
        two = {k: v for k, v in self.CATALOG.items()
               if k in ("inceptionv3", "efficientnetb3")}
        assert switch_target(two, "inceptionv3", +1) == "efficientnetb3"

    def test_one_step_toward_higher_accuracy(self):
        # full catalog: next step up from inceptionv3 is efficientnetb3, not deit
        assert switch_target(self.CATALOG, "inceptionv3", +1) == "efficientnetb3"

    def test_no_candidate_returns_none(self):
        assert switch_target(self.CATALOG, "deit_base_distilled", -1) is None
        assert switch_target(self.CATALOG, "deit_base_distilled", +1) is None

    def test_zero_direction(self):
        assert switch_target(self.CATALOG, "inceptionv3", 0) is None


class TestMultitascStepDelta:
    def test_mean_above_optimal_steps_down(self):
        assert multitasc_step_delta([64] * 10, 32, 0.05) == -0.05

    def test_mean_below_optimal_steps_up(self):
        assert multitasc_step_delta([8] * 10, 32, 0.05) == 0.05

    def test_empty_history_no_change(self):
        assert multitasc_step_delta([], 32, 0.05) is None

    def test_exact_mean_unchanged(self):
        assert multitasc_step_delta([32, 32], 32, 0.05) == 0.0


class StubDevice:
    def __init__(self, device_id):
        self.device_id = device_id
        self.applied = []
        self.fully_done = True

    def apply_threshold(self, value):
        self.applied.append(value)


def make_scheduler(policy_kind=PolicyKind.MULTITASC_PP, n_devices=2, **kw):
    engine = Engine()
    scheduler = Scheduler(engine, PolicyConfig(kind=policy_kind, **kw),
                          window_ms=1500.0)
    devices = [StubDevice(f"d{i}") for i in range(n_devices)]
    for d in devices:
        scheduler.register_device(d, "low", 95.0, 0.5)
    return engine, scheduler, devices


class TestHandleSrUpdate:
    def test_composition_low_sr(self):
        engine, scheduler, devices = make_scheduler()
        scheduler.handle_sr_update("d0", 80.0, 0.0)
        engine.run()
        assert devices[0].applied == [pytest.approx(0.425)]
        assert scheduler.states["d0"].multiplier == 1.0

    def test_clamped_at_one(self):
        engine, scheduler, devices = make_scheduler()
        scheduler.states["d0"].threshold = 1.0
        scheduler.states["d0"].multiplier = 1.5
        scheduler.handle_sr_update("d0", 100.0, 0.0)
        engine.run()
        assert devices[0].applied == [1.0]

    def test_multiplier_resets_on_alternating_stream(self):
        engine, scheduler, _ = make_scheduler()
        for sr in (100.0, 80.0, 100.0, 80.0):
            scheduler.handle_sr_update("d0", sr, 0.0)
            if sr == 80.0:
                assert scheduler.states["d0"].multiplier == 1.0
            else:
                assert scheduler.states["d0"].multiplier > 1.0

    def test_fixed_point(self):
        engine, scheduler, devices = make_scheduler()
        scheduler.handle_sr_update("d0", 95.0, 0.0)
        engine.run()
        assert devices[0].applied == [0.5]
        assert scheduler.states["d0"].multiplier == 1.0

    def test_unknown_device_fatal(self):
        _, scheduler, _ = make_scheduler()
        with pytest.raises(ValidationError, match="unregistered"):
            scheduler.handle_sr_update("ghost", 95.0, 0.0)

    def test_static_policy_never_moves_thresholds(self):
        engine, scheduler, devices = make_scheduler(policy_kind=PolicyKind.STATIC)
        for sr in (10.0, 100.0, 50.0):
            scheduler.handle_sr_update("d0", sr, 0.0)
        engine.run()
        assert devices[0].applied == []
        assert scheduler.states["d0"].threshold == 0.5

    def test_step_policy_records_activity_only(self):
        engine, scheduler, devices = make_scheduler(
            policy_kind=PolicyKind.MULTITASC_STEP)
        scheduler.handle_sr_update("d0", 10.0, 100.0)
        engine.run()
        assert devices[0].applied == []
        assert scheduler.states["d0"].active

    @given(st.floats(0, 100), st.floats(0, 100))
    def test_monotone_in_sr_update(self, sr1, sr2):
        lo, hi = sorted((sr1, sr2))
        results = []
        for sr in (lo, hi):
            engine, scheduler, devices = make_scheduler()
            scheduler.handle_sr_update("d0", sr, 0.0)
            engine.run()
            results.append(devices[0].applied[0])
        assert results[0] <= results[1] + 1e-12

    def test_update_log_rows(self):
        engine, scheduler, _ = make_scheduler()
        scheduler.handle_sr_update("d0", 80.0, 1500.0)
        assert scheduler.update_log == [
            (1500.0, "d0", 80.0, pytest.approx(0.425), 1.0, 2)]


class TestMarkInactive:
    def test_two_silent_windows_deactivate(self):
        _, scheduler, _ = make_scheduler()
        scheduler.handle_sr_update("d0", 95.0, 0.0)
        scheduler.handle_sr_update("d1", 95.0, 1500.0)
        scheduler.mark_inactive(3100.0)
        assert not scheduler.states["d0"].active  # silent for > 2 windows
        assert scheduler.states["d1"].active

    def test_one_silent_window_keeps_active(self):
        _, scheduler, _ = make_scheduler()
        scheduler.handle_sr_update("d0", 95.0, 0.0)
        scheduler.mark_inactive(1500.0)
        assert scheduler.states["d0"].active

    def test_reactivated_on_next_update(self):
        _, scheduler, _ = make_scheduler()
        scheduler.mark_inactive(10_000.0)
        assert scheduler.active_count() == 0
        scheduler.handle_sr_update("d0", 95.0, 10_000.0)
        assert scheduler.states["d0"].active
        assert scheduler.active_count() == 1

    def test_multiplier_uses_active_count(self):
        engine, scheduler, devices = make_scheduler(n_devices=10)
        scheduler.mark_inactive(10_000.0)
        scheduler.handle_sr_update("d0", 100.0, 10_000.0)  # only d0 active: n=1
        assert scheduler.states["d0"].multiplier == pytest.approx(1.1)
