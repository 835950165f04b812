import pytest
from hypothesis import given, strategies as st

from cascadesim.core import SimulationError
from cascadesim.engine import Engine, EventKind, SimEvent


def collector(log):
    def handler(payload):
        log.append(payload)
    return handler


class TestScheduleAndRun:
    def test_empty_queue_returns_current_clock(self):
        engine = Engine()
        assert engine.run() == 0.0

    def test_events_dispatch_in_time_order(self):
        engine, seen = Engine(), []
        handler = collector(seen)
        for t in (5.0, 3.0, 9.0):
            engine.schedule(t, EventKind.WINDOW_TICK, handler, t)
        engine.run()
        assert seen == [3.0, 5.0, 9.0]

    def test_equal_time_fifo_by_scheduling_order(self):
        engine, seen = Engine(), []
        handler = collector(seen)
        engine.schedule(10.0, EventKind.WINDOW_TICK, handler, "A")
        engine.schedule(10.0, EventKind.WINDOW_TICK, handler, "B")
        engine.run()
        assert seen == ["A", "B"]

    def test_schedule_at_now_runs_next_among_ties(self):
        engine, seen = Engine(), []

        def first(_):
            seen.append("first")
            engine.schedule(engine.now_ms, EventKind.WINDOW_TICK,
                            collector(seen), "child")

        engine.schedule(5.0, EventKind.WINDOW_TICK, first)
        engine.schedule(5.0, EventKind.WINDOW_TICK, collector(seen), "sibling")
        engine.run()
        assert seen == ["first", "sibling", "child"]

    def test_scheduling_into_past_is_fatal(self):
        engine = Engine()
        engine.schedule(10.0, EventKind.WINDOW_TICK,
                        lambda _: engine.schedule(9.0, EventKind.WINDOW_TICK, None))
        with pytest.raises(SimulationError, match="into the past"):
            engine.run()

    def test_until_bound_stops_early(self):
        engine, seen = Engine(), []
        for t in (1.0, 2.0, 50.0):
            engine.schedule(t, EventKind.WINDOW_TICK, collector(seen), t)
        assert engine.run(until=10.0) == 10.0
        assert seen == [1.0, 2.0]
        assert engine.pending() == 1

    def test_run_end_stops_and_reports_drain(self):
        engine, seen = Engine(), []
        engine.schedule(1.0, EventKind.WINDOW_TICK, collector(seen), 1)
        engine.schedule(2.0, EventKind.RUN_END, None)
        engine.schedule(3.0, EventKind.WINDOW_TICK, collector(seen), 3)
        engine.run()
        assert seen == [1]
        assert engine.dispatched == 2
        assert engine.pending() == 1

    @given(st.lists(st.floats(0, 1e6), max_size=40))
    def test_clock_monotone_for_any_schedule(self, times):
        engine = Engine()
        observed = []
        for t in times:
            engine.schedule(t, EventKind.WINDOW_TICK,
                            lambda _, e=engine: observed.append(e.now_ms))
        engine.run()
        assert observed == sorted(observed)


class TestDeterminism:
    @staticmethod
    def run_once():
        log: list[SimEvent] = []
        engine = Engine(event_log=log)

        def chain(depth):
            if depth < 5:
                engine.schedule(engine.now_ms + 1.5, EventKind.WINDOW_TICK,
                                lambda _: chain(depth + 1), actor=f"a{depth}")
                engine.schedule(engine.now_ms + 1.5, EventKind.BATCH_COMPLETE,
                                lambda _: None, actor="server")

        engine.schedule(0.0, EventKind.WINDOW_TICK, lambda _: chain(0), actor="root")
        engine.run()
        return log

    def test_replay_log_identical(self):
        assert self.run_once() == self.run_once()

    def test_log_carries_time_seq_kind_actor(self):
        log = self.run_once()
        assert all(isinstance(e, SimEvent) for e in log)
        seqs = [e.seq for e in log]
        assert len(set(seqs)) == len(seqs)  # (time, seq) is a strict total order
        times = [e.time_ms for e in log]
        assert times == sorted(times)

    def test_every_event_dispatched_exactly_once(self):
        engine, seen = Engine(), []
        for i in range(100):
            engine.schedule(float(i % 7), EventKind.WINDOW_TICK, collector(seen), i)
        engine.run()
        assert sorted(seen) == list(range(100))
        assert engine.dispatched == 100
        assert engine.pending() == 0
