"""
Gait feature tests.
Run with: pytest tests/test_gaitfeat.py -v
"""

import numpy as np
import pandas as pd
import pytest

from app.models.records import RoomSequence
from app.models.schemas import MedicationSchedule, MedState, Room, ScheduleWindow, Transition
from app.services.gaitfeat import (
    aggregate_features,
    extract_transitions,
    mean_transition_table,
    on_off_means,
    predictions_to_sequence,
    read_gait_rows,
    transitions_frame,
    write_gait_rows,
)

K, H, D, L, S = 0, 1, 2, 3, 4
HOUR = 3_600_000


def sequence(*runs, start_ms=0):
    rooms = np.concatenate([np.full(n, room) for room, n in runs])
    return RoomSequence("PD01", start_ms + np.arange(len(rooms), dtype=np.int64) * 200, rooms)


def transition(duration, start_ms, a=Room.KITCHEN, b=Room.LIVING):
    return Transition(from_room=a, to_room=b, start_ms=start_ms, end_ms=start_ms + int(duration * 1000), duration_s=duration)


def schedule(days, off):
    return MedicationSchedule(
        participant="PD01",
        windows=[ScheduleWindow(day=d, slot=s, state=MedState.OFF if (d, s) == off else MedState.ON)
                 for d in range(1, days + 1) for s in range(4)],
    )


class TestExtractTransitions:
    """Test hallway transition detection."""

    def test_single_transition(self):
        """Twenty-five hallway steps between kitchen and living last 5 s."""
        found = extract_transitions(sequence((K, 10), (H, 25), (L, 10)))
        assert len(found) == 1
        t = found[0]
        assert (t.from_room, t.to_room) == (Room.KITCHEN, Room.LIVING)
        assert t.duration_s == pytest.approx(5.0)
        assert (t.start_ms, t.end_ms) == (2000, 7000)

    def test_no_hallway(self):
        """Without hallway steps there are no transitions."""
        assert extract_transitions(sequence((K, 10), (L, 10), (D, 5))) == []

    def test_sixty_second_cap(self):
        """300 steps (60.0 s) are kept and 301 steps (60.2 s) discarded."""
        assert len(extract_transitions(sequence((K, 1), (H, 300), (L, 1)))) == 1
        assert extract_transitions(sequence((K, 1), (H, 301), (L, 1))) == []

    def test_same_room_both_sides(self):
        """Leaving and re-entering the same room is not a transition."""
        assert extract_transitions(sequence((K, 5), (H, 10), (K, 5))) == []

    def test_untracked_room(self):
        """Runs touching the stairs are ignored."""
        assert extract_transitions(sequence((K, 5), (H, 10), (S, 5))) == []

    def test_runs_at_sequence_edges(self):
        """A hallway run without a room on both sides is not a transition."""
        assert extract_transitions(sequence((H, 10), (L, 5), (H, 3))) == []

    def test_timestamp_gap_splits(self):
        """A gap inside a hallway run breaks it."""
        seq = sequence((K, 5), (H, 10), (L, 5))
        seq.timestamps_ms[10:] += 60_000
        assert extract_transitions(seq) == []

    def test_several_in_order(self):
        """Consecutive passages come out in time order with direction kept."""
        found = extract_transitions(sequence((K, 5), (H, 10), (D, 5), (H, 15), (L, 5)))
        assert [(t.from_room, t.to_room) for t in found] == [(Room.KITCHEN, Room.DINING), (Room.DINING, Room.LIVING)]
        assert [t.duration_s for t in found] == [pytest.approx(2.0), pytest.approx(3.0)]

    def test_pair_is_direction_agnostic(self):
        """Both directions map onto the same tracked pair."""
        assert transition(5.0, 0, Room.LIVING, Room.KITCHEN).pair == (Room.KITCHEN, Room.LIVING)


class TestPredictionsToSequence:
    """Test flattening of window predictions."""

    def test_orders_by_time(self):
        """Windows are flattened step by step in timestamp order."""
        seq = predictions_to_sequence("PD01", np.array([400, 0]), np.array([[3, 3], [0, 1]]))
        assert seq.timestamps_ms.tolist() == [0, 200, 400, 600]
        assert seq.rooms.tolist() == [0, 1, 3, 3]

    def test_empty(self):
        """No windows give an empty sequence."""
        assert len(predictions_to_sequence("PD01", np.zeros(0), np.zeros((0, 25)))) == 0


class TestAggregateFeatures:
    """Test per-slot aggregation."""

    def test_five_days_twenty_rows(self):
        """Four slots over five days make 20 rows."""
        rows = aggregate_features("PD01", [], schedule(5, (2, 1)), days=5)
        assert len(rows) == 20
        assert [(r.day, r.slot) for r in rows[:5]] == [(1, 0), (1, 1), (1, 2), (1, 3), (2, 0)]
        assert [r.med_state for r in rows].count(MedState.OFF) == 1
        assert rows[5].med_state == MedState.OFF

    def test_mean_and_count(self):
        """Transitions of 5 and 7 s in one slot give mean 6 and count 2."""
        day1 = 6 * HOUR
        rows = aggregate_features("PD01", [transition(5.0, day1 + 1000), transition(7.0, day1 + HOUR)], None, days=1)
        first = rows[0]
        assert first.kitchen_living_mean == pytest.approx(6.0)
        assert first.kitchen_living_count == 2

    def test_empty_slot_imputed(self):
        """A pair with no transitions in a slot gets (60.0, 0)."""
        rows = aggregate_features("PD01", [transition(5.0, 6 * HOUR)], None, days=1)
        assert (rows[0].dining_living_mean, rows[0].dining_living_count) == (60.0, 0)
        assert (rows[1].kitchen_living_mean, rows[1].kitchen_living_count) == (60.0, 0)

    def test_controls_are_on(self):
        """Without a schedule every slot is ON."""
        rows = aggregate_features("HC01", [], None, days=1)
        assert {r.med_state for r in rows} == {MedState.ON}

    def test_rows_round_trip(self, tmp_path):
        """Feature rows survive a write and read."""
        rows = aggregate_features("PD01", [transition(5.0, 6 * HOUR)], schedule(1, (1, 0)), days=1)
        path = write_gait_rows(rows, tmp_path / "gait.csv")
        assert read_gait_rows(path) == rows


class TestTransitionTables:
    """Test per-model duration tables and ON/OFF means."""

    def test_frame_tags_medication_state(self):
        """Each transition carries the state of its slot."""
        df = transitions_frame("PD01", [transition(5.0, 6 * HOUR), transition(9.0, 11 * HOUR)], schedule(1, (1, 1)))
        assert df["med_state"].tolist() == ["ON", "OFF"]
        assert df["pair"].tolist() == ["kitchen_living", "kitchen_living"]

    def test_single_transition_statistics(self):
        """One 10 s transition has mean 10 and sd 0."""
        df = transitions_frame("PD01", [transition(10.0, 6 * HOUR)], None)
        table = mean_transition_table({"truth": df})
        row = table[table["pair"] == "kitchen_living"].iloc[0]
        assert (row["mean_s"], row["sd_s"], row["cell"]) == (10.0, 0.0, "10.00 (0.00)")

    def test_missing_pair_is_na(self):
        """A pair a model never captured shows N/A."""
        df = transitions_frame("PD01", [transition(10.0, 6 * HOUR)], None)
        table = mean_transition_table({"model": df})
        assert table[table["pair"] == "dining_living"]["cell"].tolist() == ["N/A"]

    def test_offset_from_reference(self):
        """Offsets are absolute differences from the reference means."""
        truth = transitions_frame("PD01", [transition(10.0, 6 * HOUR)], None)
        model = transitions_frame("PD01", [transition(7.0, 6 * HOUR), transition(9.0, 7 * HOUR)], None)
        table = mean_transition_table({"truth": truth, "model": model}, reference="truth")
        offsets = table[table["pair"] == "kitchen_living"].set_index("model")["offset_s"]
        assert offsets["truth"] == pytest.approx(0.0)
        assert offsets["model"] == pytest.approx(2.0)

    def test_independent_recomputation(self):
        """Table means agree with a plain groupby over the raw transitions."""
        rng = np.random.default_rng(0)
        pairs = [(Room.KITCHEN, Room.LIVING), (Room.DINING, Room.KITCHEN), (Room.LIVING, Room.DINING)]
        transitions = [transition(float(rng.uniform(1, 30)), 6 * HOUR + i * 60_000, *pairs[i % 3]) for i in range(30)]
        df = transitions_frame("PD01", transitions, None)
        expected = df.groupby("pair")["duration_s"].mean()
        table = mean_transition_table({"truth": df}).set_index("pair")
        for pair, mean in expected.items():
            assert table.loc[pair, "mean_s"] == pytest.approx(mean)

    def test_on_off_means(self):
        """Participants need both states to contribute."""
        df = pd.concat([
            transitions_frame("PD01", [transition(5.0, 6 * HOUR), transition(9.0, 11 * HOUR)], schedule(1, (1, 1))),
            transitions_frame("PD02", [transition(5.0, 6 * HOUR)], schedule(1, (1, 1))),
        ])
        assert on_off_means(df, "kitchen_living") == [("PD01", 9.0, 5.0)]
