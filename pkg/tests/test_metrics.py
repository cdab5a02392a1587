import numpy as np
import pytest

from plbounds.errors import NoNominalRecords
from plbounds.gmm import ProtectionLevels
from plbounds.metrics import (
    DIRECTIONS,
    AlarmLimits,
    IntegrityRecord,
    PerDirection,
    bound_gap,
    failure_rate,
    false_alarm_rate,
    integrity_diagram,
    records_from_table,
    summarize,
)


def rec(pl: float, err: float) -> IntegrityRecord:
    """A record with the same bound and error magnitude in every direction."""
    return IntegrityRecord(ProtectionLevels(pl, pl, pl), np.array([err, err, err]))


UNIT_LIMITS = AlarmLimits(1.0, 1.0, 1.0)


def test_per_direction_access():
    p = PerDirection(1, 2, 3)
    assert (p.get("lateral"), p.get("longitudinal"), p.get("vertical")) == (1, 2, 3)
    assert p.to_dict() == {"lateral": 1, "longitudinal": 2, "vertical": 3}


def test_alarm_limit_defaults_and_validation():
    limits = AlarmLimits()
    assert (limits.lateral, limits.longitudinal, limits.vertical) == (0.85, 1.50, 1.47)
    with pytest.raises(ValueError):
        AlarmLimits(0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        AlarmLimits(1.0, 1.0, -0.1)


def test_record_validation():
    with pytest.raises(ValueError):
        IntegrityRecord(ProtectionLevels(1.0, 1.0, 1.0), np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        IntegrityRecord(ProtectionLevels(1.0, 1.0, 1.0), np.array([1.0, np.nan, 0.0]))
    r = rec(1.0, 0.5)
    assert np.array_equal(r.error, [0.5, 0.5, 0.5])


# ---------------------------------------------------------------------------
# scalar metrics


def test_failure_rate_counts_strictly():
    records = [rec(1.0, 1.5), rec(1.0, 1.0), rec(1.0, 0.5), rec(0.0, 0.0)]
    fr = failure_rate(records)
    # only the first record has pl strictly below |err|; exact ties are fine
    for d in DIRECTIONS:
        assert fr.get(d) == 0.25


def test_failure_rate_uses_error_magnitude():
    records = [IntegrityRecord(ProtectionLevels(1.0, 1.0, 1.0), np.array([-1.5, 0.2, -0.2]))]
    fr = failure_rate(records)
    assert fr.lateral == 1.0
    assert fr.longitudinal == 0.0 and fr.vertical == 0.0


def test_false_alarm_rate_hand_case():
    # 10 records against a unit alarm limit:
    #   3 true alarms     (pl 1.5 > 1, err 1.2 > 1)
    #   1 missed alarm    (pl 0.9 <= 1, err 1.1 > 1)
    #   2 false alarms    (pl 1.5 > 1, err 0.5 <= 1)
    #   4 nominal         (pl 0.8, err 0.5)
    # so T=10, N_PE=4, N_FA=2, N_TA=3 and the weighted rate is
    # 2*(10-4) / (2*(10-4) + 3*4) = 12/24
    records = (
        [rec(1.5, 1.2)] * 3 + [rec(0.9, 1.1)] + [rec(1.5, 0.5)] * 2 + [rec(0.8, 0.5)] * 4
    )
    far, flags = false_alarm_rate(records, UNIT_LIMITS)
    for d in DIRECTIONS:
        assert far.get(d) == 0.5
        assert flags.get(d) is False


def test_false_alarm_rate_ties_do_not_alarm():
    # pl exactly at the limit is not an alarm, err exactly at the limit is
    # not a position error
    far, flags = false_alarm_rate([rec(1.0, 1.0)] * 5, UNIT_LIMITS)
    for d in DIRECTIONS:
        assert far.get(d) == 0.0
        assert flags.get(d) is True  # no alarms and no position errors at all


def test_false_alarm_rate_degenerate_all_position_errors_alarmed():
    # every record is a true alarm: numerator 0 but denominator nonzero,
    # so the rate is a genuine 0 and the flag stays down
    far, flags = false_alarm_rate([rec(1.5, 1.2)] * 4, UNIT_LIMITS)
    for d in DIRECTIONS:
        assert far.get(d) == 0.0
        assert flags.get(d) is False


def test_bound_gap_hand_case():
    records = [rec(1.0, 0.5), rec(0.9, 0.2), rec(1.5, 0.1), rec(0.3, 0.8)]
    # the alarm (pl 1.5) and the failure (pl 0.3 < err) are excluded,
    # leaving gaps 0.5 and 0.7
    gap = bound_gap(records, UNIT_LIMITS)
    for d in DIRECTIONS:
        assert abs(gap.get(d) - 0.6) <= 1e-12


def test_bound_gap_without_nominal_records():
    records = [rec(1.5, 0.1)] * 3  # always alarming
    gap = bound_gap(records, UNIT_LIMITS)
    assert gap.lateral is None and gap.longitudinal is None and gap.vertical is None
    with pytest.raises(NoNominalRecords):
        bound_gap(records, UNIT_LIMITS, require_nominal=True)


def test_metrics_reject_empty_lists():
    for fn in (failure_rate, lambda r: bound_gap(r, UNIT_LIMITS), lambda r: false_alarm_rate(r, UNIT_LIMITS)):
        with pytest.raises(ValueError):
            fn([])


def test_summarize_roundtrip():
    records = [rec(0.8, 0.5), rec(1.5, 1.2), rec(0.9, 1.1)]
    report = summarize(records, UNIT_LIMITS)
    assert report.n_records == 3
    d = report.to_dict()
    assert set(d) == {
        "n_records",
        "bound_gap",
        "failure_rate",
        "false_alarm_rate",
        "far_degenerate",
        "no_nominal_records",
        "alarm_limits",
    }
    assert d["failure_rate"]["lateral"] == pytest.approx(1 / 3)
    assert d["alarm_limits"] == {"lateral": 1.0, "longitudinal": 1.0, "vertical": 1.0}
    assert d["no_nominal_records"] == {k: False for k in DIRECTIONS}


def test_summarize_empty():
    report = summarize([], UNIT_LIMITS)
    assert report.n_records == 0
    assert report.bound_gap.lateral is None
    assert report.failure_rate.vertical == 0.0
    assert report.far_degenerate.longitudinal is True
    assert report.to_dict()["no_nominal_records"]["lateral"] is True


# ---------------------------------------------------------------------------
# results table


def test_records_from_table_roundtrip():
    table = np.array(
        [
            [0.0, 1.0, 2.0, 3.0, 0.1, -0.2, 0.3],
            [0.5, 1.5, 2.5, 3.5, -0.4, 0.5, -0.6],
        ]
    )
    records = records_from_table(table)
    assert len(records) == 2
    assert records[0].pl.longitudinal == 2.0
    assert np.array_equal(records[1].error, [-0.4, 0.5, -0.6])


def test_records_from_table_validation():
    with pytest.raises(ValueError):
        records_from_table(np.zeros((3, 6)))
    with pytest.raises(ValueError):
        records_from_table(np.zeros(7))


# ---------------------------------------------------------------------------
# integrity diagram


def test_diagram_bin_placement():
    diagram = integrity_diagram([rec(0.7, 0.3)], UNIT_LIMITS, bins=4)
    dd = diagram.directions["lateral"]
    assert np.allclose(dd.edges, np.linspace(0.0, 2.0, 5))
    assert dd.counts[0, 1] == 1 and dd.counts.sum() == 1
    assert dd.nominal == 1


def test_diagram_overflow_bin():
    diagram = integrity_diagram([rec(2.5, 2.5)], UNIT_LIMITS, bins=4)
    dd = diagram.directions["vertical"]
    assert dd.counts[4, 4] == 1
    assert dd.alarm == 1  # pl beyond the limit, bound not broken


def test_diagram_regions_by_construction():
    records = [
        rec(0.8, 0.5),  # nominal
        rec(1.5, 0.5),  # alarm
        rec(0.4, 0.6),  # misleading: bound broken, error tolerable
        rec(0.9, 1.2),  # hazardous: bound broken, error past the limit, no alarm
        rec(1.1, 1.3),  # misleading: bound broken but the alarm fired
    ]
    dd = integrity_diagram(records, UNIT_LIMITS, bins=8).directions["longitudinal"]
    assert (dd.nominal, dd.alarm, dd.misleading, dd.hazardous) == (1, 1, 2, 1)


def test_diagram_partitions_random_records():
    rng = np.random.default_rng(17)
    records = [
        IntegrityRecord(
            ProtectionLevels(*rng.uniform(0.0, 2.2, size=3)), rng.uniform(-2.2, 2.2, size=3)
        )
        for _ in range(15000)
    ]
    diagram = integrity_diagram(records, AlarmLimits(), bins=10)
    fr = failure_rate(records)
    for name in DIRECTIONS:
        dd = diagram.directions[name]
        assert dd.nominal + dd.alarm + dd.misleading + dd.hazardous == len(records)
        assert dd.counts.sum() == len(records)
        assert dd.misleading + dd.hazardous == round(fr.get(name) * len(records))


def test_diagram_empty_and_validation():
    diagram = integrity_diagram([], UNIT_LIMITS, bins=3)
    assert diagram.n_records == 0
    assert diagram.directions["lateral"].counts.sum() == 0
    with pytest.raises(ValueError):
        integrity_diagram([], UNIT_LIMITS, bins=0)


def test_diagram_to_dict_is_json_ready():
    import json

    d = integrity_diagram([rec(0.7, 0.3)], UNIT_LIMITS, bins=2).to_dict()
    json.dumps(d)
    assert d["directions"]["lateral"]["regions"]["nominal"] == 1
