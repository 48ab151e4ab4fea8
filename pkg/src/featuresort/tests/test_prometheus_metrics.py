import math

import pytest

from featuresort import prometheus_metrics
from featuresort.metrics import EvalReport
from featuresort.prometheus_metrics import export_report, export_run, read_metrics


@pytest.fixture
def report():
    return EvalReport(fp=1, fn=2, id_switches=1, gt_count=20, pred_count=19, tp=17, iou_sum=15.3, idtp=15,
                      frames=10, gt_ids=2, pred_ids=3)


def test_report_gauges(tmp_path, report):
    path = str(tmp_path / 'eval.prom')
    export_report(report, path, 'seq1')
    values = read_metrics(path)

    assert values[('featuresort_mota', 'seq1')] == pytest.approx(0.8)
    assert values[('featuresort_idf1', 'seq1')] == pytest.approx(30.0 / 39.0)
    assert values[('featuresort_motp', 'seq1')] == pytest.approx(0.9)
    assert values[('featuresort_id_switches', 'seq1')] == 1
    assert values[('featuresort_idfn', 'seq1')] == 5
    assert values[('featuresort_pred_ids', 'seq1')] == 3
    assert len(values) == len(prometheus_metrics.gauges)


def test_report_replaces_previous_sequence(tmp_path, report):
    path = str(tmp_path / 'eval.prom')
    export_report(report, path, 'first')
    export_report(report, path, 'second')
    values = read_metrics(path)

    assert ('featuresort_mota', 'second') in values
    assert all(sequence == 'second' for _, sequence in values)


def test_empty_report_writes_nan(tmp_path):
    path = str(tmp_path / 'eval.prom')
    export_report(EvalReport(), path, 'empty')
    values = read_metrics(path)

    assert math.isnan(values[('featuresort_mota', 'empty')])
    assert values[('featuresort_idf1', 'empty')] == 0


def test_run_metrics(tmp_path):
    path = str(tmp_path / 'run.prom')
    export_run([('a', {'frames': 5, 'matches': 9}, 0.25), ('b', {'frames': 7, 'tracks': 2}, 0.5)], path)
    values = read_metrics(path)

    assert values[('featuresort_run_frames', 'a')] == 5
    assert values[('featuresort_run_frames', 'b')] == 7
    assert values[('featuresort_run_matches', 'a')] == 9
    assert values[('featuresort_run_matches', 'b')] == 0
    assert values[('featuresort_run_tracks', 'b')] == 2
    assert values[('featuresort_track_processing_seconds_count', 'a')] == 1
    assert values[('featuresort_track_processing_seconds_sum', 'b')] == pytest.approx(0.5)


def test_unwritable_path(tmp_path, report):
    with pytest.raises(OSError):
        export_report(report, str(tmp_path / 'missing' / 'eval.prom'), 'seq1')
