"""
Prometheus text-format export of evaluation reports and tracking runs.
"""
import io
import logging

from prometheus_client import CollectorRegistry, Gauge, Summary, write_to_textfile
from prometheus_client.parser import text_fd_to_metric_families

log = logging.getLogger(__name__)

registry = CollectorRegistry()
run_registry = CollectorRegistry()

featuresort_mota_gauge = Gauge('featuresort_mota', 'Multiple object tracking accuracy', ['sequence'],
                               registry=registry)
featuresort_idf1_gauge = Gauge('featuresort_idf1', 'Identity F1 score', ['sequence'], registry=registry)
featuresort_idp_gauge = Gauge('featuresort_idp', 'Identity precision', ['sequence'], registry=registry)
featuresort_idr_gauge = Gauge('featuresort_idr', 'Identity recall', ['sequence'], registry=registry)
featuresort_motp_gauge = Gauge('featuresort_motp', 'Mean IoU of matched pairs', ['sequence'], registry=registry)
featuresort_id_switches_gauge = Gauge('featuresort_id_switches', 'Identity switches', ['sequence'],
                                      registry=registry)
featuresort_fp_gauge = Gauge('featuresort_fp', 'False positives', ['sequence'], registry=registry)
featuresort_fn_gauge = Gauge('featuresort_fn', 'False negatives', ['sequence'], registry=registry)
featuresort_gt_count_gauge = Gauge('featuresort_gt_count', 'Ground-truth boxes', ['sequence'], registry=registry)
featuresort_pred_count_gauge = Gauge('featuresort_pred_count', 'Predicted boxes', ['sequence'], registry=registry)
featuresort_idtp_gauge = Gauge('featuresort_idtp', 'Identity true positives', ['sequence'], registry=registry)
featuresort_idfp_gauge = Gauge('featuresort_idfp', 'Identity false positives', ['sequence'], registry=registry)
featuresort_idfn_gauge = Gauge('featuresort_idfn', 'Identity false negatives', ['sequence'], registry=registry)
featuresort_frames_gauge = Gauge('featuresort_frames', 'Frames scored', ['sequence'], registry=registry)
featuresort_gt_ids_gauge = Gauge('featuresort_gt_ids', 'Ground-truth identities', ['sequence'], registry=registry)
featuresort_pred_ids_gauge = Gauge('featuresort_pred_ids', 'Predicted identities', ['sequence'], registry=registry)

gauges = {
    'mota': featuresort_mota_gauge,
    'idf1': featuresort_idf1_gauge,
    'idp': featuresort_idp_gauge,
    'idr': featuresort_idr_gauge,
    'motp': featuresort_motp_gauge,
    'id_switches': featuresort_id_switches_gauge,
    'fp': featuresort_fp_gauge,
    'fn': featuresort_fn_gauge,
    'gt_count': featuresort_gt_count_gauge,
    'pred_count': featuresort_pred_count_gauge,
    'idtp': featuresort_idtp_gauge,
    'idfp': featuresort_idfp_gauge,
    'idfn': featuresort_idfn_gauge,
    'frames': featuresort_frames_gauge,
    'gt_ids': featuresort_gt_ids_gauge,
    'pred_ids': featuresort_pred_ids_gauge,
}

run_gauges = {
    name: Gauge('featuresort_run_{}'.format(name), help_text, ['sequence'], registry=run_registry)
    for name, help_text in (
        ('frames', 'Frames tracked'),
        ('detections', 'Detections passing the confidence filter'),
        ('filtered', 'Detections dropped by the confidence filter'),
        ('matches', 'Track-detection matches'),
        ('tracks', 'Trajectories written'),
        ('kalman_regularized', 'Innovation covariances that needed regularization'),
        ('kalman_clamped_conf', 'Confidences clamped into [0, 1]'),
    )
}

request_time = Summary('featuresort_track_processing_seconds', 'Time spent tracking one sequence', ['sequence'],
                       registry=run_registry)


def write_registry(target_registry, path):
    try:
        write_to_textfile(path, target_registry)
    except OSError as e:
        log.error('Unable to write metrics to %s: %s', path, e)
        raise


def export_report(report, path, sequence='default'):
    """
    Write an EvalReport as one labelled gauge per figure.
    """
    values = report.as_dict()
    for name, gauge in gauges.items():
        gauge.clear()
        gauge.labels(sequence=sequence).set(values[name])
    write_registry(registry, path)
    log.info('Wrote evaluation metrics for %s to %s', sequence, path)


def export_run(runs, path):
    """
    Write run statistics for one or more tracked sequences. ``runs`` yields
    (sequence, stats dict, elapsed seconds).
    """
    for gauge in run_gauges.values():
        gauge.clear()
    request_time.clear()
    for sequence, stats, elapsed in runs:
        for name, gauge in run_gauges.items():
            gauge.labels(sequence=sequence).set(stats.get(name, 0))
        request_time.labels(sequence=sequence).observe(elapsed)
    write_registry(run_registry, path)


def read_metrics(path):
    """
    Parse a text-format metrics file into {(metric name, sequence): value}.
    """
    values = {}
    with io.open(path, 'r', encoding='utf-8') as metrics:
        for family in text_fd_to_metric_families(metrics):
            for sample in family.samples:
                values[(sample.name, sample.labels.get('sequence'))] = sample.value
    return values
