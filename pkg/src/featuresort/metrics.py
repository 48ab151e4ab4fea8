"""
CLEAR-MOT and identity metrics for one sequence, computed with motmetrics.

Each frame's ground truth and predictions go into a ``MOTAccumulator`` as a
1 - IoU distance matrix, with pairs below the IoU threshold left out.
Ground-truth objects keep their previous partner while the pair still
overlaps and the rest are matched by a Hungarian solve. A partner change
counts as an identity switch. IDF1 comes from one global matching between
ground-truth and predicted identities.
"""
import logging
import math
from collections import OrderedDict, defaultdict
from dataclasses import dataclass, field
from typing import Dict, List

import motmetrics as mm
import numpy as np

from .structures import frame_range

log = logging.getLogger(__name__)

IOU_THRESHOLD = 0.5

SUMMARY_METRICS = ['num_frames', 'num_objects', 'num_predictions', 'num_detections', 'num_false_positives',
                   'num_misses', 'num_switches', 'num_unique_objects', 'idtp', 'motp', 'mota', 'idf1']


@dataclass
class FrameCorrespondence:
    frame: int
    matches: Dict[int, int] = field(default_factory=dict)
    ious: Dict[int, float] = field(default_factory=dict)
    unmatched_gt: List[int] = field(default_factory=list)
    unmatched_pred: List[int] = field(default_factory=list)
    switches: List[int] = field(default_factory=list)

    @property
    def fp(self):
        return len(self.unmatched_pred)

    @property
    def fn(self):
        return len(self.unmatched_gt)


@dataclass
class EvalReport:
    fp: int = 0
    fn: int = 0
    id_switches: int = 0
    gt_count: int = 0
    pred_count: int = 0
    tp: int = 0
    iou_sum: float = 0.0
    idtp: int = 0
    frames: int = 0
    gt_ids: int = 0
    pred_ids: int = 0
    per_frame: List[FrameCorrespondence] = field(default_factory=list, repr=False)

    @property
    def mota(self):
        if self.gt_count == 0:
            return float('nan')
        return 1.0 - (self.fp + self.fn + self.id_switches) / self.gt_count

    @property
    def idfp(self):
        return self.pred_count - self.idtp

    @property
    def idfn(self):
        return self.gt_count - self.idtp

    @property
    def idf1(self):
        denominator = 2 * self.idtp + self.idfp + self.idfn
        return 2.0 * self.idtp / denominator if denominator else 0.0

    @property
    def idp(self):
        return self.idtp / self.pred_count if self.pred_count else 0.0

    @property
    def idr(self):
        return self.idtp / self.gt_count if self.gt_count else 0.0

    @property
    def motp(self):
        """Mean IoU over matched pairs."""
        return self.iou_sum / self.tp if self.tp else float('nan')

    def as_dict(self):
        return {
            'mota': self.mota, 'idf1': self.idf1, 'id_switches': self.id_switches,
            'fp': self.fp, 'fn': self.fn, 'gt_count': self.gt_count, 'pred_count': self.pred_count,
            'idtp': self.idtp, 'idfp': self.idfp, 'idfn': self.idfn, 'idp': self.idp, 'idr': self.idr,
            'motp': self.motp, 'frames': self.frames, 'gt_ids': self.gt_ids, 'pred_ids': self.pred_ids,
        }

    def summary(self):
        def fmt(value):
            return 'nan' if isinstance(value, float) and math.isnan(value) else '{:.4f}'.format(value)

        return ('MOTA {} IDF1 {} IDs {} FP {} FN {} GT {} IDP {} IDR {} MOTP {} frames {}'.format(
            fmt(self.mota), fmt(self.idf1), self.id_switches, self.fp, self.fn, self.gt_count,
            fmt(self.idp), fmt(self.idr), fmt(self.motp), self.frames))


def _boxes(boxes: Dict[int, object], ids):
    return np.array([boxes[i].as_array() for i in ids], dtype=float).reshape(-1, 4)


def _event_id(value):
    return None if value is None or math.isnan(value) else int(value)


class ClearAccumulator(object):
    """
    Feeds frames one at a time into a motmetrics accumulator; ``finish``
    summarizes them into an EvalReport.
    """

    def __init__(self, iou_thresh=IOU_THRESHOLD):
        self.iou_thresh = iou_thresh
        self.acc = mm.MOTAccumulator(auto_id=False)
        self._frames = []
        self._gt_count = 0
        self._pred_count = 0
        self._gt_ids = set()
        self._pred_ids = set()

    def update(self, frame, pred_boxes, gt_boxes):
        gt_ids = sorted(gt_boxes)
        pred_ids = sorted(pred_boxes)
        distances = mm.distances.iou_matrix(_boxes(gt_boxes, gt_ids), _boxes(pred_boxes, pred_ids),
                                            max_iou=1.0 - self.iou_thresh)
        self.acc.update(gt_ids, pred_ids, distances, frameid=frame)

        self._frames.append(frame)
        self._gt_count += len(gt_ids)
        self._pred_count += len(pred_ids)
        self._gt_ids.update(gt_ids)
        self._pred_ids.update(pred_ids)

    def correspondences(self):
        """
        Per-frame log rebuilt from the accumulator's MATCH, SWITCH, MISS and
        FP events.
        """
        per_frame = OrderedDict((frame, FrameCorrespondence(frame)) for frame in self._frames)
        if not self._frames:
            return []
        events = self.acc.mot_events.reset_index()
        for event in events.itertuples(index=False):
            result = per_frame[int(event.FrameId)]
            kind = str(event.Type)
            oid, hid = _event_id(event.OId), _event_id(event.HId)
            if kind in ('MATCH', 'SWITCH'):
                result.matches[oid] = hid
                result.ious[oid] = 1.0 - float(event.D)
                if kind == 'SWITCH':
                    result.switches.append(oid)
            elif kind == 'MISS':
                result.unmatched_gt.append(oid)
            elif kind == 'FP':
                result.unmatched_pred.append(hid)
        return list(per_frame.values())

    def finish(self) -> EvalReport:
        report = EvalReport(frames=len(self._frames), gt_count=self._gt_count, pred_count=self._pred_count,
                            gt_ids=len(self._gt_ids), pred_ids=len(self._pred_ids))
        if self._gt_count == 0 or self._pred_count == 0:
            # nothing can match; motmetrics has no identities to assign
            report.fp = self._pred_count
            report.fn = self._gt_count
            report.per_frame = self.correspondences()
            return report

        summary = mm.metrics.create().compute(self.acc, metrics=SUMMARY_METRICS, name='sequence').iloc[0]
        report.fp = int(summary['num_false_positives'])
        report.fn = int(summary['num_misses'])
        report.id_switches = int(summary['num_switches'])
        report.tp = int(summary['num_detections'])
        report.idtp = int(round(summary['idtp']))
        report.frames = int(summary['num_frames'])
        report.gt_ids = int(summary['num_unique_objects'])
        if report.tp:
            # motmetrics reports MOTP as the mean 1 - IoU distance
            report.iou_sum = report.tp * (1.0 - float(summary['motp']))
        report.per_frame = self.correspondences()
        log.debug('motmetrics MOTA %.4f IDF1 %.4f', summary['mota'], summary['idf1'])
        return report


def match_gt_frame(pred_boxes: Dict[int, object], gt_boxes: Dict[int, object],
                   iou_thresh=IOU_THRESHOLD, frame=0) -> FrameCorrespondence:
    """
    Correspond one frame's predictions (id -> BBox) with its ground truth,
    without any history.
    """
    accumulator = ClearAccumulator(iou_thresh)
    accumulator.update(frame, pred_boxes, gt_boxes)
    return accumulator.correspondences()[0]


def by_frame(trajectories):
    frames = defaultdict(dict)
    for traj in trajectories:
        for point in traj.points:
            frames[point.frame][traj.track_id] = point.box
    return frames


def evaluate(pred_trajs, truth_trajs, iou_thresh=IOU_THRESHOLD) -> EvalReport:
    """
    Score predicted trajectories against ground truth. When both sides are
    non-empty but cover different frame ranges, only the shared range is
    scored.
    """
    pred = by_frame(pred_trajs)
    truth = by_frame(truth_trajs)
    frames = sorted(set(pred) | set(truth))

    pred_range = frame_range(pred_trajs)
    truth_range = frame_range(truth_trajs)
    if pred_range and truth_range and pred_range != truth_range:
        first = max(pred_range[0], truth_range[0])
        last = min(pred_range[1], truth_range[1])
        log.warning('Prediction frames %d-%d and truth frames %d-%d differ; scoring %d-%d',
                    pred_range[0], pred_range[1], truth_range[0], truth_range[1], first, last)
        frames = [f for f in frames if first <= f <= last]

    accumulator = ClearAccumulator(iou_thresh)
    for frame in frames:
        accumulator.update(frame, pred.get(frame, {}), truth.get(frame, {}))
    report = accumulator.finish()
    log.info('Evaluated %d frames: %s', report.frames, report.summary())
    return report
