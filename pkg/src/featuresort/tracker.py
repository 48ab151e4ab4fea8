"""
Online tracker: runs one sequence of detections through
predict -> match_frame -> lifecycle_step and collects the finished
trajectories.
"""
import itertools
import logging
from collections import defaultdict

from .association import MatchRecord, lifecycle_step, match_frame
from .config import TrackerConfig
from .errors import DataError
from .kalman import KalmanDiagnostics, kalman_params, predict
from .structures import normalize_detection

log = logging.getLogger(__name__)


class Tracker(object):
    """
    Single-sequence tracker. Frames must be fed in increasing order; one
    instance is never shared between sequences.
    """

    def __init__(self, cfg: TrackerConfig = None):
        self.cfg = cfg or TrackerConfig()
        self.tracks = []
        self.finished = []
        self.match_log = []
        self.diagnostics = KalmanDiagnostics()
        self.stats = defaultdict(int)
        self._ids = itertools.count(1)
        self._last_frame = None
        self._warned_dim = False

    def _accept(self, det):
        det = normalize_detection(det)
        if det.embedding_dim != self.cfg.embedding_dim and not self._warned_dim:
            log.warning('Embedding dimension %d differs from tracker.embedding_dim %d',
                        det.embedding_dim, self.cfg.embedding_dim)
            self._warned_dim = True
        return det

    def step(self, frame, detections):
        """
        Advance the tracker by one frame. Returns the trajectories of tracks
        deleted in this frame.
        """
        if self._last_frame is not None and frame <= self._last_frame:
            raise DataError('frame {} arrived after frame {}'.format(frame, self._last_frame))
        self._last_frame = frame

        dets = []
        for raw in detections:
            det = self._accept(raw)
            if det.conf >= self.cfg.for_class(det.class_id).conf_min:
                dets.append(det)

        for track in self.tracks:
            track.kalman = predict(track.kalman, kalman_params(self.cfg.for_class(track.class_id)))

        assignment = match_frame(self.tracks, dets, self.cfg)
        for track_id, det_index in assignment.matches:
            cost, overlap, direction = assignment.details.get((track_id, det_index), (float('nan'),) * 3)
            self.match_log.append(MatchRecord(frame, track_id, det_index, dets[det_index].class_id,
                                              overlap, direction, cost))

        self.tracks, finished = lifecycle_step(self.tracks, assignment, dets, frame, self.cfg, self._ids,
                                               diagnostics=self.diagnostics)
        self.finished.extend(finished)

        self.stats['frames'] += 1
        self.stats['detections'] += len(dets)
        self.stats['filtered'] += len(detections) - len(dets)
        self.stats['matches'] += len(assignment.matches)
        log.debug('Frame %d: %d detections, %d matches, %d live tracks', frame, len(dets),
                  len(assignment.matches), len(self.tracks))
        return finished

    def flush(self):
        """
        End of sequence: confirmed live tracks become trajectories, tentative
        ones are dropped.
        """
        remaining = []
        for track in self.tracks:
            if track.is_confirmed:
                remaining.append(track.to_trajectory(self.cfg.for_class(track.class_id).bank_size))
        self.finished.extend(remaining)
        self.tracks = []
        return remaining

    def run(self, frames, first_frame=None, last_frame=None):
        """
        Track a whole sequence. ``frames`` maps frame number to its
        detections; frames without detections still age the tracks.
        """
        if frames:
            first = min(frames) if first_frame is None else first_frame
            last = max(frames) if last_frame is None else last_frame
            for frame in range(first, last + 1):
                self.step(frame, frames.get(frame, ()))
        self.flush()

        trajectories = sorted(self.finished, key=lambda t: t.track_id)
        self.stats['tracks'] = len(trajectories)
        log.info('Tracked %d frames into %d trajectories', self.stats['frames'], len(trajectories))
        return trajectories
