"""
Readers and writers for the on-disk formats.

Detections: MOT-style CSV rows ``frame,-1,x,y,w,h,conf,class_id`` with a
``<path>.features`` sidecar holding, per row, the embedding followed by
the 10 color, 20 style and 72 direction values::

    # d=128
    frame,row_index,v0,v1,...

Trajectories: ``frame,track_id,x,y,w,h,conf,class_id,interpolated`` rows
sorted by (frame, track_id), with the embedding banks in a
``<path>.banks`` sidecar (``track_id,snapshot_index,v0,v1,...``).

Every float is written with four decimals.
"""
import csv
import io
import logging
import os
from collections import OrderedDict, defaultdict

import numpy as np

from .errors import InvalidBoxError, MalformedRowError, MissingSidecarError, SidecarMismatchError
from .structures import (BBox, COLOR_BINS, DIRECTION_BINS, STYLE_BINS, Detection, Trajectory,
                         TrajectoryPoint)

log = logging.getLogger(__name__)

FEATURES_SUFFIX = '.features'
BANKS_SUFFIX = '.banks'
ATTRIBUTE_WIDTH = COLOR_BINS + STYLE_BINS + DIRECTION_BINS


def fmt(value):
    return '{:.4f}'.format(float(value))


def _data_rows(path):
    """
    Yield (line number, fields) for every non-blank, non-comment line.
    """
    with io.open(path, 'r', encoding='utf-8', newline='') as handle:
        for number, row in enumerate(csv.reader(handle), start=1):
            if not row or not ''.join(row).strip() or row[0].lstrip().startswith('#'):
                continue
            yield number, [field.strip() for field in row]


def _read_header_dim(path):
    with io.open(path, 'r', encoding='utf-8') as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            if line.startswith('#') and line[1:].strip().startswith('d='):
                try:
                    return int(line[1:].strip()[2:])
                except ValueError:
                    break
            break
    raise SidecarMismatchError('{}: first line must declare the dimension as "# d=<n>"'.format(path))


def _number(path, number, text, kind=float):
    try:
        if kind is int:
            value = float(text)
            if not value.is_integer():
                raise ValueError(text)
            return int(value)
        return float(text)
    except ValueError:
        raise MalformedRowError(path, number, 'not a number: {!r}'.format(text))


def _vector(path, number, fields):
    try:
        return np.array(fields, dtype=float)
    except ValueError:
        raise MalformedRowError(path, number, 'non-numeric feature value')


def write_detections(path, detections):
    """
    ``detections`` maps frame to its list of Detection.
    """
    frames = sorted(detections)
    dim = 0
    for frame in frames:
        if detections[frame]:
            dim = len(detections[frame][0].embedding)
            break

    with io.open(path, 'w', encoding='utf-8', newline='') as base, \
            io.open(path + FEATURES_SUFFIX, 'w', encoding='utf-8', newline='') as sidecar:
        base_writer = csv.writer(base, lineterminator='\n')
        side_writer = csv.writer(sidecar, lineterminator='\n')
        sidecar.write('# d={}\n'.format(dim))
        row_index = 0
        for frame in frames:
            for det in detections[frame]:
                if len(det.embedding) != dim:
                    raise SidecarMismatchError('mixed embedding dimensions {} and {}'.format(dim, len(det.embedding)))
                base_writer.writerow([frame, -1, fmt(det.box.x), fmt(det.box.y), fmt(det.box.w), fmt(det.box.h),
                                      fmt(det.conf), det.class_id])
                values = np.concatenate([det.embedding, det.color, det.style, det.direction])
                side_writer.writerow([frame, row_index] + [fmt(v) for v in values])
                row_index += 1
    log.debug('Wrote %d detections to %s', row_index, path)


def read_detections(path):
    """
    Returns an ordered {frame: [Detection]} dict. Features come from the
    sidecar, which must list the same (frame, row) keys in the same order.
    """
    base_rows = []
    for number, row in _data_rows(path):
        if len(row) != 8:
            raise MalformedRowError(path, number, 'expected 8 columns, got {}'.format(len(row)))
        frame = _number(path, number, row[0], int)
        x, y, w, h, conf = (_number(path, number, v) for v in row[2:7])
        class_id = _number(path, number, row[7], int)
        try:
            box = BBox(x, y, w, h)
        except InvalidBoxError as e:
            raise MalformedRowError(path, number, str(e))
        base_rows.append((frame, box, conf, class_id))

    detections = OrderedDict()
    if not base_rows:
        return detections

    sidecar = path + FEATURES_SUFFIX
    if not os.path.isfile(sidecar):
        raise MissingSidecarError('{}: feature sidecar {} is missing'.format(path, sidecar))
    dim = _read_header_dim(sidecar)
    width = dim + ATTRIBUTE_WIDTH

    features = list(_data_rows(sidecar))
    if len(features) != len(base_rows):
        raise SidecarMismatchError('{} has {} rows but {} has {}'.format(path, len(base_rows), sidecar, len(features)))

    for row_index, ((frame, box, conf, class_id), (number, row)) in enumerate(zip(base_rows, features)):
        if len(row) != width + 2:
            raise SidecarMismatchError('{}:{}: expected {} values for d={}, got {}'.format(
                sidecar, number, width, dim, len(row) - 2))
        key = (_number(sidecar, number, row[0], int), _number(sidecar, number, row[1], int))
        if key != (frame, row_index):
            raise SidecarMismatchError('{}:{}: key {} does not match detection ({}, {})'.format(
                sidecar, number, key, frame, row_index))
        values = _vector(sidecar, number, row[2:])
        det = Detection(frame, box, conf, class_id,
                        embedding=values[:dim],
                        color=values[dim:dim + COLOR_BINS],
                        style=values[dim + COLOR_BINS:dim + COLOR_BINS + STYLE_BINS],
                        direction=values[dim + COLOR_BINS + STYLE_BINS:])
        detections.setdefault(frame, []).append(det)

    log.debug('Read %d detections over %d frames from %s', len(base_rows), len(detections), path)
    return detections


def write_trajectories(path, trajectories, banks=True):
    rows = []
    for traj in trajectories:
        for point in traj.points:
            rows.append((point.frame, traj.track_id, point, traj.class_id))
    rows.sort(key=lambda r: (r[0], r[1]))

    with io.open(path, 'w', encoding='utf-8', newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        for frame, track_id, point, class_id in rows:
            box = point.box
            writer.writerow([frame, track_id, fmt(box.x), fmt(box.y), fmt(box.w), fmt(box.h), fmt(point.conf),
                             class_id, int(point.interpolated)])

    if banks:
        dims = {len(v) for traj in trajectories for v in traj.embedding_bank}
        if len(dims) > 1:
            raise SidecarMismatchError('mixed embedding dimensions {}'.format(sorted(dims)))
        with io.open(path + BANKS_SUFFIX, 'w', encoding='utf-8', newline='') as handle:
            handle.write('# d={}\n'.format(dims.pop() if dims else 0))
            writer = csv.writer(handle, lineterminator='\n')
            for traj in sorted(trajectories, key=lambda t: t.track_id):
                for index, vector in enumerate(traj.embedding_bank):
                    writer.writerow([traj.track_id, index] + [fmt(v) for v in vector])
    log.debug('Wrote %d trajectory rows to %s', len(rows), path)


def _read_banks(path, track_ids):
    sidecar = path + BANKS_SUFFIX
    dim = _read_header_dim(sidecar)
    banks = defaultdict(list)
    for number, row in _data_rows(sidecar):
        if len(row) != dim + 2:
            raise SidecarMismatchError('{}:{}: expected {} values, got {}'.format(sidecar, number, dim, len(row) - 2))
        track_id = _number(sidecar, number, row[0], int)
        index = _number(sidecar, number, row[1], int)
        if track_id not in track_ids:
            raise SidecarMismatchError('{}:{}: track {} is not in {}'.format(sidecar, number, track_id, path))
        if index != len(banks[track_id]):
            raise SidecarMismatchError('{}:{}: snapshot {} of track {} out of order'.format(
                sidecar, number, index, track_id))
        banks[track_id].append(_vector(sidecar, number, row[2:]))
    return banks


def read_trajectories(path, require_banks=False):
    """
    Returns trajectories sorted by track id. Embedding banks are attached
    when the sidecar exists; ``require_banks`` makes a missing sidecar an
    error.
    """
    points = defaultdict(list)
    classes = {}
    seen = set()
    for number, row in _data_rows(path):
        if len(row) != 9:
            raise MalformedRowError(path, number, 'expected 9 columns, got {}'.format(len(row)))
        frame = _number(path, number, row[0], int)
        track_id = _number(path, number, row[1], int)
        x, y, w, h, conf = (_number(path, number, v) for v in row[2:7])
        class_id = _number(path, number, row[7], int)
        flag = row[8]
        if flag not in ('0', '1'):
            raise MalformedRowError(path, number, 'interpolated flag must be 0 or 1, got {!r}'.format(flag))
        if (frame, track_id) in seen:
            raise MalformedRowError(path, number, 'duplicate row for frame {} track {}'.format(frame, track_id))
        if classes.setdefault(track_id, class_id) != class_id:
            raise MalformedRowError(path, number, 'track {} changes class'.format(track_id))
        try:
            box = BBox(x, y, w, h)
        except InvalidBoxError as e:
            raise MalformedRowError(path, number, str(e))
        seen.add((frame, track_id))
        points[track_id].append(TrajectoryPoint(frame, box, conf, flag == '1'))

    banks = {}
    if os.path.isfile(path + BANKS_SUFFIX):
        banks = _read_banks(path, set(points))
    elif require_banks and points:
        raise MissingSidecarError('{}: embedding bank sidecar {} is missing'.format(path, path + BANKS_SUFFIX))

    return [Trajectory(track_id, classes[track_id], sorted(points[track_id], key=lambda p: p.frame),
                       banks.get(track_id, []))
            for track_id in sorted(points)]
