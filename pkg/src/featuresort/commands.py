"""
The work behind each command-line subcommand.
"""
import dataclasses
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor

from . import prometheus_metrics
from .errors import ConfigError
from .experiments import run_ablation
from .fileio import read_detections, read_trajectories, write_detections, write_trajectories
from .metrics import evaluate
from .postprocess import postprocess
from .scenarios import load_scenario
from .synth import generate
from .tracker import Tracker

log = logging.getLogger(__name__)


def sequence_names(paths):
    """
    Output names for a batch of inputs: the file stem, prefixed with the
    parent directory when stems collide (several ``det.txt`` files).
    """
    stems = [os.path.splitext(os.path.basename(p))[0] for p in paths]
    if len(set(stems)) == len(stems):
        return stems
    names = ['{}_{}'.format(os.path.basename(os.path.dirname(os.path.abspath(p))), s) for p, s in zip(paths, stems)]
    if len(set(names)) != len(names):
        raise ConfigError('cannot derive distinct output names for {}'.format(', '.join(paths)))
    return names


def track_file(path, out_path, cfg):
    """
    Track one detection file into one trajectory file. Runs in worker
    processes, so it only takes and returns plain data.
    """
    start_time = time.time()
    detections = read_detections(path)
    tracker = Tracker(cfg.tracker)
    trajectories = tracker.run(detections)
    write_trajectories(out_path, trajectories)

    stats = dict(tracker.stats)
    stats['kalman_regularized'] = tracker.diagnostics.regularized
    stats['kalman_clamped_conf'] = tracker.diagnostics.clamped_conf
    return stats, time.time() - start_time


def cmd_track(inputs, out, cfg, jobs=1, metrics_file=None):
    if len(inputs) > 1:
        os.makedirs(out, exist_ok=True)
        names = sequence_names(inputs)
        outputs = [os.path.join(out, name + '.txt') for name in names]
    else:
        names = [os.path.splitext(os.path.basename(inputs[0]))[0]]
        outputs = [out]

    log.info('Tracking %d sequence(s) with %d job(s)', len(inputs), jobs)
    if jobs > 1 and len(inputs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(track_file, inputs, outputs, [cfg] * len(inputs)))
    else:
        results = [track_file(path, out_path, cfg) for path, out_path in zip(inputs, outputs)]

    if metrics_file:
        prometheus_metrics.export_run(
            ((name, stats, elapsed) for name, (stats, elapsed) in zip(names, results)), metrics_file)

    frames = sum(stats.get('frames', 0) for stats, _ in results)
    tracks = sum(stats.get('tracks', 0) for stats, _ in results)
    print('tracked {} sequence(s): {} frames, {} tracks'.format(len(inputs), frames, tracks))
    return results


def cmd_postprocess(path, out, cfg):
    trajectories = read_trajectories(path, require_banks=cfg.link.enabled)
    records = []
    refined = postprocess(trajectories, cfg.gsp, cfg.link, bank_size=cfg.tracker.bank_size, records=records)
    write_trajectories(out, refined)
    for record in records:
        log.debug('Linked %d -> %d: gap %d, %.1f px, similarity %.4f', record.earlier_id, record.later_id,
                  record.gap, record.spatial, record.similarity)
    print('post-processed {} trajectories into {} ({} links)'.format(len(trajectories), len(refined), len(records)))
    return refined


def cmd_eval(pred_path, truth_path, out=None, sequence=None):
    report = evaluate(read_trajectories(pred_path), read_trajectories(truth_path))
    sequence = sequence or os.path.splitext(os.path.basename(pred_path))[0]
    prometheus_metrics.export_report(report, out or pred_path + '.prom', sequence)
    print(report.summary())
    return report


def cmd_synth(name, out_dir, cfg, seed=None):
    scenario = load_scenario(name)
    if cfg.synth.embedding_dim:
        scenario = dataclasses.replace(scenario, embedding_dim=cfg.synth.embedding_dim)
    seed = cfg.synth.seed if seed is None else seed

    world = generate(scenario, frames=cfg.synth.frames or None, seed=seed)
    os.makedirs(out_dir, exist_ok=True)
    write_detections(os.path.join(out_dir, 'det.txt'), world.detections)
    write_trajectories(os.path.join(out_dir, 'gt.txt'), world.truth, banks=False)
    print('generated {}: {} frames, {} detections, {} objects in {}'.format(
        scenario.name, world.frames, sum(len(r) for r in world.detections.values()), len(world.truth), out_dir))
    return world


def cmd_ablate(preset, seeds, cfg, first_seed=0):
    rows = run_ablation(preset, range(first_seed, first_seed + seeds), cfg=cfg)
    for row in rows:
        print(row.format())
    return rows
