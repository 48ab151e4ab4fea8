import os

import pytest

from featuresort.errors import EXIT_DATA, EXIT_OK, EXIT_USAGE
from featuresort.fileio import read_trajectories
from featuresort.main import main
from featuresort.prometheus_metrics import read_metrics


def _read_bytes(path):
    with open(path, 'rb') as handle:
        return handle.read()


@pytest.fixture
def world_dir(tmp_path):
    out = str(tmp_path / 'world')
    assert main(['synth', 'crossing_pair', '--out', out, '--seed', '3']) == EXIT_OK
    return out


def test_pipeline(tmp_path, world_dir, capsys):
    det = os.path.join(world_dir, 'det.txt')
    gt = os.path.join(world_dir, 'gt.txt')
    tracks = str(tmp_path / 'tracks.txt')
    refined = str(tmp_path / 'refined.txt')
    run_metrics = str(tmp_path / 'run.prom')

    assert os.path.isfile(det + '.features')
    assert main(['track', det, '--out', tracks, '--metrics-file', run_metrics]) == EXIT_OK
    assert os.path.isfile(tracks + '.banks')
    assert main(['postprocess', tracks, '--out', refined]) == EXIT_OK
    assert main(['eval', refined, gt]) == EXIT_OK

    trajectories = read_trajectories(tracks)
    values = read_metrics(run_metrics)
    assert values[('featuresort_run_tracks', 'det')] == len(trajectories)
    assert values[('featuresort_run_frames', 'det')] > 0
    assert values[('featuresort_track_processing_seconds_count', 'det')] == 1

    report = read_metrics(refined + '.prom')
    assert ('featuresort_mota', 'refined') in report
    assert 'MOTA' in capsys.readouterr().out


def test_eval_truth_against_itself(tmp_path, world_dir, capsys):
    gt = os.path.join(world_dir, 'gt.txt')
    out = str(tmp_path / 'eval.prom')

    assert main(['eval', gt, gt, '--out', out, '--sequence', 'oracle']) == EXIT_OK
    values = read_metrics(out)
    assert values[('featuresort_mota', 'oracle')] == pytest.approx(1.0)
    assert values[('featuresort_idf1', 'oracle')] == pytest.approx(1.0)
    assert values[('featuresort_id_switches', 'oracle')] == 0
    assert 'MOTA 1.0000' in capsys.readouterr().out


def test_tracking_is_reproducible(tmp_path, world_dir):
    det = os.path.join(world_dir, 'det.txt')
    first = str(tmp_path / 'first.txt')
    second = str(tmp_path / 'second.txt')

    assert main(['track', det, '--out', first]) == EXIT_OK
    assert main(['track', det, '--out', second]) == EXIT_OK
    assert _read_bytes(first) == _read_bytes(second)
    assert _read_bytes(first + '.banks') == _read_bytes(second + '.banks')


def test_parallel_jobs_match_serial(tmp_path):
    inputs = []
    for name, seed in (('a', 1), ('b', 2)):
        out = str(tmp_path / name)
        assert main(['synth', 'crossing_pair', '--out', out, '--seed', str(seed)]) == EXIT_OK
        inputs.append(os.path.join(out, 'det.txt'))

    serial = str(tmp_path / 'serial')
    parallel = str(tmp_path / 'parallel')
    assert main(['track'] + inputs + ['--out', serial, '--jobs', '1']) == EXIT_OK
    assert main(['track'] + inputs + ['--out', parallel, '--jobs', '4']) == EXIT_OK

    names = sorted(os.listdir(serial))
    assert names == ['a_det.txt', 'a_det.txt.banks', 'b_det.txt', 'b_det.txt.banks']
    assert names == sorted(os.listdir(parallel))
    for name in names:
        assert _read_bytes(os.path.join(serial, name)) == _read_bytes(os.path.join(parallel, name))


def _chain(tmp_path, run, inputs, truths, jobs):
    tracks = str(tmp_path / run)
    assert main(['track'] + inputs + ['--out', tracks, '--jobs', str(jobs)]) == EXIT_OK

    names = sorted(name for name in os.listdir(tracks) if not name.endswith('.banks'))
    assert len(names) == len(truths)

    outputs = {}
    for name, gt in zip(names, truths):
        path = os.path.join(tracks, name)
        refined = path + '.post'
        prom = path + '.prom'
        assert main(['postprocess', path, '--out', refined]) == EXIT_OK
        assert main(['eval', refined, gt, '--out', prom, '--sequence', name]) == EXIT_OK
        for produced in (path, path + '.banks', refined, prom):
            outputs[os.path.relpath(produced, tracks)] = _read_bytes(produced)
    return outputs


def test_whole_chain_is_byte_identical(tmp_path):
    inputs, truths = [], []
    for seed in (0, 1, 2, 3):
        out = str(tmp_path / 'corridor{}'.format(seed))
        assert main(['synth', 'occlusion_corridor', '--out', out, '--seed', str(seed)]) == EXIT_OK
        inputs.append(os.path.join(out, 'det.txt'))
        truths.append(os.path.join(out, 'gt.txt'))

    first = _chain(tmp_path, 'first', inputs, truths, jobs=1)
    parallel = _chain(tmp_path, 'parallel', inputs, truths, jobs=4)
    again = _chain(tmp_path, 'again', inputs, truths, jobs=1)

    assert len(first) == 16
    assert sorted(first) == sorted(parallel) == sorted(again)
    for name, content in first.items():
        assert content, name
        assert parallel[name] == content, name
        assert again[name] == content, name


def test_empty_detection_file(tmp_path):
    det = tmp_path / 'det.txt'
    det.write_text('')
    out = str(tmp_path / 'tracks.txt')

    assert main(['track', str(det), '--out', out]) == EXIT_OK
    assert read_trajectories(out) == []


def test_config_file_and_flags(tmp_path, world_dir):
    config = tmp_path / 'featuresort.cfg'
    config.write_text('# loose gate\ntracker.iou_min = 0.3\ngsp.max_gap = 10\n')
    det = os.path.join(world_dir, 'det.txt')

    assert main(['track', det, '--out', str(tmp_path / 't.txt'), '--config', str(config),
                 '--set', 'tracker.alpha=0.9']) == EXIT_OK


def test_unknown_scenario_exits_2(tmp_path):
    assert main(['synth', 'no_such_scenario', '--out', str(tmp_path / 'out')]) == EXIT_DATA


def test_missing_detection_file_exits_2(tmp_path):
    argv = ['track', str(tmp_path / 'missing' / 'det.txt'), '--out', str(tmp_path / 'tracks.txt')]
    assert main(argv) == EXIT_DATA


@pytest.mark.parametrize('extra', [
    ['--set', 'tracker.nope=1'],
    ['--set', 'tracker.iou_min'],
    ['--set', 'tracker.iou_min=2'],
    ['--jobs', '0'],
])
def test_usage_errors_exit_1(tmp_path, world_dir, extra):
    det = os.path.join(world_dir, 'det.txt')
    assert main(['track', det, '--out', str(tmp_path / 't.txt')] + extra) == EXIT_USAGE


def test_missing_config_file(tmp_path, world_dir):
    det = os.path.join(world_dir, 'det.txt')
    argv = ['track', det, '--out', str(tmp_path / 't.txt'), '--config', str(tmp_path / 'absent.cfg')]
    assert main(argv) == EXIT_USAGE


@pytest.mark.parametrize('argv', [
    [],
    ['frobnicate'],
    ['track'],
    ['synth', 'crossing_pair', '--out', 'x', '--seed', 'three'],
])
def test_argument_errors(argv):
    with pytest.raises(SystemExit) as excinfo:
        main(argv)
    assert excinfo.value.code == EXIT_USAGE
