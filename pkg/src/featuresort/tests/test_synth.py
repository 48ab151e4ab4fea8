import dataclasses

import numpy as np
import pytest

from featuresort.errors import ScenarioError, UnknownScenarioError
from featuresort.fileio import write_detections, write_trajectories
from featuresort.scenarios import PRESETS, load_scenario, parse_scenario, preset_scenarios
from featuresort.structures import BBox, iou
from featuresort.synth import AgentSpec, NoiseModel, OcclusionZone, Scenario, generate, heading_bin

WALKER = AgentSpec(1, 0, ((1, 100.0, 200.0), (20, 138.0, 200.0)), color=(2, 5), style=4)

SCENARIO_FILE = '''
[scenario]
name = corridor
frames = 30
embedding_dim = 16

[noise]
box_jitter = 0.5
drop_prob = 0.1
inter_agent_occlusion = no

[agent.3]
waypoints = 1:300,400; 30:358,400
color = 1,4
style = 3

[agent.4]
class_id = 1
waypoints = 1:900,700; 15:900,700; 30:870,700
size = 160,80

[occlusion.1]
box = 340,320,140,160
frames = 10-12
mode = degrade
'''


def scenario(*agents, noise=None, frames=20):
    return Scenario('test', tuple(agents), noise or NoiseModel.zero(), frames=frames, embedding_dim=16)


def test_zero_noise_detections_equal_truth():
    world = generate(scenario(WALKER), seed=3)
    truth = world.truth[0]

    assert len(world.detections) == 20
    for point in truth.points:
        (det,) = world.detections[point.frame]
        assert det.box == point.box
        assert det.conf == 1.0
        assert point.conf == 1.0
        assert np.argmax(det.direction) == 0
        assert np.linalg.norm(det.embedding) == pytest.approx(1.0)


def test_drop_probability_one_gives_no_detections():
    noise = dataclasses.replace(NoiseModel.zero(), drop_prob=1.0)
    world = generate(scenario(WALKER, noise=noise))
    assert world.detections == {}
    assert len(world.truth[0]) == 20


def test_same_seed_same_world(tmp_path):
    preset = load_scenario('crowd_20')
    paths = []
    for run in range(2):
        world = generate(preset, frames=40, seed=11)
        base = tmp_path / 'run{}'.format(run)
        base.mkdir()
        write_detections(str(base / 'det.txt'), world.detections)
        write_trajectories(str(base / 'gt.txt'), world.truth, banks=False)
        paths.append(base)

    for name in ('det.txt', 'det.txt.features', 'gt.txt'):
        assert (paths[0] / name).read_bytes() == (paths[1] / name).read_bytes()


def test_different_seeds_differ():
    preset = load_scenario('crossing_pair')
    a = generate(preset, frames=10, seed=1)
    b = generate(preset, frames=10, seed=2)
    assert a.detections[1][0].box != b.detections[1][0].box


@pytest.mark.parametrize('velocity,expected', [
    ((1.0, 0.0), 0),
    ((0.0, 1.0), 18),
    ((-1.0, 0.0), 36),
    ((0.0, -1.0), 54),
    ((1.0, 1.0), 9),
    ((1.0, -0.01), 0),
])
def test_heading_bin(velocity, expected):
    assert heading_bin(*velocity) == expected


def test_direction_observation_at_zero_blur_peaks_on_heading():
    diagonal = AgentSpec(2, 0, ((1, 100.0, 100.0), (20, 119.0, 119.0)))
    world = generate(scenario(diagonal))
    for dets in world.detections.values():
        assert int(np.argmax(dets[0].direction)) == heading_bin(1.0, 1.0)


def test_standing_agent_keeps_last_heading():
    agent = AgentSpec(1, 0, ((1, 0.0, 0.0), (10, 0.0, 90.0), (20, 0.0, 90.0)))
    assert agent.heading(5) == 18
    assert agent.heading(15) == 18
    assert AgentSpec(2, 0, ((1, 5.0, 5.0), (9, 5.0, 5.0))).heading(3) == 0


def test_every_detection_maps_to_a_truth_record():
    world = generate(load_scenario('crowd_20'), frames=200, seed=5)
    truth = {(p.frame, t.track_id) for t in world.truth for p in t.points}
    identities = {t.track_id for t in world.truth}
    false_positives = 0
    for frame, rows in world.detections.items():
        agents = [world.sources[(frame, row)] for row in range(len(rows))]
        real = [a for a in agents if a is not None]
        assert len(real) == len(set(real))
        for agent in real:
            assert agent in identities
            assert (frame, agent) in truth
        false_positives += len(agents) - len(real)
    assert false_positives > 0


def test_occluder_drops_the_agent():
    world = generate(load_scenario('occlusion_corridor'), seed=0)
    seen = {frame for frame, rows in world.detections.items()
            for row in range(len(rows)) if world.sources[(frame, row)] == 1}
    assert seen.isdisjoint(range(40, 52))
    assert {39, 52} <= seen
    hidden = [p for p in world.truth[0].points if 40 <= p.frame <= 51]
    assert all(p.conf == 0.0 for p in hidden)


def test_look_alikes_share_an_embedding():
    noise = NoiseModel.zero()
    a = AgentSpec(1, 0, ((1, 100.0, 100.0), (5, 100.0, 100.0)), appearance=7)
    b = AgentSpec(2, 0, ((1, 600.0, 100.0), (5, 600.0, 100.0)), appearance=7)
    world = generate(scenario(a, b, noise=noise, frames=5))
    first, second = world.detections[1]
    assert np.allclose(first.embedding, second.embedding)


def test_duplicate_agents_are_rejected():
    with pytest.raises(ScenarioError):
        scenario(WALKER, dataclasses.replace(WALKER, color=(1, 2)))
    with pytest.raises(ScenarioError):
        scenario(WALKER, dataclasses.replace(WALKER, identity=9))
    with pytest.raises(ScenarioError):
        scenario(WALKER, dataclasses.replace(WALKER, identity=9, appearance=3))

    shifted = dataclasses.replace(WALKER, identity=9, waypoints=((1, 100.0, 320.0), (20, 138.0, 320.0)))
    assert len(scenario(WALKER, shifted).agents) == 2


@pytest.mark.parametrize('kwargs', [
    {'waypoints': ((1, 0.0, 0.0),)},
    {'waypoints': ((5, 0.0, 0.0), (5, 1.0, 1.0))},
    {'color': (10,)},
    {'style': 20},
    {'size': (0.0, 10.0)},
])
def test_invalid_agents_are_rejected(kwargs):
    with pytest.raises(ScenarioError):
        dataclasses.replace(WALKER, **kwargs)


def test_invalid_noise_and_occlusion():
    with pytest.raises(ScenarioError):
        NoiseModel(drop_prob=1.5)
    with pytest.raises(ScenarioError):
        OcclusionZone(BBox(0, 0, 10, 10), 5, 4)
    with pytest.raises(ScenarioError):
        OcclusionZone(BBox(0, 0, 10, 10), 1, 4, mode='blur')


def test_preset_library():
    presets = preset_scenarios()
    assert set(presets) == {'crossing_pair', 'occlusion_corridor', 'crowd_20', 'two_class'}
    assert len(presets['crowd_20'].agents) == 20
    assert {a.class_id for a in presets['two_class'].agents} == {0, 1}
    assert presets['crowd_20'] == load_scenario('crowd_20')


def test_crossing_pair_walkers_face_each_other():
    first, second = load_scenario('crossing_pair').agents
    assert first.appearance_key == second.appearance_key
    assert (first.heading(50) - second.heading(50)) % 72 == 36
    assert first.heading(1) == first.heading(160) == 0
    assert second.heading(1) == second.heading(160) == 36


def test_crossing_pair_overlaps_briefly():
    world = generate(load_scenario('crossing_pair'), seed=0)
    first, second = world.truth
    overlapping = [a.frame for a, b in zip(first.points, second.points) if iou(a.box, b.box) > 0]

    assert overlapping == list(range(43, 58))
    assert iou(first.points[0].box, second.points[0].box) == 0.0
    assert iou(first.points[-1].box, second.points[-1].box) == 0.0


def test_crossing_pair_hides_whoever_is_behind():
    world = generate(load_scenario('crossing_pair'), seed=0)
    conf = {}
    for frame, rows in world.detections.items():
        for row, det in enumerate(rows):
            conf[frame, world.sources[(frame, row)]] = det.conf

    for frame in (47, 54):
        assert min(conf[frame, 1], conf[frame, 2]) >= 0.5
    for frame in (48, 49, 50):
        assert conf[frame, 1] == pytest.approx(0.95)
        assert conf[frame, 2] < 0.5
    for frame in (51, 52, 53):
        assert conf[frame, 1] < 0.5
        assert conf[frame, 2] == pytest.approx(0.95)


def test_parse_scenario_file(tmp_path):
    path = tmp_path / 'corridor.ini'
    path.write_text(SCENARIO_FILE)
    loaded = load_scenario(str(path))

    assert loaded.name == 'corridor'
    assert loaded.frames == 30
    assert loaded.embedding_dim == 16
    assert loaded.noise.box_jitter == 0.5
    assert loaded.noise.inter_agent_occlusion is False
    assert [a.identity for a in loaded.agents] == [3, 4]
    assert loaded.agents[0].waypoints == ((1, 300.0, 400.0), (30, 358.0, 400.0))
    assert loaded.agents[0].color == (1, 4)
    assert loaded.agents[1].size == (160.0, 80.0)
    assert loaded.noise.occlusions == (OcclusionZone(BBox(340.0, 320.0, 140.0, 160.0), 10, 12, 'degrade'),)

    world = generate(loaded, seed=1)
    assert len(world.truth) == 2


@pytest.mark.parametrize('text', [
    '[noise]\nbox_jitter = 1\n',
    '[scenario]\nname = x\n',
    '[scenario]\n[agent.1]\nwaypoints = 1:0,0; 5:zero,0\n',
    '[scenario]\n[agent.1]\nwaypoints = 1:0,0; 5:1,0\n[noise]\nwobble = 2\n',
    '[scenario]\n[agent.1]\nwaypoints = 1:0,0; 5:1,0\n[camera]\nfov = 2\n',
])
def test_bad_scenario_files(text):
    with pytest.raises(ScenarioError):
        parse_scenario(text)


def test_unknown_preset_lists_the_presets():
    with pytest.raises(UnknownScenarioError) as excinfo:
        load_scenario('rush_hour')
    assert excinfo.value.available == sorted(PRESETS)
    assert 'crossing_pair' in str(excinfo.value)


def test_missing_scenario_file():
    with pytest.raises(ScenarioError):
        load_scenario('no/such/scenario.ini')
