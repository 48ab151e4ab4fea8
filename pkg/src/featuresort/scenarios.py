"""
Built-in scenario library and the INI scenario file reader.

A scenario file looks like::

    [scenario]
    name = corridor
    frames = 90

    [noise]
    box_jitter = 1.0
    embedding_noise = 0.05

    [agent.1]
    class_id = 0
    waypoints = 1:300,400; 90:478,400
    size = 40,100
    color = 0,3
    style = 2

    [occlusion.1]
    box = 340,320,140,160
    frames = 40-51
    mode = drop
"""
import configparser
import dataclasses
import logging
import math
import os

import numpy as np

from .errors import ScenarioError, UnknownScenarioError
from .structures import BBox
from .synth import AgentSpec, NoiseModel, OcclusionZone, Scenario

log = logging.getLogger(__name__)

CROWD_LAYOUT_SEED = 2020
CROWD_SEGMENT = 25
CROWD_HORIZON = 2000


def crossing_pair():
    """
    Two look-alike pedestrians (same identity embedding) walking towards
    each other. They differ in clothing colors, style and heading only.

    The boxes overlap on frames 43-57. Walker 2 is behind until the
    midpoint (frame 50.5), where their vertical paths cross and walker 1
    falls behind; a walker more than half covered drops below the
    detector's confidence floor, so each one is hidden for three frames.
    Walker 2 speeds up from 2 to 4 px/frame as it disappears, so its
    coasting track lags behind it when it reappears.
    """
    return Scenario(
        name='crossing_pair',
        agents=(
            AgentSpec(1, 0, ((1, 840.0, 502.475), (160, 1158.0, 494.525)),
                      color=(0, 3), style=2, appearance=1),
            AgentSpec(2, 0, ((1, 1045.0, 497.525), (47, 953.0, 499.825), (160, 501.0, 505.475)),
                      color=(5, 8), style=11, appearance=1),
        ),
        noise=NoiseModel(box_jitter=1.0, embedding_noise=0.05, occlusion_noise_gain=6.0, base_conf=0.95,
                         occlusion_penalty=0.9, color_blur=0.1, direction_sigma=0.5),
        frames=160,
    )


def occlusion_corridor():
    """
    A pedestrian disappears behind an occluder for 12 frames, long enough
    for its track to be deleted, while a second one walks a far lane.
    """
    return Scenario(
        name='occlusion_corridor',
        agents=(
            AgentSpec(1, 0, ((1, 300.0, 400.0), (90, 478.0, 400.0)), color=(1, 4), style=3),
            AgentSpec(2, 0, ((1, 1500.0, 700.0), (90, 1366.5, 700.0)), color=(2, 7), style=9),
        ),
        noise=NoiseModel(box_jitter=1.0, embedding_noise=0.05, color_blur=0.1, direction_sigma=0.5,
                         occlusions=(OcclusionZone(BBox(340.0, 320.0, 140.0, 160.0), 40, 51, 'drop'),)),
        frames=90,
    )


def _random_walk(rng, start, speed, heading, horizon):
    waypoints = [(1, float(start[0]), float(start[1]))]
    x, y = start
    for frame in range(1 + CROWD_SEGMENT, horizon + CROWD_SEGMENT, CROWD_SEGMENT):
        heading += math.radians(rng.uniform(-5.0, 5.0))
        x += speed * CROWD_SEGMENT * math.cos(heading)
        y += speed * CROWD_SEGMENT * math.sin(heading)
        waypoints.append((frame, float(x), float(y)))
    return tuple(waypoints)


def crowd_20():
    """
    Twenty pedestrians on slowly turning random walks. The layout is fixed;
    only the observation noise follows the run seed.
    """
    rng = np.random.default_rng(CROWD_LAYOUT_SEED)
    agents = []
    for identity in range(1, 21):
        start = (rng.uniform(100.0, 1820.0), rng.uniform(100.0, 980.0))
        speed = rng.uniform(1.0, 2.0)
        heading = rng.uniform(0.0, 2.0 * math.pi)
        colors = tuple(sorted(int(c) for c in rng.choice(10, size=2, replace=False)))
        agents.append(AgentSpec(identity, 0, _random_walk(rng, start, speed, heading, CROWD_HORIZON),
                                color=colors, style=int(rng.integers(20))))
    return Scenario(
        name='crowd_20',
        agents=tuple(agents),
        noise=NoiseModel(box_jitter=1.0, drop_prob=0.02, fp_rate=0.1, embedding_noise=0.05),
        frames=300,
    )


def two_class():
    """
    Pedestrians crossing a road while cars drive along it.
    """
    return Scenario(
        name='two_class',
        agents=(
            AgentSpec(1, 0, ((1, 700.0, 300.0), (150, 700.0, 820.0)), color=(0, 6), style=1),
            AgentSpec(2, 0, ((1, 900.0, 820.0), (150, 900.0, 300.0)), color=(3, 4), style=5),
            AgentSpec(3, 0, ((1, 1100.0, 300.0), (150, 1100.0, 745.0)), color=(2, 9), style=8),
            AgentSpec(4, 1, ((1, 200.0, 560.0), (150, 796.0, 560.0)), size=(160.0, 80.0), color=(7, 8), style=14),
            AgentSpec(5, 1, ((1, 1700.0, 620.0), (150, 1104.0, 620.0)), size=(160.0, 80.0), color=(1, 5),
                      style=17),
        ),
        noise=NoiseModel(box_jitter=1.0, embedding_noise=0.05, fp_rate=0.05),
        frames=150,
    )


PRESETS = {
    'crossing_pair': crossing_pair,
    'occlusion_corridor': occlusion_corridor,
    'crowd_20': crowd_20,
    'two_class': two_class,
}


def preset_scenarios():
    return {name: build() for name, build in PRESETS.items()}


def _floats(text, count, what):
    try:
        values = [float(v) for v in text.split(',')]
    except ValueError:
        raise ScenarioError('cannot read {} from {!r}'.format(what, text))
    if len(values) != count:
        raise ScenarioError('{} needs {} comma-separated numbers, got {!r}'.format(what, count, text))
    return values


def _waypoints(text):
    waypoints = []
    for item in text.split(';'):
        item = item.strip()
        if not item:
            continue
        try:
            frame, position = item.split(':', 1)
            frame = int(frame)
        except ValueError:
            raise ScenarioError('waypoint must look like frame:cx,cy, got {!r}'.format(item))
        cx, cy = _floats(position, 2, 'waypoint position')
        waypoints.append((frame, cx, cy))
    return tuple(waypoints)


def _noise_values(section):
    values = {}
    defaults = {f.name: f.default for f in dataclasses.fields(NoiseModel) if f.name != 'occlusions'}
    for key in section:
        if key not in defaults:
            raise ScenarioError('unknown noise key {!r}'.format(key))
        default = defaults[key]
        try:
            if isinstance(default, bool):
                values[key] = section.getboolean(key)
            elif isinstance(default, int):
                values[key] = section.getint(key)
            else:
                values[key] = section.getfloat(key)
        except ValueError:
            raise ScenarioError('cannot read noise.{} from {!r}'.format(key, section[key]))
    return values


def parse_scenario(text, origin='<scenario>'):
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text, source=origin)
    except configparser.Error as e:
        raise ScenarioError('{}: {}'.format(origin, e))

    if not parser.has_section('scenario'):
        raise ScenarioError('{}: missing [scenario] section'.format(origin))
    head = parser['scenario']

    agents = []
    occlusions = []
    try:
        for name in parser.sections():
            section = parser[name]
            if name.startswith('agent.'):
                agents.append(AgentSpec(
                    identity=int(name.split('.', 1)[1]),
                    class_id=section.getint('class_id', 0),
                    waypoints=_waypoints(section.get('waypoints', '')),
                    size=tuple(_floats(section.get('size', '40,100'), 2, 'size')),
                    color=tuple(int(c) for c in section.get('color', '0,1').split(',')),
                    style=section.getint('style', 0),
                    appearance=section.getint('appearance') if 'appearance' in section else None,
                ))
            elif name.startswith('occlusion.'):
                start, _, end = section.get('frames', '').partition('-')
                occlusions.append(OcclusionZone(
                    BBox(*_floats(section.get('box', ''), 4, 'occlusion box')),
                    int(start), int(end or start), section.get('mode', 'drop')))
            elif name not in ('scenario', 'noise'):
                raise ScenarioError('{}: unknown section [{}]'.format(origin, name))

        noise = NoiseModel(occlusions=tuple(occlusions),
                           **(_noise_values(parser['noise']) if parser.has_section('noise') else {}))
        scenario = Scenario(
            name=head.get('name', os.path.splitext(os.path.basename(origin))[0]),
            agents=tuple(agents),
            noise=noise,
            frames=head.getint('frames', 100),
            embedding_dim=head.getint('embedding_dim', 128),
            frame_width=head.getfloat('frame_width', 1920.0),
            frame_height=head.getfloat('frame_height', 1080.0),
        )
    except ValueError as e:
        raise ScenarioError('{}: {}'.format(origin, e))

    if not scenario.agents:
        raise ScenarioError('{}: scenario has no [agent.<id>] sections'.format(origin))
    return scenario


def load_scenario(name_or_path):
    """
    A preset by name, or a scenario file by path.
    """
    if os.path.isfile(name_or_path):
        with open(name_or_path, 'r', encoding='utf-8') as spec_file:
            scenario = parse_scenario(spec_file.read(), origin=name_or_path)
        log.debug('Loaded scenario %s from %s', scenario.name, name_or_path)
        return scenario
    if name_or_path in PRESETS:
        return PRESETS[name_or_path]()
    if name_or_path.endswith('.ini'):
        raise ScenarioError('scenario file {} not found'.format(name_or_path))
    raise UnknownScenarioError(name_or_path, PRESETS)
