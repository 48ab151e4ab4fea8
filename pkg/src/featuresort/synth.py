"""
Synthetic scenes: agents walking piecewise-linear paths, observed through a
noise model that jitters boxes, drops and degrades occluded agents,
injects false positives and produces the feature vectors a detector with
attribute heads would emit.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import ScenarioError
from .features import direction_template
from .structures import (BBox, COLOR_BINS, DIRECTION_BINS, STYLE_BINS, Detection, Trajectory,
                         TrajectoryPoint)

log = logging.getLogger(__name__)

HEADING_STEP = 360.0 / DIRECTION_BINS
OCCLUSION_MODES = ('drop', 'degrade')
DROP_COVERAGE = 0.5


def heading_bin(vx, vy):
    """
    Direction bin of a velocity: 5-degree bins counted from the +x axis.
    """
    return int(round(math.degrees(math.atan2(vy, vx)) / HEADING_STEP)) % DIRECTION_BINS


@dataclass(frozen=True)
class AgentSpec:
    """
    One ground-truth object. ``waypoints`` are (frame, cx, cy) triples; the
    agent lives from the first to the last waypoint frame and moves with
    constant velocity between consecutive waypoints.
    """
    identity: int
    class_id: int
    waypoints: Tuple[Tuple[int, float, float], ...]
    size: Tuple[float, float] = (40.0, 100.0)
    color: Tuple[int, ...] = (0, 1)
    style: int = 0
    appearance: Optional[int] = None

    def __post_init__(self):
        if self.identity < 0:
            raise ScenarioError('agent identity must be >= 0, got {}'.format(self.identity))
        if len(self.waypoints) < 2:
            raise ScenarioError('agent {} needs at least two waypoints'.format(self.identity))
        frames = [w[0] for w in self.waypoints]
        if any(b <= a for a, b in zip(frames, frames[1:])):
            raise ScenarioError('agent {} waypoint frames must increase'.format(self.identity))
        if not (self.size[0] > 0 and self.size[1] > 0):
            raise ScenarioError('agent {} size must be positive'.format(self.identity))
        if not self.color or any(not 0 <= c < COLOR_BINS for c in self.color):
            raise ScenarioError('agent {} color indices must lie in [0, {})'.format(self.identity, COLOR_BINS))
        if not 0 <= self.style < STYLE_BINS:
            raise ScenarioError('agent {} style must lie in [0, {})'.format(self.identity, STYLE_BINS))
        if self.appearance is not None and self.appearance < 0:
            raise ScenarioError('agent {} appearance key must be >= 0'.format(self.identity))

    @property
    def spawn(self):
        return self.waypoints[0][0]

    @property
    def despawn(self):
        return self.waypoints[-1][0]

    @property
    def appearance_key(self):
        return self.identity if self.appearance is None else self.appearance

    def alive(self, frame):
        return self.spawn <= frame <= self.despawn

    def position(self, frame):
        frames = [w[0] for w in self.waypoints]
        return (float(np.interp(frame, frames, [w[1] for w in self.waypoints])),
                float(np.interp(frame, frames, [w[2] for w in self.waypoints])))

    def velocity(self, frame):
        segments = list(zip(self.waypoints, self.waypoints[1:]))
        for start, end in segments:
            if start[0] <= frame < end[0]:
                break
        else:
            start, end = segments[-1]
        span = float(end[0] - start[0])
        return (end[1] - start[1]) / span, (end[2] - start[2]) / span

    def heading(self, frame):
        """
        Heading bin at ``frame``. A standing agent keeps the heading of its
        last moving segment (bin 0 if it never moved).
        """
        last = 0
        for start, end in zip(self.waypoints, self.waypoints[1:]):
            if start[0] > frame:
                break
            vx = (end[1] - start[1]) / float(end[0] - start[0])
            vy = (end[2] - start[2]) / float(end[0] - start[0])
            if vx or vy:
                last = heading_bin(vx, vy)
            if frame < end[0]:
                break
        return last

    def box(self, frame):
        cx, cy = self.position(frame)
        w, h = self.size
        return BBox(cx - w / 2.0, cy - h / 2.0, w, h)

    def true_color(self):
        color = np.zeros(COLOR_BINS)
        color[list(self.color)] = 1.0
        return color

    def true_style(self):
        style = np.zeros(STYLE_BINS)
        style[self.style] = 1.0
        return style

    def signature(self):
        """
        Two agents of one class that share a path and size produce the same
        box in every frame, whatever they look like.
        """
        return self.class_id, self.waypoints, self.size


@dataclass(frozen=True)
class OcclusionZone:
    """
    Static occluder, active on frames ``start`` to ``end`` inclusive.
    ``drop`` hides agents at least half covered; ``degrade`` only lowers
    their confidence and embedding quality.
    """
    box: BBox
    start: int
    end: int
    mode: str = 'drop'

    def __post_init__(self):
        if self.mode not in OCCLUSION_MODES:
            raise ScenarioError('occlusion mode must be one of {}'.format(', '.join(OCCLUSION_MODES)))
        if self.end < self.start:
            raise ScenarioError('occlusion ends before it starts')

    def active(self, frame):
        return self.start <= frame <= self.end


@dataclass(frozen=True)
class NoiseModel:
    box_jitter: float = 1.0
    drop_prob: float = 0.0
    fp_rate: float = 0.0
    base_conf: float = 0.95
    occlusion_penalty: float = 0.3
    embedding_noise: float = 0.05
    occlusion_noise_gain: float = 4.0
    color_blur: float = 0.1
    flip_prob: float = 0.0
    direction_sigma: float = 0.5
    inter_agent_occlusion: bool = True
    seed: int = 0
    occlusions: Tuple[OcclusionZone, ...] = ()

    def __post_init__(self):
        for name in ('drop_prob', 'base_conf', 'occlusion_penalty', 'flip_prob'):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ScenarioError('noise.{} must lie in [0, 1]'.format(name))
        if not 0.0 <= self.color_blur <= 0.5:
            raise ScenarioError('noise.color_blur must lie in [0, 0.5]')
        for name in ('box_jitter', 'fp_rate', 'embedding_noise', 'occlusion_noise_gain', 'direction_sigma'):
            if getattr(self, name) < 0:
                raise ScenarioError('noise.{} must be >= 0'.format(name))

    @classmethod
    def zero(cls, seed=0):
        """Perfect observations: exact boxes, confidence 1, clean features."""
        return cls(box_jitter=0.0, drop_prob=0.0, fp_rate=0.0, base_conf=1.0, occlusion_penalty=0.0,
                   embedding_noise=0.0, occlusion_noise_gain=0.0, color_blur=0.0, flip_prob=0.0,
                   direction_sigma=0.0, inter_agent_occlusion=False, seed=seed)


@dataclass(frozen=True)
class Scenario:
    name: str
    agents: Tuple[AgentSpec, ...]
    noise: NoiseModel = field(default_factory=NoiseModel)
    frames: int = 100
    embedding_dim: int = 128
    frame_width: float = 1920.0
    frame_height: float = 1080.0

    def __post_init__(self):
        seen = set()
        signatures = set()
        for agent in self.agents:
            if agent.identity in seen:
                raise ScenarioError('scenario {}: duplicate agent identity {}'.format(self.name, agent.identity))
            if agent.signature() in signatures:
                raise ScenarioError('scenario {}: agent {} duplicates another agent'.format(self.name, agent.identity))
            seen.add(agent.identity)
            signatures.add(agent.signature())
        if self.frames < 1:
            raise ScenarioError('scenario {}: frames must be >= 1'.format(self.name))
        if self.embedding_dim < 1:
            raise ScenarioError('scenario {}: embedding_dim must be >= 1'.format(self.name))


@dataclass
class SynthResult:
    """
    ``sources[(frame, row)]`` names the agent behind each detection row
    (None for false positives).
    """
    detections: Dict[int, List[Detection]]
    truth: List[Trajectory]
    sources: Dict[Tuple[int, int], Optional[int]]
    frames: int


def identity_embedding(seed, key, dim):
    vector = np.random.default_rng([int(seed), int(key)]).standard_normal(dim)
    return vector / np.linalg.norm(vector)


def _coverage(box: BBox, other: BBox):
    ax1, ay1, ax2, ay2 = box.to_tlbr()
    bx1, by1, bx2, by2 = other.to_tlbr()
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0 or ih <= 0:
        return 0.0
    return min(1.0, iw * ih / box.area)


def _occlusion(agent, box, frame, boxes, noise):
    """
    Returns (occlusion level in [0, 1], dropped).
    """
    level = 0.0
    dropped = False
    for zone in noise.occlusions:
        if not zone.active(frame):
            continue
        covered = _coverage(box, zone.box)
        if zone.mode == 'drop' and covered >= DROP_COVERAGE:
            dropped = True
        level = max(level, covered)

    if noise.inter_agent_occlusion:
        bottom = box.y + box.h
        for identity, other in boxes.items():
            if identity != agent.identity and other.y + other.h > bottom:
                level = max(level, _coverage(box, other))
    return level, dropped


def _soften(vector, blur):
    return vector * (1.0 - 2.0 * blur) + blur


def _flip(rng, vector, active):
    flipped = np.zeros_like(vector)
    flipped[rng.choice(len(vector), size=active, replace=False)] = 1.0
    return flipped


def observed_direction(heading, sigma):
    if sigma == 0:
        direction = np.zeros(DIRECTION_BINS)
        direction[heading] = 1.0
        return direction
    template = np.array(direction_template(heading, sigma))
    return template / template.sum()


def generate(scenario: Scenario, frames: Optional[int] = None, seed: Optional[int] = None) -> SynthResult:
    """
    Render ``scenario`` for frames 1..``frames`` (default: the scenario's
    length). The same seed always produces the same result.
    """
    noise = scenario.noise
    seed = noise.seed if seed is None else seed
    frames = scenario.frames if not frames else frames
    rng = np.random.default_rng(seed)
    dim = scenario.embedding_dim

    agents = sorted(scenario.agents, key=lambda a: a.identity)
    embeddings = {a.identity: identity_embedding(seed, a.appearance_key, dim) for a in agents}
    class_sizes = sorted({(a.class_id, a.size) for a in agents}) or [(0, (40.0, 100.0))]
    truth_points = {a.identity: [] for a in agents}
    detections = {}
    sources = {}

    for frame in range(1, frames + 1):
        live = [a for a in agents if a.alive(frame)]
        boxes = {a.identity: a.box(frame) for a in live}
        rows = []

        for agent in live:
            box = boxes[agent.identity]
            level, dropped = _occlusion(agent, box, frame, boxes, noise)
            truth_points[agent.identity].append(TrajectoryPoint(frame, box, 1.0 - level))

            jitter = rng.normal(0.0, noise.box_jitter, size=4) if noise.box_jitter else np.zeros(4)
            if dropped or rng.random() < noise.drop_prob:
                continue

            x, y, w, h = box.as_array() + jitter
            det_box = BBox(x, y, max(w, 1.0), max(h, 1.0))
            conf = min(1.0, max(0.0, noise.base_conf - noise.occlusion_penalty * level))

            scale = noise.embedding_noise * (1.0 + noise.occlusion_noise_gain * level)
            embedding = embeddings[agent.identity]
            if scale:
                embedding = embedding + rng.normal(0.0, scale, size=dim)
            embedding = embedding / np.linalg.norm(embedding)

            color = agent.true_color()
            style = agent.true_style()
            if noise.flip_prob and rng.random() < noise.flip_prob:
                color = _flip(rng, color, len(agent.color))
            if noise.flip_prob and rng.random() < noise.flip_prob:
                style = _flip(rng, style, 1)

            direction = observed_direction(agent.heading(frame), noise.direction_sigma)
            sources[(frame, len(rows))] = agent.identity
            rows.append(Detection(frame, det_box, conf, agent.class_id, embedding,
                                  _soften(color, noise.color_blur), _soften(style, noise.color_blur),
                                  direction))

        for _ in range(rng.poisson(noise.fp_rate) if noise.fp_rate else 0):
            class_id, (w, h) = class_sizes[rng.integers(len(class_sizes))]
            x = rng.uniform(0.0, max(1.0, scenario.frame_width - w))
            y = rng.uniform(0.0, max(1.0, scenario.frame_height - h))
            embedding = rng.standard_normal(dim)
            direction = rng.dirichlet(np.ones(DIRECTION_BINS))
            sources[(frame, len(rows))] = None
            rows.append(Detection(frame, BBox(x, y, w, h), float(rng.uniform(0.5, noise.base_conf or 1.0)),
                                  class_id, embedding / np.linalg.norm(embedding), rng.uniform(size=COLOR_BINS),
                                  rng.uniform(size=STYLE_BINS), direction))

        if rows:
            detections[frame] = rows

    truth = [Trajectory(a.identity, a.class_id, truth_points[a.identity]) for a in agents
             if truth_points[a.identity]]
    log.info('Generated %s: %d frames, %d detections, %d agents', scenario.name, frames,
             sum(len(r) for r in detections.values()), len(truth))
    return SynthResult(detections, truth, sources, frames)
