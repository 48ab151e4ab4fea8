"""
Configuration for the tracker, post-processing and the synthetic world.

Config files are flat ``section.key = value`` lines, e.g.::

    # tracker thresholds
    tracker.iou_min = 0.45
    tracker.class.1.iou_min = 0.3
    gsp.max_gap = 20
    link.spatial_max = 70

Command-line ``--set section.key=value`` flags win over the file, which wins
over the defaults declared here.
"""
import dataclasses
import io
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional

from .errors import ConfigError

log = logging.getLogger(__name__)

MATCHING_MODES = ('vanilla', 'cascade')
APPEARANCE_MODES = ('ema', 'gallery')

_TRUE = ('1', 'true', 'yes', 'on')
_FALSE = ('0', 'false', 'no', 'off')


@dataclass(frozen=True)
class TrackerConfig:
    lambda_motion: float = 0.1
    lambda_edge: float = 0.4
    lambda_color: float = 0.25
    lambda_style: float = 0.25
    iou_min: float = 0.45
    dir_max: float = 0.5
    d_max: float = 1e4
    epsilon: float = 1e-3
    alpha: float = 0.8
    age_max: int = 10
    conf_min: float = 0.5
    stack_len: int = 30
    sigma_dir: float = 2.0
    n_init: int = 3
    embedding_dim: int = 128
    snapshot_period: int = 5
    bank_size: int = 16
    matching: str = 'vanilla'
    appearance: str = 'ema'
    gallery_budget: int = 100
    nsa: bool = True
    direction_gate: bool = True
    frame_width: float = 1920.0
    frame_height: float = 1080.0
    std_weight_position: float = 1.0 / 20
    std_weight_velocity: float = 1.0 / 160
    class_overrides: Dict[int, Dict[str, object]] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for name in ('lambda_motion', 'lambda_edge', 'lambda_color', 'lambda_style'):
            if getattr(self, name) < 0:
                raise ConfigError('tracker.{} must be >= 0'.format(name))
        if not 0.0 <= self.iou_min <= 1.0:
            raise ConfigError('tracker.iou_min must lie in [0, 1]')
        if self.age_max < 1:
            raise ConfigError('tracker.age_max must be >= 1')
        if self.stack_len < 1:
            raise ConfigError('tracker.stack_len must be >= 1')
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError('tracker.alpha must lie in [0, 1]')
        if self.sigma_dir <= 0:
            raise ConfigError('tracker.sigma_dir must be > 0')
        if self.n_init < 1 or self.snapshot_period < 1 or self.bank_size < 1 or self.gallery_budget < 1:
            raise ConfigError('tracker.n_init, snapshot_period, bank_size and gallery_budget must be >= 1')
        if self.matching not in MATCHING_MODES:
            raise ConfigError('tracker.matching must be one of {}'.format(', '.join(MATCHING_MODES)))
        if self.appearance not in APPEARANCE_MODES:
            raise ConfigError('tracker.appearance must be one of {}'.format(', '.join(APPEARANCE_MODES)))
        if self.frame_width <= 0 or self.frame_height <= 0:
            raise ConfigError('tracker.frame_width and frame_height must be > 0')

    @property
    def frame_diagonal(self):
        return (self.frame_width ** 2 + self.frame_height ** 2) ** 0.5

    @property
    def reject_threshold(self):
        return self.d_max

    def for_class(self, class_id):
        """
        Tracker settings for one object class. Classes are matched separately,
        so each subset may run with its own thresholds and weights.
        """
        overrides = self.class_overrides.get(int(class_id))
        if not overrides:
            return self
        return dataclasses.replace(self, **overrides)


@dataclass(frozen=True)
class GspConfig:
    enabled: bool = True
    max_gap: int = 20
    length_scale: float = 10.0
    noise_var: float = 1.0
    signal_var: float = 1.0
    min_size: float = 1.0

    def __post_init__(self):
        if self.length_scale <= 0 or self.noise_var <= 0 or self.signal_var <= 0:
            raise ConfigError('gsp.length_scale, gsp.noise_var and gsp.signal_var must be > 0')
        if self.max_gap < 1:
            raise ConfigError('gsp.max_gap must be >= 1')


@dataclass(frozen=True)
class LinkConfig:
    enabled: bool = True
    temporal_max: int = 20
    spatial_max: float = 70.0
    accept_sim: float = 0.9

    def __post_init__(self):
        if self.temporal_max < 1:
            raise ConfigError('link.temporal_max must be >= 1')
        if self.spatial_max <= 0:
            raise ConfigError('link.spatial_max must be > 0')
        if not 0.0 < self.accept_sim <= 1.0:
            raise ConfigError('link.accept_sim must lie in (0, 1]')


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    frames: int = 0
    embedding_dim: int = 0

    def __post_init__(self):
        if self.frames < 0:
            raise ConfigError('synth.frames must be >= 0 (0 keeps the scenario length)')
        if self.embedding_dim < 0:
            raise ConfigError('synth.embedding_dim must be >= 0 (0 keeps the scenario dimension)')


@dataclass(frozen=True)
class FeatureSortConfig:
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    gsp: GspConfig = field(default_factory=GspConfig)
    link: LinkConfig = field(default_factory=LinkConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)


SECTIONS = {
    'tracker': TrackerConfig,
    'gsp': GspConfig,
    'link': LinkConfig,
    'synth': SynthConfig,
}


def _field_types(cls):
    return {f.name: f for f in dataclasses.fields(cls) if f.name != 'class_overrides'}


def coerce_value(cls, key, raw):
    fields = _field_types(cls)
    if key not in fields:
        raise ConfigError('unknown key {!r} for {}'.format(key, cls.__name__))

    default = fields[key].default
    text = str(raw).strip()
    try:
        if isinstance(default, bool):
            lowered = text.lower()
            if lowered in _TRUE:
                return True
            if lowered in _FALSE:
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError:
        raise ConfigError('cannot read {!r} as {} for key {}'.format(text, type(default).__name__, key))
    return text


def parse_assignments(lines: Iterable[str], origin='<config>'):
    """
    Turn ``section.key = value`` lines into a {dotted_key: raw_value} dict.
    """
    values = {}
    for number, line in enumerate(lines, start=1):
        stripped = line.split('#', 1)[0].strip()
        if not stripped:
            continue
        if '=' not in stripped:
            raise ConfigError('{}:{}: expected section.key = value'.format(origin, number))
        key, value = stripped.split('=', 1)
        values[key.strip()] = value.strip()
    return values


def _apply(values, sections, overrides):
    for dotted, raw in values.items():
        parts = dotted.split('.')
        section = parts[0]
        if section not in SECTIONS:
            raise ConfigError('unknown config section in {!r}'.format(dotted))

        if section == 'tracker' and len(parts) == 4 and parts[1] == 'class':
            try:
                class_id = int(parts[2])
            except ValueError:
                raise ConfigError('class id must be an integer in {!r}'.format(dotted))
            value = coerce_value(TrackerConfig, parts[3], raw)
            overrides.setdefault(class_id, {})[parts[3]] = value
            continue

        if len(parts) != 2:
            raise ConfigError('malformed config key {!r}'.format(dotted))
        sections[section][parts[1]] = coerce_value(SECTIONS[section], parts[1], raw)


def load_config(path: Optional[str] = None, overrides: Optional[Dict[str, str]] = None) -> FeatureSortConfig:
    """
    Build the effective configuration: defaults, then the file at ``path``,
    then ``overrides`` (already split into dotted key / raw value pairs).
    """
    sections = {name: {} for name in SECTIONS}
    class_overrides = {}

    if path:
        try:
            with io.open(path, 'r', encoding='utf-8') as config_file:
                file_values = parse_assignments(config_file, origin=path)
        except OSError as e:
            raise ConfigError('unable to read config {}: {}'.format(path, e))
        _apply(file_values, sections, class_overrides)
        log.debug('Loaded %d config keys from %s', len(file_values), path)

    if overrides:
        _apply(overrides, sections, class_overrides)

    for class_id, values in class_overrides.items():
        # validate the per-class view up front rather than mid-sequence
        TrackerConfig(**dict(sections['tracker'], **values))

    return FeatureSortConfig(
        tracker=TrackerConfig(class_overrides=class_overrides, **sections['tracker']),
        gsp=GspConfig(**sections['gsp']),
        link=LinkConfig(**sections['link']),
        synth=SynthConfig(**sections['synth']),
    )


def parse_set_flags(flags: Optional[Iterable[str]]) -> Dict[str, str]:
    values = {}
    for flag in flags or ():
        if '=' not in flag:
            raise ConfigError('--set expects section.key=value, got {!r}'.format(flag))
        key, value = flag.split('=', 1)
        values[key.strip()] = value.strip()
    return values
