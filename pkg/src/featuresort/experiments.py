"""
In-memory synth -> track -> (post-process) -> evaluate runs, and the
component ablation ladder built on top of them.
"""
import dataclasses
import logging
from collections import OrderedDict
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .config import FeatureSortConfig
from .metrics import EvalReport, evaluate
from .postprocess import postprocess
from .scenarios import load_scenario
from .synth import generate
from .tracker import Tracker

log = logging.getLogger(__name__)

_NO_APPEARANCE = {'lambda_edge': 0.0, 'lambda_color': 0.0, 'lambda_style': 0.0, 'direction_gate': False}

# variant name -> (tracker overrides, post-process)
VARIANTS = OrderedDict([
    ('motion', (_NO_APPEARANCE, False)),
    ('+edge', ({'lambda_color': 0.0, 'lambda_style': 0.0, 'direction_gate': False}, False)),
    ('+color', ({'lambda_style': 0.0, 'direction_gate': False}, False)),
    ('+style', ({'direction_gate': False}, False)),
    ('+direction', ({}, False)),
    ('full', ({}, True)),
])


@dataclass
class PipelineResult:
    online: EvalReport
    post: Optional[EvalReport]
    tracker: Tracker


@dataclass
class AblationRow:
    variant: str
    runs: int
    id_switches: int
    runs_with_switches: int
    mota: float
    idf1: float

    def format(self):
        return '{:<12} runs {:>3}  IDs {:>4}  runs with IDs {:>3}  MOTA {:.4f}  IDF1 {:.4f}'.format(
            self.variant, self.runs, self.id_switches, self.runs_with_switches, self.mota, self.idf1)


def run_pipeline(scenario, seed, cfg: FeatureSortConfig = None, post=True, frames=None) -> PipelineResult:
    """
    Generate ``scenario`` with ``seed``, track it and score the online
    output, then (when ``post``) the post-processed output.
    """
    cfg = cfg or FeatureSortConfig()
    if isinstance(scenario, str):
        scenario = load_scenario(scenario)

    world = generate(scenario, frames=frames, seed=seed)
    tracker = Tracker(cfg.tracker)
    online = tracker.run(world.detections, first_frame=1, last_frame=world.frames)
    online_report = evaluate(online, world.truth)

    post_report = None
    if post:
        refined = postprocess(online, cfg.gsp, cfg.link, bank_size=cfg.tracker.bank_size)
        post_report = evaluate(refined, world.truth)
    return PipelineResult(online_report, post_report, tracker)


def run_variant(scenario, seeds, overrides, post=False, cfg: FeatureSortConfig = None, name='custom'):
    cfg = cfg or FeatureSortConfig()
    variant_cfg = dataclasses.replace(cfg, tracker=dataclasses.replace(cfg.tracker, **overrides))
    reports = []
    for seed in seeds:
        result = run_pipeline(scenario, seed, variant_cfg, post=post)
        reports.append(result.post if post else result.online)

    row = AblationRow(
        variant=name,
        runs=len(reports),
        id_switches=sum(r.id_switches for r in reports),
        runs_with_switches=sum(1 for r in reports if r.id_switches > 0),
        mota=float(np.mean([r.mota for r in reports])) if reports else float('nan'),
        idf1=float(np.mean([r.idf1 for r in reports])) if reports else float('nan'),
    )
    log.info('Ablation %s', row.format())
    return row


def run_ablation(preset, seeds, variants=None, cfg: FeatureSortConfig = None) -> List[AblationRow]:
    """
    Score each variant of the ladder (or the given name -> (overrides,
    post-process) mapping) on the same seeds.
    """
    scenario = load_scenario(preset) if isinstance(preset, str) else preset
    variants = VARIANTS if variants is None else variants
    return [run_variant(scenario, seeds, overrides, post, cfg, name)
            for name, (overrides, post) in variants.items()]
