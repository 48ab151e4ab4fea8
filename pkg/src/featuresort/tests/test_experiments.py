from collections import OrderedDict

from featuresort.config import FeatureSortConfig
from featuresort.experiments import VARIANTS, AblationRow, run_ablation, run_pipeline, run_variant
from featuresort.postprocess import postprocess
from featuresort.scenarios import load_scenario
from featuresort.synth import generate
from featuresort.tracker import Tracker

SEEDS = range(20)


def test_color_prevents_look_alike_swaps():
    variants = OrderedDict((name, VARIANTS[name]) for name in ('+edge', '+color'))
    edge, color = run_ablation('crossing_pair', SEEDS, variants=variants)

    assert edge.runs == color.runs == 20
    assert edge.runs_with_switches >= 14
    assert color.id_switches < edge.id_switches


def test_motion_alone_swaps_look_alikes():
    overrides, _ = VARIANTS['motion']
    row = run_variant('crossing_pair', SEEDS, overrides, name='motion')
    assert row.id_switches >= 1
    assert row.runs_with_switches >= 14


def test_direction_gate_prevents_crossing_swaps():
    overrides = dict(VARIANTS['+edge'][0], direction_gate=True)
    row = run_variant('crossing_pair', SEEDS, overrides, name='+edge+gate')
    assert row.runs - row.runs_with_switches >= 18


def test_full_configuration_has_no_switches():
    overrides, post = VARIANTS['full']
    row = run_variant('crossing_pair', range(5), overrides, post=post, name='full')
    assert row.id_switches == 0


def test_postprocessing_improves_the_occlusion_corridor():
    for seed in range(10):
        result = run_pipeline('occlusion_corridor', seed)
        assert result.post.idf1 > result.online.idf1
        assert result.post.mota >= result.online.mota


def test_corridor_fragments_are_linked():
    cfg = FeatureSortConfig()
    world = generate(load_scenario('occlusion_corridor'), seed=3)
    online = Tracker(cfg.tracker).run(world.detections, 1, world.frames)
    records = []
    refined = postprocess(online, cfg.gsp, cfg.link, records=records)

    assert len(online) == 3
    assert len(refined) == 2
    assert len(records) == 1
    assert records[0].gap == 13
    assert records[0].similarity >= cfg.link.accept_sim
    walker = min(refined, key=lambda t: t.track_id)
    assert walker.frames == list(range(1, 91))


def test_ablation_row_format():
    row = AblationRow('+color', 20, 3, 2, 0.98766, 0.5)
    assert row.format() == '+color       runs  20  IDs    3  runs with IDs   2  MOTA 0.9877  IDF1 0.5000'
