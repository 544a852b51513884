"""Finding one person in a crowd of look-alikes: sampler vs greedy.

The greedy baseline lets every part pick its most similar candidate on its
own, which scatters the parts over several people. The sampler scores
whole configurations, so kinematics pull the parts onto one body. An SVG
overlay per query is written next to the script's output directory.

    python demos/04_localization.py --queries 5 --out /tmp/loc
"""

import argparse
from dataclasses import replace
from pathlib import Path

from partmatch.evaluation import greedy_match, match_in_shot, overlay_svg, pascal_match
from partmatch.geometry import box_iou
from partmatch.kinematics import fit_kinematics
from partmatch.protocol import Pipeline, query_template
from partmatch.sampler import ChainConfig
from partmatch.simulator import (
    SimConfig,
    generate_population,
    generate_scene,
    make_rng,
    simulate_annotations,
)
from partmatch.template import build_scene

ap = argparse.ArgumentParser()
ap.add_argument("--queries", type=int, default=5)
ap.add_argument("--seed", type=int, default=0)
ap.add_argument("--iters", type=int, default=2000)
ap.add_argument("--out", default="localization_demo")
args = ap.parse_args()

cfg = SimConfig(confuser_similarity=0.9, occlusion_rate=0.3)
pipe = Pipeline(chain=ChainConfig(iterations=args.iters))
rng = make_rng(args.seed)
km = fit_kinematics(simulate_annotations(200, rng, cfg), cfg.person_height)
pop = generate_population(rng, cfg)
out = Path(args.out)
out.mkdir(parents=True, exist_ok=True)

hits = [0, 0]
for q in range(args.queries):
    t = query_template(pop[q], rng, cfg, pipe)
    crowd = [pop[q], pop[(q + 1) % len(pop)], pop[(q + 2) % len(pop)]]
    scene, gt, mask = generate_scene(crowd, None, rng, cfg, query=0)
    sc = build_scene(scene.all_proposals(), mask, pipe.build, image_size=scene.image_size, person_height=cfg.person_height)
    res = match_in_shot(t, sc, km, pipe.graph, replace(pipe.chain, seed=q), pipe.prior, 1, pipe.aux_metric)
    base = greedy_match(t, sc, km, pipe.graph, pipe.prior, pipe.aux_metric)
    truth = gt.boxes[0]
    s_iou = box_iou(res.box, truth) if res.box else 0.0
    g_iou = box_iou(base.box, truth) if base.box else 0.0
    hits[0] += res.box is not None and pascal_match(res.box, truth)
    hits[1] += base.box is not None and pascal_match(base.box, truth)
    print(f"{pop[q].id}: sampler IoU {s_iou:.2f} (score {res.score:.1f})  greedy IoU {g_iou:.2f} (score {base.score:.1f})")
    boxes = [(truth, "#50ff50")] + [(b, c) for b, c in ((res.box, "#ff5050"), (base.box, "#ffd000")) if b]
    active = [res.graph.vertices[i].target for i in res.state.active() if not res.graph.vertices[i].is_null]
    (out / f"{pop[q].id}.svg").write_text(overlay_svg(sc, boxes, active))

n = args.queries
print(f"\nPASCAL hits: sampler {hits[0]}/{n}, greedy {hits[1]}/{n}")
print(f"overlays in {out}/ (green truth, red sampler, yellow greedy)")
# Greedy scores are hugely negative: its parts overlap and break kinematics.
# With confusers this close, the posterior's best state is often a look-alike
# or a body stitched from two people; the sampler still beats greedy on average.
