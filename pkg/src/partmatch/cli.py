"""Command-line entry point: ``partmatch <subcommand> ...``.

Exit codes: 0 success, 2 input-contract violation, 3 no detection.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from .evaluation import (
    cmc,
    greedy_match,
    match_in_shot,
    overlay_svg,
    pascal_match,
    rank_gallery,
    score_scene,
    write_cmc_csv,
    write_rankings_csv,
)
from .features import (
    H_BINS,
    S_BINS,
    V_BINS,
    read_pbm,
    read_ppm,
    vector_aux_metric,
    zero_aux_metric,
)
from .graph import GraphParams, dump_graph
from .kinematics import fit_kinematics, read_kinematics, write_kinematics
from .model import Scene, read_proposals, read_template, write_template
from .parts import PARTS
from .posterior import PriorParams, score_breakdown
from .sampler import ChainConfig, write_trace
from .simulator import (
    BLOB_METRIC_SCALE,
    SimConfig,
    generate_population,
    generate_reference_shot,
    generate_scene,
    make_rng,
    read_truth,
    reference_scene,
    render_raster,
    simulate_annotations,
    write_scene_bundle,
)
from .template import BuildConfig, build_scene, build_template, describe_from_raster

EXIT_OK, EXIT_CONTRACT, EXIT_NO_DETECTION = 0, 2, 3


class NoDetection(Exception):
    pass


# ---- configuration ----------------------------------------------------------

# Flat key -> (section, field). Sections map onto the library's dataclasses.
_KEYS = {
    "lambda": ("graph", "lam"),
    "lam": ("graph", "lam"),
    "min_edge_prob": ("graph", "min_edge_prob"),
    "alpha_u": ("prior", "alpha_u"),
    "alpha_s": ("prior", "alpha_s"),
    "scale_quantum": ("prior", "scale_quantum"),
    "K": ("build", "K"),
    "fg_overlap_min": ("build", "fg_overlap_min"),
    "nms_iou": ("build", "nms_iou"),
    "dedup_distance": ("build", "dedup_distance"),
    "swap_prob": ("chain", "swap_prob"),
    "tree_prob": ("chain", "tree_prob"),
    "seed_mode": ("chain", "seed_mode"),
    "max_switch_prob": ("chain", "max_switch_prob"),
    "exclusion_switch_prob": ("chain", "exclusion_switch_prob"),
    "normalize_compatible": ("chain", "normalize_compatible"),
    "burn_in": ("chain", "burn_in"),
}


class Settings:
    """Everything a run needs, assembled from defaults, --config and flags."""

    def __init__(self, doc: dict | None = None):
        doc = dict(doc or {})
        sections = {"graph": {}, "prior": {}, "build": {}, "chain": {}}
        sim = doc.pop("sim", {})
        aux = doc.pop("aux", "blob")
        aux_scale = doc.pop("aux_scale", BLOB_METRIC_SCALE)
        self.descriptors = doc.pop("descriptors", "file")
        if self.descriptors not in ("file", "raster"):
            raise ValueError(f"descriptors must be 'file' or 'raster', got {self.descriptors!r}")
        self.bins = tuple(int(b) for b in doc.pop("bins", (H_BINS, S_BINS, V_BINS)))
        if len(self.bins) != 3 or min(self.bins) < 1:
            raise ValueError("bins must be three positive counts (hue, saturation, value)")
        for key, value in doc.items():
            if key not in _KEYS:
                raise ValueError(f"unknown config key {key!r}")
            section, name = _KEYS[key]
            sections[section][name] = value
        self.graph = GraphParams(**sections["graph"])
        self.prior = PriorParams(**sections["prior"])
        self.build = BuildConfig(**sections["build"])
        self.chain_overrides = sections["chain"]
        sim_fields = {f.name for f in fields(SimConfig)}
        unknown = set(sim) - sim_fields
        if unknown:
            raise ValueError(f"unknown simulator keys {sorted(unknown)}")
        for k in ("pose_noise", "image_size"):
            if k in sim:
                sim[k] = tuple(sim[k])
        self.sim = SimConfig(**sim)
        if aux == "blob":
            self.aux_metric = vector_aux_metric(float(aux_scale))
        elif aux == "none":
            self.aux_metric = zero_aux_metric
        else:
            raise ValueError(f"aux must be 'blob' or 'none', got {aux!r}")

    def chain(self, seed: int, iters: int, **extra) -> ChainConfig:
        return ChainConfig(iterations=iters, seed=seed, **{**self.chain_overrides, **extra})


def load_settings(path: str | None) -> Settings:
    if path is None:
        return Settings()
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ValueError("config must be a JSON object")
    return Settings(doc)


# ---- bundle helpers -----------------------------------------------------------


def _read_meta(d: Path) -> dict:
    meta = d / "scene.json"
    return json.loads(meta.read_text(encoding="utf-8")) if meta.exists() else {}


def _bundle_proposals(d: Path, st: Settings, height: float) -> list:
    """Proposals of a bundle; with ``descriptors: raster`` histograms come from render.ppm."""
    props = read_proposals(d / "proposals.jsonl")
    if st.descriptors == "raster":
        if not (d / "render.ppm").exists():
            raise ValueError(f"{d}: descriptors=raster needs render.ppm (simulate --render)")
        props = describe_from_raster(props, read_ppm(d / "render.ppm"), height, st.bins)
    return props


def load_scene(directory: str | Path, st: Settings) -> Scene:
    """Scene from a bundle directory (proposals.jsonl, optional mask.pbm and scene.json)."""
    d = Path(directory)
    meta = _read_meta(d)
    height = float(meta.get("person_height", st.sim.person_height))
    props = _bundle_proposals(d, st, height)
    mask = read_pbm(d / "mask.pbm") if (d / "mask.pbm").exists() else None
    size = tuple(meta["image_size"]) if "image_size" in meta else None
    return build_scene(props, mask, st.build, image_size=size, person_height=height)


def load_template_from_refs(dirs, st: Settings):
    props, masks = [], []
    for d in map(Path, dirs):
        props.append(_bundle_proposals(d, st, st.sim.person_height))
        masks.append(read_pbm(d / "mask.pbm"))
    return build_template(props, masks, st.build, st.sim.person_height, st.aux_metric)


def load_kinematics(path: str | None, st: Settings, seed: int):
    if path is not None:
        return read_kinematics(path)
    return fit_kinematics(simulate_annotations(200, make_rng(seed), st.sim), st.sim.person_height)


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _match_rows(res) -> list[str]:
    g = res.graph
    rows = ["part,template,target,distance"]
    for i in res.state.active():
        v = g.vertices[i]
        target = "NULL" if v.is_null else str(v.target_index)
        dist = "" if v.is_null else f"{v.distance:.12g}"
        rows.append(f"{v.part.value},{v.template_index},{target},{dist}")
    return rows


def _active_targets(res) -> list:
    g = res.graph
    return [g.vertices[i].target for i in res.state.active() if not g.vertices[i].is_null]


# ---- subcommands ----------------------------------------------------------------


def cmd_simulate(args, st: Settings) -> int:
    """Population, reference shots, single-person gallery and crowded scenes."""
    out = Path(args.out)
    rng = make_rng(args.seed)
    cfg = st.sim
    km = fit_kinematics(simulate_annotations(200, rng, cfg), cfg.person_height)
    out.mkdir(parents=True, exist_ok=True)
    write_kinematics(out / "kinematics.json", km)
    pop = generate_population(rng, cfg)
    clean = SimConfig(**{**{f.name: getattr(cfg, f.name) for f in fields(SimConfig)}, "occlusion_rate": 0.0})
    ids = [ind.id for ind in pop]
    for ind in pop:
        for k in range(cfg.shots_per_individual):
            shot = generate_reference_shot(ind, rng, cfg, source_id=f"{ind.id}/r{k}")
            scene, gt = reference_scene(shot, ind.id, cfg.person_height)
            raster = render_raster(scene, rng) if args.render else None
            write_scene_bundle(out / "refs" / ind.id / f"r{k}", scene, gt, shot.mask, raster)
        scene, gt, mask = generate_scene([ind], None, rng, clean, query=None)
        raster = render_raster(scene, rng) if args.render else None
        write_scene_bundle(out / "gallery" / ind.id, scene, gt, mask, raster)
    for q, ind in enumerate(pop):
        others = [pop[(q + 1 + j) % len(pop)] for j in range(max(args.people - 1, 0))]
        scene, gt, mask = generate_scene([ind] + others, None, rng, cfg, query=0)
        raster = render_raster(scene, rng) if args.render else None
        write_scene_bundle(out / "scenes" / ind.id, scene, gt, mask, raster, cfg)
    _write_text(out / "individuals.txt", "\n".join(ids) + "\n")
    print(f"simulated {len(ids)} individuals into {out}")
    return EXIT_OK


def cmd_build_template(args, st: Settings) -> int:
    t = load_template_from_refs(args.refs, st)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_template(args.out, t)
    print("template: " + ", ".join(f"{p.value}={len(t[p])}" for p in PARTS))
    return EXIT_OK


def cmd_match(args, st: Settings) -> int:
    t = read_template(args.template)
    scene = load_scene(args.scene, st)
    km = load_kinematics(args.kinematics, st, args.seed)
    res = match_in_shot(t, scene, km, st.graph, st.chain(args.seed, args.iters), st.prior, args.chains, st.aux_metric)
    out = Path(args.out)
    rows = _match_rows(res)
    boxes = []
    if res.box is not None:
        rows.append("")
        rows.append("box," + ",".join(f"{v:.6f}" for v in res.box))
        boxes.append((res.box, "#ff5050"))
    rows.append(f"score,{res.score:.12g}")
    truth = Path(args.scene) / "truth.tsv"
    if res.box is not None and truth.exists():
        gt = read_truth(truth)
        hit = pascal_match(res.box, gt.boxes[0])
        rows.append(f"pascal,{int(hit)}")
        boxes.append((gt.boxes[0], "#50ff50"))
    _write_text(out / "match.csv", "\n".join(rows) + "\n")
    _write_text(out / "overlay.svg", overlay_svg(scene, boxes, _active_targets(res)))
    if res.box is None:
        raise NoDetection("no part of the template was matched")
    print(f"score {res.score:.6f} box {tuple(round(v, 2) for v in res.box)}")
    return EXIT_OK


def _gallery(directory: Path, st: Settings) -> dict[str, Scene]:
    items = sorted(p for p in directory.iterdir() if (p / "proposals.jsonl").exists())
    if not items:
        raise ValueError(f"no scene bundles under {directory}")
    return {p.name: load_scene(p, st) for p in items}


def _read_truth_map(path: str) -> dict[str, str]:
    rows = Path(path).read_text(encoding="utf-8").splitlines()
    out = {}
    for row in rows[1:]:
        if row.strip():
            q, g = row.split(",")
            out[q] = g
    return out


def cmd_rank(args, st: Settings) -> int:
    gallery = _gallery(Path(args.gallery), st)
    km = load_kinematics(args.kinematics, st, args.seed)
    results = []
    for path in args.templates:
        t = read_template(path)
        qid = Path(path).stem
        results.append(rank_gallery(t, gallery, km, st.graph, st.chain(args.seed, args.iters), st.prior, qid, args.chains, st.aux_metric))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_rankings_csv(out / "rankings.csv", results)
    if args.truth:
        rates = cmc(results, _read_truth_map(args.truth))
        write_cmc_csv(out / "cmc.csv", rates)
        print(f"rank-1 {rates[0]:.3f}")
    return EXIT_OK


def cmd_eval(args, st: Settings) -> int:
    """Full protocol over a ``simulate`` directory: CMC ranking plus localization."""
    data = Path(args.data)
    out = Path(args.out)
    km = read_kinematics(data / "kinematics.json")
    ids = (data / "individuals.txt").read_text(encoding="utf-8").split()
    gallery = _gallery(data / "gallery", st)
    results, truth, loc = [], {}, ["query,sampler_hit,greedy_hit,sampler_score,greedy_score"]
    hits = np.zeros(2)
    for iid in ids:
        refs = sorted((data / "refs" / iid).iterdir())
        t = load_template_from_refs(refs, st)
        write_template(_mkparent(out / "templates" / f"{iid}.json"), t)
        chain = st.chain(args.seed, args.iters)
        results.append(rank_gallery(t, gallery, km, st.graph, chain, st.prior, iid, args.chains, st.aux_metric))
        truth[iid] = iid
        sdir = data / "scenes" / iid
        scene = load_scene(sdir, st)
        gt_box = read_truth(sdir / "truth.tsv").boxes[0]
        res = match_in_shot(t, scene, km, st.graph, chain, st.prior, args.chains, st.aux_metric)
        base = greedy_match(t, scene, km, st.graph, st.prior, st.aux_metric)
        s_hit = res.box is not None and pascal_match(res.box, gt_box)
        g_hit = base.box is not None and pascal_match(base.box, gt_box)
        hits += (s_hit, g_hit)
        loc.append(f"{iid},{int(s_hit)},{int(g_hit)},{res.score:.12g},{base.score:.12g}")
        boxes = [(gt_box, "#50ff50")] + [(b, c) for b, c in ((res.box, "#ff5050"), (base.box, "#ffd000")) if b is not None]
        _write_text(out / "overlays" / f"{iid}.svg", overlay_svg(scene, boxes, _active_targets(res)))
    out.mkdir(parents=True, exist_ok=True)
    rates = cmc(results, truth)
    write_cmc_csv(out / "cmc.csv", rates)
    write_rankings_csv(out / "rankings.csv", results)
    _write_text(out / "localization.csv", "\n".join(loc) + "\n")
    n = len(ids)
    summary = ["metric,value", f"rank1,{rates[0]:.6f}", f"sampler_pascal,{hits[0] / n:.6f}", f"greedy_pascal,{hits[1] / n:.6f}"]
    _write_text(out / "summary.csv", "\n".join(summary) + "\n")
    print(f"rank-1 {rates[0]:.3f}  localization sampler {hits[0] / n:.3f} greedy {hits[1] / n:.3f}")
    return EXIT_OK


def _mkparent(path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def cmd_diagnose(args, st: Settings) -> int:
    """Per-chain traces, the candidacy graph table and the best state's score terms."""
    t = read_template(args.template)
    scene = load_scene(args.scene, st)
    km = load_kinematics(args.kinematics, st, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seeds = np.random.SeedSequence(args.seed).generate_state(args.chains, dtype=np.uint64)
    g = best = None
    for k, seed in enumerate(seeds):
        g, res = score_scene(t, scene, km, st.graph, st.chain(int(seed), args.iters, record_trace=True), st.prior, 1, st.aux_metric)
        write_trace(out / f"trace_{k}.csv", res)
        if best is None or res.best_score > best.best_score:
            best = res
    dump_graph(g, out / "graph.tsv")
    score_breakdown(g, best.best_state.labeling, st.prior, out / "breakdown.tsv")
    print(f"{len(g)} vertices, {g.n_edges} edges, best log-posterior {best.best_score:.6f}")
    return EXIT_OK


# ---- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--config", help="JSON file of model, build, chain and simulator settings")
    common.add_argument("--chains", type=int, default=1)
    common.add_argument("--iters", type=int, default=500)

    ap = argparse.ArgumentParser(prog="partmatch", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="generate a synthetic population and scenes")
    p.add_argument("--out", required=True)
    p.add_argument("--people", type=int, default=3, help="individuals per crowded scene")
    p.add_argument("--render", action="store_true", help="also write PPM renders")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("build-template", parents=[common], help="build a template from reference bundles")
    p.add_argument("refs", nargs="+", help="reference directories with proposals.jsonl and mask.pbm")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_template)

    p = sub.add_parser("match", parents=[common], help="localize a template in one scene")
    p.add_argument("--template", required=True)
    p.add_argument("--scene", required=True)
    p.add_argument("--kinematics")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("rank", parents=[common], help="rank a gallery for one or more templates")
    p.add_argument("templates", nargs="+")
    p.add_argument("--gallery", required=True)
    p.add_argument("--kinematics")
    p.add_argument("--truth", help="CSV of query,gallery pairs; enables cmc.csv")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("eval", parents=[common], help="CMC and localization over a simulated dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("diagnose", parents=[common], help="write chain traces and score terms")
    p.add_argument("--template", required=True)
    p.add_argument("--scene", required=True)
    p.add_argument("--kinematics")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_diagnose)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.chains < 1 or args.iters < 0:
            raise ValueError("--chains must be >= 1 and --iters >= 0")
        return args.func(args, load_settings(args.config))
    except NoDetection as exc:
        print(f"no detection: {exc}", file=sys.stderr)
        return EXIT_NO_DETECTION
    except (ValueError, KeyError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONTRACT


if __name__ == "__main__":
    sys.exit(main())
