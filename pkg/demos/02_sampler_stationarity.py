"""Does the cluster sampler draw from the posterior it claims to?

On graphs of up to 16 vertices every labeling can be scored, so the exact
posterior is available. Here a long chain's visit frequencies are compared
with it by total variation distance, for a few move mixtures.

    python demos/02_sampler_stationarity.py --iters 50000
"""

import argparse
import time

from partmatch.posterior import PriorParams
from partmatch.sampler import ChainConfig, enumerate_posterior, run_chain
from partmatch.simulator import make_rng, random_candidacy_graph

ap = argparse.ArgumentParser()
ap.add_argument("--iters", type=int, default=50_000)
ap.add_argument("--vertices", type=int, default=8)
args = ap.parse_args()

mixtures = {
    "cluster moves only": dict(swap_prob=0.0, tree_prob=0.0),
    "cluster-seeded clusters": dict(swap_prob=0.0, tree_prob=0.0, seed_mode="cluster"),
    "default mixture": dict(),
}

for seed in range(3):
    g = random_candidacy_graph(make_rng(seed), args.vertices)
    exact = enumerate_posterior(g)
    top = max(exact.values())
    print(f"graph {seed}: {len(g)} vertices, {g.n_edges} edges, MAP mass {top:.3f}")
    for name, mix in mixtures.items():
        t = time.perf_counter()
        cfg = ChainConfig(iterations=args.iters + 1000, burn_in=1000, seed=seed, count_visits=True, **mix)
        res = run_chain(g, PriorParams(), cfg)
        n = sum(res.visits.values())
        tv = 0.5 * sum(abs(res.visits.get(x, 0) / n - q) for x, q in exact.items())
        print(f"  {name:<24} TV {tv:.4f}  acceptance {res.acceptance_rate:.2f}  {time.perf_counter() - t:.1f} s")

# TV shrinks roughly like 1/sqrt(samples) once the chain mixes; try --iters 200000.
