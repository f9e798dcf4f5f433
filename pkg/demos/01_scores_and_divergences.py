"""Tour of local scores and composite local Bregman divergences.

Walks through the central objects: a sample space with a neighborhood
system, local potential families, homogeneous scores you can evaluate
without a normalization constant, and the divergence that measures how far
apart two positive vectors are through the eyes of a given score.

Run:  python3 demos/01_scores_and_divergences.py
"""

import numpy as np

import localscores as ls

# ---------------------------------------------------------------------------
# A sample space and a neighborhood system.
#
# The 2-cube {-1,+1}^2 has four points. With radius 1, each point's
# neighbors are the sign vectors at Hamming distance one.

graph = ls.hamming_graph(2, 1)
print("space:", graph.space.spec_string())
for i in range(4):
    nbrs = ", ".join(graph.space.point_label(int(j)) for j in graph.neighbors(i))
    print(f"  b({graph.space.point_label(i)}) = {{{nbrs}}}")

# ---------------------------------------------------------------------------
# Local potential families: one convex function per point, evaluated on the
# ratio vector f_{b(y)}/f_y. Scores are the (negative) partial derivatives
# of the assembled 1-homogeneous potential, so they only ever see ratios --
# the normalization constant is irrelevant by construction.

f = ls.UnnormalizedVector.from_values([1.0, 2.0, 4.0, 8.0])

for name, family in {
    "pseudo-likelihood": ls.pseudo_likelihood(graph),
    "ratio matching": ls.ratio_matching(graph),
    "density power (gamma=1)": ls.density_power(graph, 1.0),
    "pseudo-spherical (gamma=1)": ls.pseudo_spherical(graph, 1.0),
}.items():
    s0 = ls.score(family, 0, f.logs)
    s0_scaled = ls.score(family, 0, f.logs + np.log(1000.0))  # f -> 1000 f
    print(f"{name:28s} S(y0, f) = {s0:+.6f}   S(y0, 1000 f) = {s0_scaled:+.6f}")

# Scaling f by any positive constant leaves every score unchanged: that is
# what lets these objectives train unnormalized models.

# ---------------------------------------------------------------------------
# The divergence induced by a family: zero iff the score cannot tell the two
# vectors apart. For strictly convex local potentials on a connected
# neighborhood system, zero divergence forces equal probabilities.

p = ls.Probability.normalize([1, 2, 4, 8])
q = ls.Probability.normalize([1.2, 2.1, 3.6, 8.3])

fam = ls.pseudo_likelihood(graph)
print("\nD(p, q) =", ls.divergence(fam, p.log(), q.log()))
print("D(p, p) =", ls.divergence(fam, p.log(), p.log()))

# The expected-score gap IS the divergence (the properness identity):
gap = ls.expected_score(fam, p, q.log()) - ls.expected_score(fam, p, p.log())
print("S(p,q) - S(p,p) =", gap)

# ---------------------------------------------------------------------------
# The pseudo-spherical potential is convex but NOT strictly convex, and on
# the radius-1 cube its divergence has a blind spot: a pair p != q with
# divergence exactly zero. The pair keeps the ratio p/q constant on each
# parity class, which is all a norm-type potential can see through
# odd-distance neighborhoods.

ps1 = ls.pseudo_spherical(ls.hamming_graph(2, 1), 1.0)
ps2 = ls.pseudo_spherical(ls.hamming_graph(2, 2), 1.0)

p = ls.Probability(weights=np.array([0.1, 0.4, 0.4, 0.1]))
q = ls.Probability(weights=np.array([0.2, 0.3, 0.3, 0.2]))
print("\npseudo-spherical blind spot (max|p-q| = %.1f):" % np.max(np.abs(p.weights - q.weights)))
print("  radius 1:  D(p, q) =", ls.divergence(ps1, p.log(), q.log()))
print("  radius 2:  D(p, q) =", ls.divergence(ps2, p.log(), q.log()))

# Adding the distance-2 edges restores separation. The graph diagnostics in
# demos/02 predict exactly this from connectivity alone.
