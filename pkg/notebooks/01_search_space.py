"""Activation functions as balanced operator trees.

A core unit is binary(unary(x), unary(x)); deeper functions nest core units
in place of x, always keeping both branches at the same depth.
Run: python notebooks/01_search_space.py
"""

from actevo.expr import (count_space, crossover, depth, enumerate_s1, mutate, mutate_at, nodes,
                         parse, sample_random)
from actevo.presets import PRESETS
from actevo.rng import make_rng

# The printed form is the canonical id used for caching and deduplication.
swish = parse("swish")
print("swish  ->", swish, "depth", depth(swish))
print("relu   ->", parse("relu"))

# Presets cover the baselines and the published winners. Winners that chain
# unaries are stored as equal, zero-padded depth-3 trees.
for name, p in PRESETS.items():
    print(f"  {name:11s} {p.formula:32s} {p.expr}")

# Sizes of the search spaces.
print("|S1| =", len(enumerate_s1()), "=", count_space(1))
print("|S2| =", f"{count_space(2):,}")

# The mutation example: the sigmoid node becomes abs. The tree needs atan,
# which lives behind the extended-alphabet flag.
tree = parse("mul(cube(min(one(x), cosh(x))), sigmoid(add(exp(x), atan(x))))", True)
path = next(p for p, n in nodes(tree) if getattr(n, "op", None) == "sigmoid")
print("mutated:", mutate_at(tree, path, "abs"))

# Random variation keeps every child in the parents' space.
rng = make_rng(0)
a, b = sample_random(2, rng), sample_random(2, rng)
child = mutate(crossover(a, b, rng), rng)
print("parent a:", a)
print("parent b:", b)
print("child   :", child, "depth", depth(child))
