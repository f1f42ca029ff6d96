"""Shared test helpers: image builders and independent brute-force oracles."""

import numpy as np

from scribbleprop.core import RgbImage
from scribbleprop.energy import UnaryTable, build_problem


def solid_image(width, height, color):
    pixels = np.zeros((height, width, 3), dtype=np.uint8)
    pixels[:, :] = color
    return RgbImage(pixels)


def two_tone_image(width=16, height=16, left=(0, 0, 0), right=(255, 255, 255)):
    pixels = np.zeros((height, width, 3), dtype=np.uint8)
    pixels[:, : width // 2] = left
    pixels[:, width // 2:] = right
    return RgbImage(pixels)


def brute_min_cut(node_count, arcs, source, sink):
    """Minimum s-t cut by enumerating all source-side subsets."""
    others = [v for v in range(node_count) if v not in (source, sink)]
    best = float("inf")
    for bits in range(1 << len(others)):
        side = {source}
        for i, v in enumerate(others):
            if (bits >> i) & 1:
                side.add(v)
        cut = sum(c for u, v, c in arcs if u in side and v not in side)
        best = min(best, cut)
    return best


def _enumerate_energies(problem):
    n, num_labels = problem.num_sites, problem.num_labels
    grids = np.indices((num_labels,) * n).reshape(n, -1).T  # (L^n, n)
    unary = problem.unary.costs.copy()
    unary[problem.unary.forbidden] = np.inf
    e = unary[np.arange(n)[None, :], grids].sum(axis=1)
    for (i, j), w in zip(problem.edge_index, problem.edge_weight):
        e = e + w * (grids[:, i] != grids[:, j])
    return grids, e


def exhaustive_min_energy(problem):
    """Exact minimum energy by enumerating every labeling (vectorized)."""
    _, e = _enumerate_energies(problem)
    return float(e.min())


def exhaustive_argmin(problem):
    """A labeling achieving the exhaustive minimum."""
    grids, e = _enumerate_energies(problem)
    return grids[int(np.argmin(e))]


def random_problem(rng, n_sites, n_labels, edge_prob=0.4, max_unary=10.0,
                   max_weight=5.0, forbid_prob=0.0):
    """Seeded random Potts problem; every site keeps at least one allowed label."""
    costs = rng.uniform(0.0, max_unary, size=(n_sites, n_labels))
    forbidden = rng.random((n_sites, n_labels)) < forbid_prob
    full = forbidden.all(axis=1)
    forbidden[full, rng.integers(0, n_labels, size=int(full.sum()))] = False
    table = UnaryTable(costs, forbidden)
    edges = []
    for i in range(n_sites):
        for j in range(i + 1, n_sites):
            if rng.random() < edge_prob:
                edges.append((i, j, float(rng.uniform(0.0, max_weight))))
    return build_problem(table, edges, list(range(n_labels)))
