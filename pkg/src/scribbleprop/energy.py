"""Per-image labeling energy: scribble unary, predictor unary, Potts pairwise.

The scribble term is a hard constraint: a superpixel touching scribbles may
only take one of the touched categories (cost 0); an unmarked superpixel may
take any annotated category at equal cost log(universe size); categories not
annotated on the image are excluded from the label universe entirely.
Forbidden assignments are an explicit boolean mask rather than large floats,
so they stay exact inside the solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import errors


def universe_from_scribbles(sset):
    """Ordered label universe: the distinct scribbled categories, ascending."""
    cats = sset.categories()
    if not cats:
        raise errors.NoScribbles("cannot build a label universe without scribbles")
    return cats


@dataclass
class UnaryTable:
    """(S, L) labeling costs plus a forbidden mask for hard constraints."""

    costs: np.ndarray
    forbidden: np.ndarray

    def __post_init__(self):
        self.costs = np.asarray(self.costs, dtype=np.float64)
        self.forbidden = np.asarray(self.forbidden, dtype=bool)
        if self.costs.shape != self.forbidden.shape or self.costs.ndim != 2:
            raise errors.ShapeMismatch(
                f"costs {self.costs.shape} vs forbidden {self.forbidden.shape}")
        if not np.isfinite(self.costs[~self.forbidden]).all():
            raise errors.NonFiniteLogProb("non-finite cost in an allowed cell")

    @property
    def num_sites(self):
        return self.costs.shape[0]

    @property
    def num_labels(self):
        return self.costs.shape[1]


def scribble_unary(overlaps, universe):
    """Unary costs from scribble overlaps.

    Superpixels touching scribbles: cost 0 for each touched category, all
    other labels forbidden.  Unmarked superpixels: log(|universe|) for every
    label (uniform over the annotated categories).
    """
    pos = {c: i for i, c in enumerate(universe)}
    n, num_labels = len(overlaps), len(universe)
    uniform = math.log(num_labels)
    costs = np.full((n, num_labels), uniform, dtype=np.float64)
    forbidden = np.zeros((n, num_labels), dtype=bool)
    for i, cats in enumerate(overlaps):
        if not cats:
            continue
        costs[i, :] = 0.0
        forbidden[i, :] = True
        for c in cats:
            if c not in pos:
                raise errors.OverlapOutsideUniverse(
                    f"superpixel {i} overlaps category {c} outside universe {universe}")
            forbidden[i, pos[c]] = False
    return UnaryTable(costs, forbidden)


def predictor_unary(logprob, spmap, size_normalize=False):
    """Unary costs from per-pixel log-probabilities: -sum of log P over each
    superpixel (optionally divided by superpixel size).  Never forbidden."""
    values = logprob.values
    if values.shape[:2] != spmap.ids.shape:
        raise errors.DimensionMismatch(
            f"log-prob map {values.shape[:2]} vs superpixels {spmap.ids.shape}")
    if not np.isfinite(values).all():
        raise errors.NonFiniteLogProb("log-probability map contains non-finite values")
    num_labels = values.shape[2]
    costs = np.zeros((spmap.count, num_labels), dtype=np.float64)
    np.add.at(costs, spmap.ids.ravel(), -values.reshape(-1, num_labels))
    if size_normalize:
        costs /= spmap.sizes()[:, None]
    return UnaryTable(costs, np.zeros_like(costs, dtype=bool))


def combine_unaries(scr, net=None):
    """Sum of scribble and predictor unaries (implicit balance weight 1).

    With no predictor table, returns the scribble table unchanged; the
    forbidden mask always comes from the scribble side.
    """
    if net is None:
        return scr
    if scr.costs.shape != net.costs.shape:
        raise errors.ShapeMismatch(f"{scr.costs.shape} vs {net.costs.shape}")
    return UnaryTable(scr.costs + net.costs, scr.forbidden.copy())


@dataclass
class EnergyProblem:
    """Immutable multi-label Potts problem over the superpixel graph."""

    universe: list
    unary: UnaryTable
    edge_index: np.ndarray   # (E, 2) int64, i < j
    edge_weight: np.ndarray  # (E,) float64, >= 0

    @property
    def num_sites(self):
        return self.unary.num_sites

    @property
    def num_labels(self):
        return self.unary.num_labels


def build_problem(unary, edges, universe, use_pairwise=True):
    """Assemble an EnergyProblem from a unary table and weighted edges.

    ``edges`` is a list of (i, j, weight) triples; with use_pairwise=False
    all edges are dropped and the problem reduces to independent unaries.
    """
    if len(universe) != unary.num_labels:
        raise errors.InconsistentSizes(
            f"universe has {len(universe)} labels, table has {unary.num_labels}")
    if not use_pairwise or len(edges) == 0:
        idx = np.empty((0, 2), dtype=np.int64)
        wts = np.empty(0, dtype=np.float64)
        return EnergyProblem(list(universe), unary, idx, wts)
    idx = np.array([(i, j) for i, j, _ in edges], dtype=np.int64)
    wts = np.array([w for _, _, w in edges], dtype=np.float64)
    if idx.min() < 0 or idx.max() >= unary.num_sites:
        raise errors.InconsistentSizes("edge endpoint outside [0, S)")
    if (idx[:, 0] == idx[:, 1]).any():
        raise errors.InconsistentSizes("self-loop edge")
    if (wts < 0).any() or not np.isfinite(wts).all():
        raise errors.InconsistentSizes("edge weights must be finite and >= 0")
    return EnergyProblem(list(universe), unary, idx, wts)


def total_energy(problem, y):
    """Total labeling energy; +inf when y hits a forbidden assignment."""
    y = np.asarray(y, dtype=np.int64)
    if y.shape != (problem.num_sites,):
        raise errors.LengthMismatch(f"labeling length {y.shape} vs {problem.num_sites} sites")
    rows = np.arange(problem.num_sites)
    if problem.unary.forbidden[rows, y].any():
        return math.inf
    e = float(problem.unary.costs[rows, y].sum())
    if len(problem.edge_index):
        differ = y[problem.edge_index[:, 0]] != y[problem.edge_index[:, 1]]
        e += float(problem.edge_weight[differ].sum())
    return e


def problem_to_json(problem):
    """Debug dump used for oracle cross-checks."""
    return {
        "universe": [int(c) for c in problem.universe],
        "unary": problem.unary.costs.tolist(),
        "forbidden": problem.unary.forbidden.tolist(),
        "edges": [[int(i), int(j), float(w)] for (i, j), w in
                  zip(problem.edge_index, problem.edge_weight)],
    }
