"""Alternating optimization: propagate labels by graph cuts, train the
predictor on the propagated maps, repeat.

Each outer iteration propagates every scribble-annotated image with the
predictor from the previous iteration (none on the first), then fits a fresh
predictor on the resulting superpixel labels.  Images carrying full masks
skip propagation and feed the trainer directly.  Superpixels, features, and
pairwise weights are computed once per image and cached across iterations.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import errors
from .core import LabelMap, UNKNOWN, load_image, load_labelmap, load_scribbles, save_labelmap
from .energy import (build_problem, combine_unaries, predictor_unary,
                     scribble_unary, total_energy, universe_from_scribbles)
from .features import PairwiseParams, edge_weights, superpixel_features
from .mincut import alpha_expansion, default_init
from .predictor import LogProbMap, PredictorConfig, RefPredictorModel, predict, train
from .superpixel import adjacency, scribble_overlap, segment_fh


@dataclass
class SuperpixelParams:
    k: float = 100.0
    sigma: float = 0.5
    min_size: int = 50


@dataclass
class TrainConfig:
    outer_iterations: int = 3
    use_pairwise: bool = True
    pairwise: PairwiseParams = field(default_factory=PairwiseParams)
    superpixel: SuperpixelParams = field(default_factory=SuperpixelParams)
    predictor: PredictorConfig = field(default_factory=PredictorConfig)
    hist_norm: str = "l1"
    net_size_normalize: bool = False
    seed: int = 0

    def validate(self):
        if self.outer_iterations < 1:
            raise errors.InvalidParameter("outer_iterations must be >= 1")
        self.pairwise.validate()


@dataclass
class PropagationContext:
    """Per-image structures that do not depend on the predictor."""

    image: object
    spmap: object
    edges: list
    feats: np.ndarray
    weights: np.ndarray
    universe: list
    scr_table: object


def build_context(image, scribbles, config):
    """Segment, featurize, and assemble the predictor-independent tables."""
    if not scribbles.scribbles:
        raise errors.NoScribbles(f"'{scribbles.image_ref}' has no scribbles")
    if (scribbles.width, scribbles.height) != (image.width, image.height):
        raise errors.DimensionMismatch(
            f"scribbles are {scribbles.width}x{scribbles.height}, "
            f"image is {image.width}x{image.height}")
    sp = config.superpixel
    spmap = segment_fh(image, k=sp.k, sigma=sp.sigma, min_size=sp.min_size)
    edges = adjacency(spmap)
    feats = superpixel_features(image, spmap, norm=config.hist_norm)
    weights = edge_weights(feats, edges, config.pairwise)
    universe = universe_from_scribbles(scribbles)
    overlaps = scribble_overlap(spmap, scribbles)
    scr_table = scribble_unary(overlaps, universe)
    return PropagationContext(image, spmap, edges, feats, weights, universe, scr_table)


def _predictor_logprob(predictor, ctx, config):
    """Log-prob map over the image universe from whatever predictor was given."""
    if predictor is None:
        return None
    if isinstance(predictor, RefPredictorModel):
        return predict(predictor, ctx.image, ctx.spmap, feats=ctx.feats, labels=ctx.universe)
    if isinstance(predictor, LogProbMap):
        lp = predictor
        if lp.values.shape[:2] != ctx.spmap.ids.shape:
            raise errors.DimensionMismatch("log-prob map does not match image size")
        if lp.values.shape[2] != len(ctx.universe):
            raise errors.UniverseMismatch(
                f"log-prob map has {lp.values.shape[2]} labels, "
                f"image universe has {len(ctx.universe)}")
        if lp.labels is not None and list(lp.labels) != list(ctx.universe):
            raise errors.UniverseMismatch("log-prob labels do not match the image universe")
        return lp
    raise errors.InvalidParameter(f"unsupported predictor type {type(predictor)!r}")


def propagate_context(ctx, predictor=None, config=None):
    """Solve the labeling problem on a cached context.

    Returns (superpixel labeling, pixel LabelMap, energy).
    """
    config = config or TrainConfig()
    logprob = _predictor_logprob(predictor, ctx, config)
    net_table = None
    if logprob is not None:
        net_table = predictor_unary(logprob, ctx.spmap,
                                    size_normalize=config.net_size_normalize)
    unary = combine_unaries(ctx.scr_table, net_table)
    triples = [(i, j, w) for (i, j), w in zip(ctx.edges, ctx.weights)]
    problem = build_problem(unary, triples, ctx.universe, use_pairwise=config.use_pairwise)

    init = None
    if not config.use_pairwise:
        # unary-only mode: unmarked superpixels start from the background
        # label when it is annotated, else from the lowest one
        init = default_init(problem)
        unmarked = ~problem.unary.forbidden.any(axis=1)
        bg = ctx.universe.index(0) if 0 in ctx.universe else 0
        init[unmarked] = bg
    labeling = alpha_expansion(problem, init=init)
    energy = total_energy(problem, labeling)
    cats = np.asarray(ctx.universe, dtype=np.uint8)
    pixel_labels = cats[labeling][ctx.spmap.ids]
    return labeling, LabelMap(pixel_labels), energy


def propagate_image(image, scribbles, predictor=None, config=None):
    """One-shot propagation: superpixels + energies + expansion on one image.

    ``predictor`` is None, a RefPredictorModel, or a LogProbMap over the
    image's scribbled universe.  Returns (LabelMap, energy).
    """
    config = config or TrainConfig()
    config.validate()
    ctx = build_context(image, scribbles, config)
    _, labelmap, energy = propagate_context(ctx, predictor, config)
    return labelmap, energy


def infer(model, image, config=None):
    """Per-pixel argmax of the predictor alone; no graph, no scribbles."""
    config = config or TrainConfig()
    sp = config.superpixel
    spmap = segment_fh(image, k=sp.k, sigma=sp.sigma, min_size=sp.min_size)
    feats = superpixel_features(image, spmap, norm=config.hist_norm)
    logprob = predict(model, image, spmap, feats=feats)
    best = np.argmax(logprob.values, axis=2)  # ties -> lowest label index
    cats = np.asarray(model.universe, dtype=np.uint8)
    return LabelMap(cats[best])


# ---------------------------------------------------------------------------
# dataset-level alternation

@dataclass
class ImageState:
    name: str
    ctx: object = None            # scribble images only
    mask: object = None           # LabelMap for mask-bearing images
    spmap: object = None          # mask images only
    feats: np.ndarray = None      # mask images only
    labeling: np.ndarray = None   # current superpixel labeling (scribble images)
    labelmap: object = None       # current pixel labels used for training
    energy: float = None


@dataclass
class IterationStats:
    iteration: int
    mean_energy: float
    per_image_energy: dict
    label_changes: dict           # pixels changed vs previous iteration
    train_examples: int


@dataclass
class TrainState:
    model: object
    labelmaps: dict               # name -> LabelMap (propagated or mask)
    energies: dict                # name -> final energy (scribble images)
    stats: list                   # IterationStats per outer iteration


def _entry_name(path):
    return os.path.splitext(os.path.basename(path))[0]


def _majority_labels(mask, spmap, num_sp):
    """Majority mask category per superpixel; UNKNOWN-only superpixels get -1."""
    flat_ids = spmap.ids.ravel().astype(np.int64)
    flat_lab = mask.labels.ravel().astype(np.int64)
    keep = flat_lab != UNKNOWN
    counts = np.zeros((num_sp, 256), dtype=np.int64)
    np.add.at(counts, (flat_ids[keep], flat_lab[keep]), 1)
    out = np.argmax(counts, axis=1)
    out[counts.sum(axis=1) == 0] = -1
    return out


def alternate_train(dataset, config=None, out_dir=None):
    """Run the alternating loop over a dataset index.

    Returns a TrainState with the final model, the last propagated label
    maps (masks for mask-bearing images), and per-iteration statistics.
    When ``out_dir`` is given, writes iterN/labels/*.png, iterN/model.json,
    and iterN/stats.json checkpoints.
    """
    config = config or TrainConfig()
    config.validate()
    if not dataset.entries:
        raise errors.EmptyDataset("dataset index has no entries")

    states = []
    universe = set()
    for entry in dataset.entries:
        image = load_image(entry.image)
        st = ImageState(name=_entry_name(entry.image))
        if entry.mask is not None:
            mask = load_labelmap(entry.mask)
            if (mask.width, mask.height) != (image.width, image.height):
                raise errors.DimensionMismatch(f"mask size mismatch for {entry.image}")
            sp = config.superpixel
            st.mask = mask
            st.spmap = segment_fh(image, k=sp.k, sigma=sp.sigma, min_size=sp.min_size)
            st.feats = superpixel_features(image, st.spmap, norm=config.hist_norm)
            st.labelmap = mask
            universe.update(int(v) for v in np.unique(mask.labels) if v != UNKNOWN)
        else:
            scribbles = load_scribbles(entry.scribbles)
            st.ctx = build_context(image, scribbles, config)
            universe.update(st.ctx.universe)
        states.append(st)
    universe = sorted(universe)

    model = None
    stats = []
    for iteration in range(1, config.outer_iterations + 1):
        changes = {}
        energies = {}
        for st in states:
            if st.ctx is None:
                continue  # mask images contribute fixed labels; no propagation
            labeling, labelmap, energy = propagate_context(st.ctx, model, config)
            changes[st.name] = (int(np.count_nonzero(labelmap.labels != st.labelmap.labels))
                                if st.labelmap is not None else labelmap.labels.size)
            st.labeling, st.labelmap, st.energy = labeling, labelmap, energy
            energies[st.name] = energy

        examples = []
        pos = {c: i for i, c in enumerate(universe)}
        for st in states:
            if st.ctx is not None:
                for sp_idx in range(st.ctx.spmap.count):
                    cat = st.ctx.universe[st.labeling[sp_idx]]
                    examples.append((st.ctx.feats[sp_idx], pos[cat]))
            else:
                majors = _majority_labels(st.mask, st.spmap, st.spmap.count)
                for sp_idx in range(st.spmap.count):
                    if majors[sp_idx] >= 0:
                        examples.append((st.feats[sp_idx], pos[majors[sp_idx]]))
        model = train(examples, universe, config.predictor)

        it_stats = IterationStats(
            iteration=iteration,
            mean_energy=float(np.mean(list(energies.values()))) if energies else 0.0,
            per_image_energy=energies,
            label_changes=changes,
            train_examples=len(examples),
        )
        stats.append(it_stats)
        if out_dir is not None:
            _write_checkpoint(out_dir, iteration, states, model, it_stats)

    labelmaps = {st.name: st.labelmap for st in states}
    energies = {st.name: st.energy for st in states if st.energy is not None}
    return TrainState(model=model, labelmaps=labelmaps, energies=energies, stats=stats)


def _write_checkpoint(out_dir, iteration, states, model, it_stats):
    from .predictor import save_model

    it_dir = os.path.join(out_dir, f"iter{iteration}")
    labels_dir = os.path.join(it_dir, "labels")
    os.makedirs(labels_dir, exist_ok=True)
    for st in sorted(states, key=lambda s: s.name):
        save_labelmap(st.labelmap, os.path.join(labels_dir, f"{st.name}.png"))
    save_model(model, os.path.join(it_dir, "model.json"))
    payload = {
        "iteration": it_stats.iteration,
        "mean_energy": it_stats.mean_energy,
        "per_image_energy": {k: it_stats.per_image_energy[k]
                             for k in sorted(it_stats.per_image_energy)},
        "label_changes": {k: it_stats.label_changes[k]
                          for k in sorted(it_stats.label_changes)},
        "train_examples": it_stats.train_examples,
    }
    with open(os.path.join(it_dir, "stats.json"), "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
