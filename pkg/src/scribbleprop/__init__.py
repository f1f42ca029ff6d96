"""Scribble-supervised label propagation on superpixel graphs."""

from . import errors
from .core import (DatasetEntry, DatasetIndex, LabelMap, RgbImage, Scribble,
                   ScribbleSet, UNKNOWN, load_dataset_index, load_image,
                   load_labelmap, load_scribbles, rasterize, save_image,
                   save_labelmap, save_scribbles, scribbleset_to_json)
from .energy import (EnergyProblem, UnaryTable, build_problem, combine_unaries,
                     predictor_unary, scribble_unary, total_energy,
                     universe_from_scribbles)
from .evaluation import (IoUReport, SynthSpec, generate_synthetic, miou,
                         shorten_scribbles)
from .features import (PairwiseParams, color_hist, edge_weights,
                       pairwise_weight, superpixel_features, texture_hist)
from .mincut import CutResult, FlowNetwork, alpha_expansion, expansion_move, max_flow
from .predictor import (LogProbMap, PredictorConfig, RefPredictorModel,
                        load_logprob_file, load_model, predict,
                        save_logprob_file, save_model, train)
from .superpixel import SuperpixelMap, adjacency, scribble_overlap, segment_fh
from .trainer import (SuperpixelParams, TrainConfig, alternate_train,
                      build_context, infer, propagate_image)

__version__ = "0.1.0"
