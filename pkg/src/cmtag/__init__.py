"""Sequence tagging trained jointly on clean and distantly supervised
data, with label noise modeled by global or word-cluster confusion
matrices."""

from .corpus import (Corpus, Sentence, TagSet, io_to_iob2, iob2_to_io,
                     read_conll, split_clean_noisy, write_conll)
from .distant import (Gazetteer, LabeledPair, annotate, collect_pairs,
                      load_gazetteer)
from .embeddings import EmbeddingTable, PcaTransform, fit_pca, load_vectors, project
from .clustering import (BrownState, KMeansState, WordClustering, assign,
                         brown_cluster, kmeans_cluster, kmeans_fit,
                         load_clustering, save_clustering)
from .noise import (ConfusionLogits, ConfusionModel, build_model,
                    effective_matrix, init_logits, load_model,
                    noisy_distribution, row_softmax, save_model,
                    select_frequent)
from .tagger import (Gradients, Instance, TaggerModel, TrainConfig, featurize,
                     forward_clean, forward_noisy, load_checkpoint,
                     loss_and_grads, nadam_step, predict, save_checkpoint,
                     train)
from .evaluation import (EntitySpan, EvalReport, extract_spans,
                         labeling_report, render_report, report_json, score)
from .benchmark import (SyntheticSpec, TrendReport, VariantConfig,
                        corrupt_corpus, default_spec, generate, parse_mode,
                        run_matrix_experiment, synthetic_gazetteer)
from .errors import (AlignmentError, CmtagError, ConfigError, NumericalError,
                     ParseError, ShapeError)

__version__ = "0.1.0"
