"""Diversity-calibrated image selection over precomputed embeddings.

The teacher builds a relevance/diversity kernel per article and calibrates
per-image inclusion marginals to a target expected selection size; a small
student scorer is distilled from those marginals; toy-scale fusion forward
passes, contrastive alignment losses, and selection metrics round out the
toolkit; and a command-line front end wires everything to JSON-lines files.
"""

from .align import (AlignBatch, LossWeights, alignment_loss, combine_losses,
                    mean_pool_decoder, pooled_visual_embedding, project_text)
from .config import AlignSettings, Config, SelectionSettings, load_config
from .errors import (DegeneratePool, DegenerateProjection, DivergenceError,
                     DppSelectError, IngestError, InvalidInput, InvalidMatrix,
                     OracleTooLarge, UndefinedMetric)
from .fusion import (AttentionWeights, FusionConfig, FusionStack,
                     GateXAttnWeights, MlpWeights, SamplerBlock,
                     TransformerBlock, visual_stack_forward, fused_stack_forward,
                     gated_xattn, init_fusion_stack, load_fusion_stack,
                     multi_head_attention, perceiver_sample, project,
                     save_fusion_stack, sinusoidal_positions,
                     text_only_forward)
from .io import ingest
from .linalg import (EigenPair, SymMatrix, is_psd, principal_minor_det,
                     sym_eig)
from .metrics import (DiversityReport, image_precision,
                      pairwise_cosine_distance, relevance_filter)
from .records import ArticleRecord, DppLabels, ImageRecord, unit_normalize
from .student import (SelectionResult, StudentModel, TrainConfig,
                      backprop_student, distillation_loss, init_student,
                      load_student, predict_probabilities, save_student,
                      select_images, student_forward, topk_indices,
                      train_student)
from .teacher import (KernelBundle, TeacherParams, brute_force_marginals,
                      build_kernel, calibrate_temperature, greedy_map_select,
                      label_article, marginals, trace_of_marginal)

__version__ = "0.1.0"
