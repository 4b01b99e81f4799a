"""Image-directory extraction bridge for the hopmap engine."""

from .errors import ExtractError
from .extract import (EMBEDDERS, SEGMENTERS, ExtractionJob, ExtractionResult,
                      FileReport, default_stuff_path, extract)
from .features import (CUE_LABELS, SEMANTIC_DIM_DEFAULT, cue_embeddings,
                       dense_feature_map, embed_text, feature_dim,
                       gradient_magnitude, pooled_descriptor, semantic_vector,
                       upsample_features)
from .images import list_images, load_image
from .segment import segment_image

__version__ = "0.1.0"
