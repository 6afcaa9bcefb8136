"""GMM-based superpixel segmentation with an EM estimator and evaluation tools."""

__version__ = "0.1.0"

from .grid import (GridGeometry, Window, candidates_of, geometry_from_intervals,
                   intervals_from_count, window_of)
from .imaging import (FeatureImage, ImageError, RasterImage, load_image,
                      load_label_map, rgb_to_lab, save_image, save_label_map,
                      save_label_overlay, to_feature_image)
from .gmm import (EmConfig, EmResult, MixtureParams, ResponsibilityTable,
                  e_step, init_params, log_gaussian, log_likelihood, m_step,
                  regularize_covariance, run_em, set_thread_count)
from .labeling import (LabelMap, Region, assign_labels, connected_components,
                       enforce_connectivity, min_region_size)
from .metrics import (MetricsReport, achievable_accuracy, boundary_recall,
                      evaluate, undersegmentation_error)

__all__ = [
    "GridGeometry", "Window", "candidates_of", "geometry_from_intervals",
    "intervals_from_count", "window_of",
    "FeatureImage", "ImageError", "RasterImage", "load_image",
    "load_label_map", "rgb_to_lab", "save_image", "save_label_map",
    "save_label_overlay", "to_feature_image",
    "EmConfig", "EmResult", "MixtureParams", "ResponsibilityTable",
    "e_step", "init_params", "log_gaussian", "log_likelihood", "m_step",
    "regularize_covariance", "run_em", "set_thread_count",
    "LabelMap", "Region", "assign_labels", "connected_components",
    "enforce_connectivity", "min_region_size",
    "MetricsReport", "achievable_accuracy", "boundary_recall", "evaluate",
    "undersegmentation_error",
]
