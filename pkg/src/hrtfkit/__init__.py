"""Grid-agnostic HRTF magnitude modeling: a sine-activated neural field with
per-ear latent codes inferred by gradient steps from the origin, classical
spherical interpolation baselines, and log-spectral-distortion evaluation.
"""

__version__ = "0.1.0"

from .archive import (
    ArchiveError,
    DatasetArchive,
    Direction,
    Ear,
    MagnitudeField,
    SubjectEar,
    load_archive,
    merge_archives,
    save_archive,
)
from .baselines import bilinear_interpolate, build_triangulation, vbap_interpolate
from .evaluation import (
    LsdReport,
    SplitSpec,
    latent_morph,
    lsd,
    make_split,
    run_conditional_generation,
    run_interpolation_experiment,
)
from .preprocess import (
    canonicalize_ear,
    extend_azimuth_wrap,
    make_frequency_grid,
    mirror_right_ear,
    normalize_equator,
    process_subject_ear,
)
from .siren import SirenNetwork, load_model, predict, save_model, siren_init
from .training import TrainConfig, fit, infer_latent, lr_schedule, masked_mse

__all__ = [
    "ArchiveError",
    "DatasetArchive",
    "Direction",
    "Ear",
    "LsdReport",
    "MagnitudeField",
    "SirenNetwork",
    "SplitSpec",
    "SubjectEar",
    "TrainConfig",
    "__version__",
    "bilinear_interpolate",
    "build_triangulation",
    "canonicalize_ear",
    "extend_azimuth_wrap",
    "fit",
    "infer_latent",
    "latent_morph",
    "load_archive",
    "load_model",
    "lr_schedule",
    "lsd",
    "make_frequency_grid",
    "make_split",
    "masked_mse",
    "merge_archives",
    "mirror_right_ear",
    "normalize_equator",
    "predict",
    "process_subject_ear",
    "run_conditional_generation",
    "run_interpolation_experiment",
    "save_archive",
    "save_model",
    "siren_init",
    "vbap_interpolate",
]
