"""One-class-per-network (OCON) vowel and speaker-group classifiers on
formant features, built on plain numpy."""

__version__ = "0.1.0"

from .dataset import FeatureRecord, SplitSpec, ingest  # noqa: E402
from .ensemble import OconEnsemble, argmax, maxnet  # noqa: E402
from .features import FeatureMatrix, VariantKind, build_variant  # noqa: E402
from .neural import MLPConfig, OneClassNet  # noqa: E402

__all__ = [
    "FeatureMatrix", "FeatureRecord", "MLPConfig", "OconEnsemble", "OneClassNet", "SplitSpec",
    "VariantKind", "__version__", "argmax", "build_variant", "ingest", "maxnet",
]
