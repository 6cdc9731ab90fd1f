"""pigpose: farm-animal keypoint estimation at desk scale.

Pipeline: ingest frames -> sample keyframes (mini-batch k-means) ->
annotate (browser client over the HTTP service) -> train the stacked
dense-net hourglass on Gaussian confidence maps -> predict 9x3 poses ->
evaluate threshold sweeps -> mine outlier frames back into the
annotation queue.
"""

from .skeleton import Skeleton, KeypointDef, parse_skeleton, pig_skeleton

__all__ = [
    "Skeleton",
    "KeypointDef",
    "parse_skeleton",
    "pig_skeleton",
]

__version__ = "0.1.0"
