"""Exception hierarchy.

Every error carries a short ``label`` that the CLI prints verbatim, so a
failing pipeline stage is identifiable from the report alone.
"""


class PanelbotError(Exception):
    label = "error"


class DegenerateInputError(PanelbotError, ValueError):
    label = "degenerate-input"


class ContractViolation(PanelbotError, ValueError):
    label = "contract-violation"


class ConfigError(PanelbotError, ValueError):
    label = "config-error"


class NoIntersectionError(PanelbotError):
    label = "no-intersection"


class BehindCameraError(PanelbotError):
    label = "behind-camera"


class InsufficientDataError(PanelbotError):
    label = "insufficient-data"


class DegenerateHullError(DegenerateInputError):
    label = "degenerate-hull"


class TrainingFailure(PanelbotError):
    label = "training-failure"

    def __init__(self, message, stage=None):
        super().__init__(message)
        self.stage = stage


class UndefinedMetricError(PanelbotError):
    label = "undefined-metric"


class EmptyHandleBoxError(PanelbotError):
    label = "empty-handle-bbox"


class SegmentationFailure(PanelbotError):
    label = "segmentation-failure"


class OpenJawNotFound(PanelbotError):
    label = "open-jaw-not-found"


class IncompleteWindowError(PanelbotError):
    label = "incomplete-window"


class TargetNotFound(PanelbotError):
    label = "target-not-found"


class ValveNotFound(PanelbotError):
    label = "valve-not-found"


class StereoMismatch(PanelbotError):
    label = "stereo-mismatch"
