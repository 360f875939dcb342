"""Exception hierarchy.

Every error raised on bad input derives from :class:`ViewAggError`, so the
CLI can map all of them to exit code 1 with a single ``except`` clause.
"""


class ViewAggError(Exception):
    """Base class for domain errors."""


# -- validation -------------------------------------------------------------

class ValidationError(ViewAggError, ValueError):
    pass


class ScoreOutOfRange(ValidationError):
    pass


class DuplicateImageId(ValidationError):
    pass


class ClassCountMismatch(ValidationError):
    pass


# -- ingest -----------------------------------------------------------------

class IngestError(ViewAggError, ValueError):
    pass


class MalformedHeader(IngestError):
    pass


class RowArity(IngestError):
    pass


class UnparsableScore(IngestError):
    pass


class UnknownView(IngestError):
    pass


class NonBinaryLabel(IngestError):
    pass


class DuplicateStudyId(IngestError):
    pass


class IoFailure(ViewAggError, OSError):
    pass


# -- aggregation / ensembling -----------------------------------------------

class AggregationError(ViewAggError, ValueError):
    pass


class EmptyView(AggregationError):
    pass


class MissingView(AggregationError):
    pass


class BothAbsent(AggregationError):
    pass


class ImageSetMismatch(AggregationError):
    pass


class MetadataConflict(AggregationError):
    pass


class InvalidWeights(AggregationError):
    pass


# -- metrics ----------------------------------------------------------------

class MetricError(ViewAggError, ValueError):
    pass


class LengthMismatch(MetricError):
    pass


class AllClassesExcluded(MetricError):
    pass


class MissingPrediction(MetricError):
    def __init__(self, study_ids):
        self.study_ids = list(study_ids)
        shown = ", ".join(self.study_ids[:10])
        more = f" (+{len(self.study_ids) - 10} more)" if len(self.study_ids) > 10 else ""
        super().__init__(f"no prediction for {len(self.study_ids)} labelled studies: {shown}{more}")


class UnknownStudy(MetricError):
    pass


class UnknownClassInSubset(MetricError):
    pass


class ClassSetMismatch(MetricError):
    pass


# -- synth ------------------------------------------------------------------

class InvalidConfig(ViewAggError, ValueError):
    pass
