"""Exception hierarchy.

Everything raised on bad input data derives from :class:`PcvcError`, which
the CLI maps to exit code 2.
"""


class PcvcError(Exception):
    """Base class for data and processing errors."""


class IoFailure(PcvcError):
    pass


# audio_io
class MalformedHeader(PcvcError):
    pass


class UnsupportedFormat(PcvcError):
    pass


class InvalidClip(PcvcError, ValueError):
    pass


# synth_corpus
class InvalidProfile(PcvcError, ValueError):
    pass


class InvalidLayout(PcvcError, ValueError):
    pass


class ManifestError(PcvcError):
    pass


# vowel_segmenter
class ClipTooShort(PcvcError):
    pass


class LeadTooShort(PcvcError):
    pass


class NoVowelFound(PcvcError):
    pass


class DegenerateThreshold(NoVowelFound):
    """Noise ceiling is exactly zero, so the doubled threshold is meaningless.

    Subclasses :class:`NoVowelFound` so callers that skip unsegmentable
    clips treat both the same way.
    """


# mfcc_frontend
class NegativeFrequency(PcvcError, ValueError):
    pass


class SegmentTooShort(PcvcError):
    pass


class TooFewBins(PcvcError):
    pass


class EmptyMatrix(PcvcError):
    pass


# mlp_classifier
class DimensionMismatch(PcvcError, ValueError):
    pass


class EmptyBatch(PcvcError, ValueError):
    pass


class NonFiniteObjective(PcvcError, ArithmeticError):
    pass


class VersionMismatch(PcvcError):
    pass


class MalformedModelFile(PcvcError):
    pass


# pipeline
class UnknownSpeaker(PcvcError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class EmptySplit(PcvcError):
    pass


class NoTrainableExamples(PcvcError):
    pass


class FeatureDimensionMismatch(DimensionMismatch):
    pass
