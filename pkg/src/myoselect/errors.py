"""Exception hierarchy shared by every layer of the package."""


class MyoselectError(Exception):
    """Base class for all errors raised by myoselect."""


class SignalSetError(MyoselectError, ValueError):
    """Invalid recording or signalset content (layout, labels, non-finite samples)."""


class SignalSetIOError(MyoselectError, OSError):
    """Reading or writing a signalset directory failed; the message names the file."""


class ModelIOError(MyoselectError, OSError):
    """Reading or writing a persisted model failed, or the document has an unknown format."""


class ContaminationError(MyoselectError, ValueError):
    """Invalid contamination plan or an SNR that cannot be realized."""


class FeatureError(MyoselectError, ValueError):
    """Signal or coefficient vector unsuitable for feature extraction."""


class LearnerError(MyoselectError, ValueError):
    """Invalid training data or query vector for a base learner."""


class SolverStalledError(MyoselectError, RuntimeError):
    """The one-class SVM solver hit its iteration cap before reaching tolerance."""


class DetectorError(MyoselectError, ValueError):
    """Detector ensemble cannot be trained or applied to the given data."""


class EnsembleError(MyoselectError, ValueError):
    """Invalid ensemble specification or unreachable ECOC codebook."""


class StatisticsError(MyoselectError, ValueError):
    """Statistical routine called with unusable input."""


class InvariantViolation(MyoselectError, RuntimeError):
    """A run-time invariant check failed."""
