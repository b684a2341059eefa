"""Exception types shared across the package.

Every raised condition gets its own class so callers can react per
failure mode instead of parsing messages.
"""


class TrialbridgeError(Exception):
    """Base class for all package errors."""


# --- dataset loading / validation ---------------------------------------


class MissingColumn(TrialbridgeError):
    pass


class NonBinaryTreatment(TrialbridgeError):
    pass


class NonFiniteCovariate(TrialbridgeError):
    pass


class MissingOutcomeInTrial(TrialbridgeError):
    pass


class EmptyTargetSample(TrialbridgeError):
    pass


# --- model fitting -------------------------------------------------------


class SingleClass(TrialbridgeError):
    pass


class Diverged(TrialbridgeError):
    """Logistic fit ran off to infinity (typically perfect separation)."""


class NoObservationalRows(TrialbridgeError):
    pass


class NonConvergence(TrialbridgeError):
    pass


# --- weighting -----------------------------------------------------------


class Infeasible(TrialbridgeError):
    """Balance target lies outside the convex hull of the sample moments."""


class RankDeficientMoments(TrialbridgeError):
    pass


class EmptyStratum(TrialbridgeError):
    pass


class ZeroWeightSum(TrialbridgeError):
    pass


# --- estimation ----------------------------------------------------------


class EmptyArm(TrialbridgeError):
    pass


class NotNested(TrialbridgeError):
    pass


class MissingTreatmentOutcome(TrialbridgeError):
    pass


class AllReplicatesFailed(TrialbridgeError):
    pass


class UnknownEstimator(TrialbridgeError):
    pass


class UnknownScenario(TrialbridgeError):
    pass


class ExtremePropensity(UserWarning):
    """Fitted treatment probabilities are numerically extreme."""


# --- graphs --------------------------------------------------------------


class CycleDetected(TrialbridgeError):
    pass


class UnknownNode(TrialbridgeError):
    pass


class DuplicateEdge(TrialbridgeError):
    pass


class NoSelectionNode(TrialbridgeError):
    pass


class DomainTooLarge(TrialbridgeError):
    pass
