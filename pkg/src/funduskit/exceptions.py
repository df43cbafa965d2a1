"""Exception hierarchy shared across the toolkit.

Two broad families matter for batch runs: configuration problems
(:class:`ConfigError`, CLI exit code 2) and problems with the data being
processed (:class:`DataError`, CLI exit code 3).

Errors under :class:`DegenerateStatistic` mark statistics that are
undefined on a particular sample (one-class AUC, zero-variance R2, ...).
The bootstrap treats these as "redraw this resample" rather than as
failures, so they get their own branch of the hierarchy.
"""


class FunduskitError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(FunduskitError):
    """Invalid configuration: bad paths, ratios, thresholds, flags."""


class DataError(FunduskitError):
    """Invalid or inconsistent input data."""


# --- imaging ---------------------------------------------------------------

class NoMaskFound(DataError):
    """No pixel exceeded the mask-detection threshold."""


class TensorFormatError(DataError):
    """Tensor file is truncated, mislabeled, or has a bad magic header."""


# --- dataset ---------------------------------------------------------------

class SchemaError(DataError):
    """Manifest header does not match the expected schema."""


class DuplicateParticipant(DataError):
    """The same participant id appears more than once."""


class UnparseableValue(DataError):
    """One or more manifest cells could not be parsed.

    Row-level problems are collected during the full pass and reported
    together; ``problems`` holds ``(line_number, column, raw_value, reason)``
    tuples.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        lines = "; ".join(
            f"line {ln}, column {col!r}: {reason} (got {raw!r})"
            for ln, col, raw, reason in self.problems
        )
        super().__init__(f"{len(self.problems)} unparseable cell(s): {lines}")


class EmptyReadings(DataError):
    """Cannot aggregate an empty list of measurements."""


class BadRatios(ConfigError):
    """Split ratios must be three non-negative numbers summing to 1."""


class NotEnoughMajority(DataError):
    """Requested more majority-class records than are available."""


class EmptyClass(DataError):
    """A class with zero examples has no defined weight."""


# --- quality gate ----------------------------------------------------------

class MissingQualityScores(DataError):
    """Quality labels do not cover every image present in the manifest."""


class DegenerateTable(DataError):
    """A contingency table with a zero marginal has no defined test."""


# --- fusion ----------------------------------------------------------------

class MismatchedPair(DataError):
    """Left/right predictions disagree on participant, task, or metadata."""


class DuplicatePrediction(DataError):
    """Two predictions share (participant, eye, task, model, split)."""


# --- metrics / bootstrap ---------------------------------------------------

class LengthMismatch(DataError):
    """Paired vectors have different lengths."""


class EmptyData(DataError):
    """Operation needs a nonempty (or longer) sample."""


class DegenerateStatistic(DataError):
    """Statistic undefined on this sample; bootstrap resamples are redrawn."""


class ZeroVariance(DegenerateStatistic):
    """R2 is undefined when the truth values have no variance."""


class OneClassOnly(DegenerateStatistic):
    """Ranking metrics need at least one positive and one negative."""


class NoPositives(DegenerateStatistic):
    """Precision-recall area needs at least one positive label."""


class TooManyDegenerateResamples(DataError):
    """More than the allowed share of bootstrap resamples were redrawn."""


class EmptySubgroup(DataError):
    """A requested subgroup matched no evaluable records."""
