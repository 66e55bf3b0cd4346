"""Reading and validating the published per-user directory layout."""

from .index import DatasetIndex, SummaryStats, scan_dataset, summary_stats
from .records import (
    BreathingFeaturesRecord,
    DatasetError,
    ExpertAnnotation,
    RecordParseError,
    Submission,
    SubmissionRecord,
    UserDirectory,
    UserRecord,
    ValidationReport,
    Violation,
    load_submission,
    load_user_directory,
    validate_breathing_features,
    validate_directory,
    validate_expert,
    validate_submission,
    validate_user,
)

__all__ = [
    "BreathingFeaturesRecord",
    "DatasetError",
    "DatasetIndex",
    "ExpertAnnotation",
    "RecordParseError",
    "Submission",
    "SubmissionRecord",
    "SummaryStats",
    "UserDirectory",
    "UserRecord",
    "ValidationReport",
    "Violation",
    "load_submission",
    "load_user_directory",
    "scan_dataset",
    "summary_stats",
    "validate_breathing_features",
    "validate_directory",
    "validate_expert",
    "validate_submission",
    "validate_user",
]
