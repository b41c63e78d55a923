"""devdiet: age-parameterized visual diet transforms, degradations, and metrics.

The package simulates the maturation of visual acuity, contrast sensitivity,
and chromatic sensitivity by transforming images as a function of
developmental age (months), generates parametric image degradations and
noise attacks, and scores behavioral prediction logs (shape bias, shape and
scene recall, robustness curves).
"""

__version__ = "0.1.0"

from .schedules import (  # noqa: F401
    ADULT_AGE_MONTHS,
    AnchorTable,
    EpochClock,
    LogisticCurve,
    ScheduleSet,
    acuity_at,
    build_schedule_set,
    chromatic_sensitivity_at,
    contrast_sensitivity_at,
    epoch_to_age,
    export_schedule,
    fit_logistic,
)
