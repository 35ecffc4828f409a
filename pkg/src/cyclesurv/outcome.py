from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class SubjectOutcome:
    """Observed follow-up of one subject.

    ``time`` is days since enrollment (event or censoring). ``cycle`` is the
    1-based index of the realized infusion interval containing ``time``.
    ``latent_time`` is the uncensored draw when the generator defines one.
    """

    time: float
    event: bool
    cycle: int
    latent_time: float | None = None
