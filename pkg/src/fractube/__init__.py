"""Recursive tube hierarchies with box-counting dimension diagnostics."""

from .params import (
    ParamSchedule,
    ScheduleError,
    WidthLedger,
    default_schedule,
    lemma_schedule,
    make_schedule,
    schedule_from_json,
    schedule_to_json,
    toy_schedule,
    validate_schedule,
    width,
)

__all__ = [
    "ParamSchedule",
    "ScheduleError",
    "WidthLedger",
    "default_schedule",
    "lemma_schedule",
    "make_schedule",
    "schedule_from_json",
    "schedule_to_json",
    "toy_schedule",
    "validate_schedule",
    "width",
]
