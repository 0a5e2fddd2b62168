"""Experiment orchestration: test-function bank, studies, reports, CLI.

The studies module imports the solver stack, which in turn imports the
test-function bank from this package — so the study names are resolved
lazily here to keep that import chain acyclic.
"""

import importlib

from burgerslab.harness.bank import TestFunction, build_bank
from burgerslab.harness.config import (
    DEFAULT_TOLERANCES,
    STUDY_KINDS,
    ConfigError,
    ExperimentConfig,
)
from burgerslab.harness.reports import StudyReport, emit_reports, resolve_out_dir

_LAZY = {
    "STUDIES": "studies",
    "measure_order": "studies",
    "run_study": "studies",
    "main": "cli",
}

__all__ = [
    "TestFunction",
    "build_bank",
    "ConfigError",
    "ExperimentConfig",
    "STUDY_KINDS",
    "DEFAULT_TOLERANCES",
    "StudyReport",
    "emit_reports",
    "resolve_out_dir",
    "STUDIES",
    "measure_order",
    "run_study",
    "main",
]


def __getattr__(name):
    module = _LAZY.get(name)
    if module is None:
        raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
    return getattr(importlib.import_module(f"burgerslab.harness.{module}"), name)
