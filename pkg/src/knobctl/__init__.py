"""Open-loop control of tunable approximate programs.

Learns cost and fitness models from profiling data and picks, for a given
input and (error bound, probability) constraint, the knob setting with the
lowest predicted cost that is predicted to meet the constraint.
"""

import importlib

__version__ = "0.1.0"

# Resolved on first access so ``python -m knobctl.toyprog`` starts without numpy.
_EXPORTS = {
    "Constraint": "core", "ControlDecision": "core", "Knob": "core", "KnobSetting": "core",
    "KnobSpace": "core", "RunRecord": "core", "accurate_setting": "core",
    "enumerate_settings": "core",
    "Dataset": "dataset", "SplitDataset": "dataset", "normalize_errors": "dataset",
    "per_input_pareto": "dataset", "split": "dataset",
    "BACKEND": "kernels",
}

__all__ = sorted(_EXPORTS)


def __getattr__(name):
    mod = _EXPORTS.get(name)
    if mod is None:
        raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
    value = getattr(importlib.import_module(f".{mod}", __name__), name)
    globals()[name] = value
    return value


def __dir__():
    return sorted(set(globals()) | set(__all__))
