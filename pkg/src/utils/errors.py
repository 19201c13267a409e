"""

*** Errors.py ***

Contains:
Exception hierarchy shared by every workbench module

External dependencies:

Internal dependencies:

Changelog:
Date          Name              Change
__ _          __ _              ____ _
02/09/2024    Workbench team    Initial release

"""


class WorkbenchError(Exception):
    """Base class. The CLI reports ``type(err).__name__`` and exits with code 1."""


# Input / precondition errors
class InputError(WorkbenchError, ValueError):
    pass


class MissingColumn(InputError):
    pass


class RaggedSeries(InputError):
    pass


class NonFiniteValue(InputError):
    pass


class DuplicateKey(InputError):
    pass


class DegenerateData(InputError):
    pass


class EmptyDataset(InputError):
    pass


class NonDivisibleFactor(InputError):
    pass


class BadWindow(InputError):
    pass


class InvalidConfig(InputError):
    pass


class UnknownClass(InputError):
    pass


class UndefinedMAPE(InputError):
    pass


class UndefinedMASE(InputError):
    pass


class RankDeficient(InputError):
    pass


class PerplexityTooLarge(InputError):
    pass


class ClassTooSmall(InputError):
    pass


class EmptyArm(InputError):
    pass


class OutputExists(InputError):
    pass


class CheckpointFormatError(InputError):
    pass


# Runtime failures
class ComputationError(WorkbenchError, RuntimeError):
    pass


class UnstableIntegration(ComputationError):
    pass


class NonFiniteLoss(ComputationError):
    pass


class UnfittedModel(ComputationError):
    pass


class DataLeakage(ComputationError):
    """Test keys reached a fit/train call."""


class CodebookCollapse(UserWarning):
    """Fewer than two codes in use after VQ training. Reported, never fatal."""
