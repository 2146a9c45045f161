"""Exception hierarchy. Every error raised by this package derives from KernelForgeError."""


class KernelForgeError(Exception):
    pass


class TensorFormatError(KernelForgeError):
    """Bad magic, truncated payload or unknown dtype code in a tensor stream."""


class SignatureError(KernelForgeError):
    """Kernel signature inconsistency: unresolvable symbolic dim, shape mismatch, oracle mismatch."""


class ComparisonError(KernelForgeError):
    """Tensors are not comparable (shape or dtype mismatch)."""


class MeasurementError(KernelForgeError):
    """Invalid timing input, e.g. a non-positive runtime."""


class AggregationError(KernelForgeError):
    """Invalid speedup aggregation input (empty list, non-positive entry)."""


class LogFormatError(KernelForgeError):
    """Malformed optimization-log file."""

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class ConfigError(KernelForgeError):
    """Invalid run configuration, task manifest or CLI usage."""


class ExecutorError(KernelForgeError):
    """Execution backend failed outside normal candidate-failure reporting."""


class ProfilingError(ExecutorError):
    """A profile run did not complete; carries the offending RunOutcome."""

    def __init__(self, message, outcome=None):
        super().__init__(message)
        self.outcome = outcome


class BackendError(KernelForgeError):
    """Agent backend transport failure after exhausting retries."""


class ScriptingError(BackendError):
    """Scripted transcript is missing an entry the run requested."""


class PlanningError(KernelForgeError):
    """Planning agent produced no usable suggestions."""


class CodingError(KernelForgeError):
    """Coding agent produced no usable candidate source."""
