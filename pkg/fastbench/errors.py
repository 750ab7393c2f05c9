# -----------------------------------------------------------------------------
# Summary:		Exceptions raised by the fastbench harness
# Copyright (c) FastBench Authors. All Rights Reserved.
# -----------------------------------------------------------------------------
#


class FastBenchError(Exception):
    """Base class for fastbench errors, carries a human readable message"""
    def __init__(self, *args):
        super().__init__(*args)
        if args:
            self.message = args[0]
        else:
            self.message = None

    def __str__(self):
        if self.message:
            return '{0}, {1}'.format(type(self).__name__, self.message)
        else:
            return '{0} Exception'.format(type(self).__name__)


class ValidationError(FastBenchError):
    """ValidationError indicates an invalid histogram, profile, topology or parameter"""


class OutOfRangeError(FastBenchError):
    """OutOfRangeError indicates a time outside a rate profile's span"""


class TraceFormatError(FastBenchError):
    """TraceFormatError indicates a malformed trace file

    Args:
        message (str): description of the problem
        line (int, optional): 1-based line number in the file
    """
    def __init__(self, message: str, line: int = None):
        if line is not None:
            message = 'line {0}: {1}'.format(line, message)
        super().__init__(message)
        self.line = line


class ReplayStallError(FastBenchError):
    """ReplayStallError indicates the consumer held back replay beyond the stall budget"""
    def __init__(self, message: str, lateness_ms: float = 0.0, emitted: int = 0):
        super().__init__(message)
        self.lateness_ms = lateness_ms
        self.emitted = emitted


class InjectionClosedError(FastBenchError):
    """InjectionClosedError indicates an inject call after drain was initiated"""


class DrainTimeoutError(FastBenchError):
    """DrainTimeoutError indicates in-flight events did not complete before the watchdog fired"""
    def __init__(self, message: str, queue_depths: dict = None):
        super().__init__(message)
        self.queue_depths = dict(queue_depths or {})


class WorkloadError(FastBenchError):
    """WorkloadError indicates a workload file that fails schema or semantic checks"""
    def __init__(self, message: str, errors: list = None):
        self.errors = list(errors or [])
        if self.errors:
            message = '{0}: {1}'.format(message, '; '.join(self.errors))
        super().__init__(message)


class VerificationError(FastBenchError):
    """VerificationError indicates a report whose summary disagrees with its raw samples"""
    def __init__(self, message: str, mismatches: list = None):
        self.mismatches = list(mismatches or [])
        if self.mismatches:
            message = '{0}: {1}'.format(message, '; '.join(self.mismatches))
        super().__init__(message)
