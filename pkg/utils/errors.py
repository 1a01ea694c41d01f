#!/usr/bin/env python3
"""
Exception hierarchy for the DPQ laboratory

Every error raised on purpose by the library derives from DPQError, so the
command line launcher can tell library failures apart from programming errors.
"""

from typing import Any, Dict, Optional


class DPQError(Exception):
    """Base class for all library errors"""


class ShapeError(DPQError, ValueError):
    """Operand shapes or lengths do not agree"""


class ArgumentError(DPQError, ValueError):
    """An argument is outside its valid domain"""


class CapacityError(DPQError, ValueError):
    """A count exceeds what its index width can address"""


class CorruptionError(DPQError, ValueError):
    """Stored indices or payloads are inconsistent with their headers"""


class FormatError(DPQError, ValueError):
    """A checkpoint has the wrong magic, version or layer tag"""


class StateError(DPQError, RuntimeError):
    """An operation was called in the wrong lifecycle state"""


class TrainingError(DPQError, RuntimeError):
    """Denoiser training diverged"""


class CalibrationError(DPQError, RuntimeError):
    """Calibration diverged; `diagnostics` holds the state at failure"""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class UsageError(DPQError):
    """Command line usage problem"""
