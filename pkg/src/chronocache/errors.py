"""Error codes shared by the provider, cache server and client."""

from __future__ import annotations

import enum


class ErrorCode(str, enum.Enum):
    NOT_FOUND = "NOT_FOUND"
    NO_ENTRY = "NO_ENTRY"
    REVOKED = "REVOKED"
    STALE_PERIOD = "STALE_PERIOD"
    UPSTREAM_ERROR = "UPSTREAM_ERROR"
    VALIDATION = "VALIDATION"


class ChronoCacheError(Exception):
    """Base class; ``code`` identifies the error class on and off the wire."""

    code: str = "ERROR"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)
        self.message = message or self.code


class ValidationError(ChronoCacheError, ValueError):
    code = ErrorCode.VALIDATION.value


class NotFoundError(ChronoCacheError):
    code = ErrorCode.NOT_FOUND.value


class NoEntryError(ChronoCacheError):
    code = ErrorCode.NO_ENTRY.value


class RevokedError(ChronoCacheError):
    """Raised client-side before any message is sent. Never crosses the wire."""

    code = ErrorCode.REVOKED.value


class StalePeriodError(ChronoCacheError):
    code = ErrorCode.STALE_PERIOD.value


class UpstreamError(ChronoCacheError):
    code = ErrorCode.UPSTREAM_ERROR.value


class DecryptionError(ChronoCacheError):
    """AEAD authentication failure. Local to the decrypting party."""

    code = "DECRYPT_FAIL"


_BY_CODE = {
    cls.code: cls
    for cls in (ValidationError, NotFoundError, NoEntryError, RevokedError,
                StalePeriodError, UpstreamError)
}


def error_for_code(code: str, message: str = "") -> ChronoCacheError:
    """Rebuild the exception for a wire error code."""
    try:
        cls = _BY_CODE[code]
    except KeyError:
        raise ValidationError(f"unknown error code {code!r}") from None
    return cls(message)
