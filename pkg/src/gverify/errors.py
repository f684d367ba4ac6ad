"""Exception hierarchy shared across the package."""


class GVerifyError(Exception):
    """Base class for all package errors."""


class LexError(GVerifyError, ValueError):
    def __init__(self, message: str, line_no: int, column: int):
        super().__init__(f"line {line_no}, column {column}: {message}")
        self.line_no = line_no
        self.column = column


class DecodeError(GVerifyError, ValueError):
    """Raised when a file is not a supported raster image."""


class LayoutError(GVerifyError, ValueError):
    """Raised when an indicator box does not fit in the cluster image."""


class ParseError(GVerifyError, ValueError):
    """Raised when model text is not a single JSON object."""


class SchemaError(GVerifyError, ValueError):
    """Raised when a JSON object does not match the report schema."""

    def __init__(self, verdict):
        super().__init__("; ".join(verdict.violations))
        self.verdict = verdict


class ConfigError(GVerifyError, ValueError):
    pass


class TransportError(GVerifyError):
    pass


class ApiError(GVerifyError):
    def __init__(self, status_code: int, body: str):
        super().__init__(f"HTTP {status_code}: {body}")
        self.status_code = status_code
        self.body = body


class MockMissError(GVerifyError, KeyError):
    def __init__(self, digest: str):
        super().__init__(digest)
        self.digest = digest

    def __str__(self) -> str:
        return f"no recorded response for digest {self.digest}"


class ManifestError(GVerifyError):
    pass


class DimensionError(GVerifyError, ValueError):
    pass


class ZeroVectorError(GVerifyError, ValueError):
    pass


class ProviderError(GVerifyError):
    """Raised when a remote embedding request fails."""
