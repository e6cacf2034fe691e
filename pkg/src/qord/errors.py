class DomainError(ValueError):
    """Argument outside the physically valid domain (e.g. wavelength out of band)."""


class InputError(ValueError):
    """Malformed or insufficient input data."""


class MetadataError(InputError):
    """Two data sets that must agree on scheme/bias/wavelengths do not."""


class SchemeError(ValueError):
    """Operation requested for a measurement scheme that does not support it."""


class FitError(RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConfigError(ValueError):
    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where = f"{source}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class VisibilityWarning(UserWarning):
    """Observed fringe contrast exceeds what the supplied visibility allows."""
