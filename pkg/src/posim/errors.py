"""Exception types that map onto distinct command-line exit codes."""


class PosimError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(PosimError):
    """A manifest, scenario, or design configuration is invalid."""


class FingerprintError(PosimError):
    """A dataset file failed integrity or scenario-binding checks."""


class DesignRuntimeError(PosimError):
    """A design was asked to decide on data it cannot handle."""
