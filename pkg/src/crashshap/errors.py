"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class CrashShapError(Exception):
    exit_code = 1


class ConfigError(CrashShapError, ValueError):
    exit_code = 2


class DataError(CrashShapError, ValueError):
    exit_code = 3


class SchemaError(DataError):
    pass


class EmptyDatasetError(DataError):
    pass


class TrainingError(CrashShapError, ValueError):
    exit_code = 4


class ExplanationError(CrashShapError, ValueError):
    exit_code = 5
