from typing import Optional


class EngineError(Exception):
    """Base class for every error raised by the engine"""


class ConfigError(EngineError):
    """Invalid configuration: bad values, missing files, overlapping clusters"""


class CorpusError(EngineError):
    """Fatal corpus problem: unreadable file, missing header, duplicate id"""


class TableFormatError(EngineError):
    """Malformed importance-table grid"""


class StageError(EngineError):
    """A pipeline stage failed; carries the stage tag for diagnostics"""

    def __init__(self, stage: str, message: str, cause: Optional[BaseException] = None):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.message = message
        self.cause = cause
