class ExtractorError(Exception):
    """Fatal extraction problem (e.g. the backbone cannot be loaded)."""


class ValidationError(ExtractorError):
    """A written feature file failed a named validation check."""

    def __init__(self, check: str, message: str):
        self.check = check
        super().__init__(f"{check}: {message}")
