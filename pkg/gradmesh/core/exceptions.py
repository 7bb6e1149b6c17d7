class GradmeshError(Exception):
    """Base class for every error raised by gradmesh."""


class ConfigurationError(GradmeshError):
    """Invalid experiment or model configuration (bad dims, lr, insufficient data, ...)."""


class ContractError(GradmeshError):
    """A caller violated an operation's precondition (dim mismatch, malformed payload, ...)."""


class KeyNotFound(GradmeshError, KeyError):
    """A substrate read addressed a key that was never written."""

    def __init__(self, key: str, substrate: str = ""):
        self.key = key
        self.substrate = substrate
        super().__init__(key)

    def __str__(self) -> str:
        where = f" in {self.substrate}" if self.substrate else ""
        return f"key '{self.key}' not found{where}"


class ProtocolError(GradmeshError):
    """A training-round protocol broke: barrier timeout, missing announced key, ordering bug."""

    def __init__(
        self,
        message: str,
        strategy: str | None = None,
        round: int | None = None,
        worker: int | None = None,
        missing: list | None = None,
    ):
        self.message = message
        self.strategy = strategy
        self.round = round
        self.worker = worker
        self.missing = list(missing or [])
        super().__init__(message)

    def with_context(self, strategy: str | None = None, round: int | None = None, worker: int | None = None):
        """Fill in context fields that are not set yet and return self."""
        if self.strategy is None:
            self.strategy = strategy
        if self.round is None:
            self.round = round
        if self.worker is None:
            self.worker = worker
        return self

    def __str__(self) -> str:
        parts = []
        if self.strategy is not None:
            parts.append(f"strategy={self.strategy}")
        if self.round is not None:
            parts.append(f"round={self.round}")
        if self.worker is not None:
            parts.append(f"worker={self.worker}")
        if self.missing:
            parts.append(f"missing={self.missing}")
        context = f" [{', '.join(parts)}]" if parts else ""
        return f"{self.message}{context}"
