from .errors import InputError
from .utils._types import *


class SchemaValidationError(InputError):
    """
    Raised when a model rejects its fields. `problems` holds one
    `field: message` entry per rejected field.
    """
    __name__ = "SchemaValidationError"  # type: ignore
    __desc__ = "Invalid {}:\n{}"

    def __init__(self, model: str, problems: Sequence[str]) -> None:
        self.model = model
        self.problems: List[str] = list(problems)
        super().__init__(model, "\n".join(f"- {p}" for p in self.problems))

    @classmethod
    def from_pydantic(cls, model: str, e: ValidationError) -> Self:
        problems = []
        for error in e.errors():
            where = ".".join(map(str, error["loc"])) or "__root__"
            # Pydantic prefixes validator messages raised as ValueError
            message = error["msg"].removeprefix("Value error, ")
            problems.append(f"{where}: {message}")
        return cls(model, problems)


class Schema(BaseModel):
    """
    Pydantic model whose validation failures surface as `SchemaValidationError`,
    so that malformed records and configurations are input errors.
    """

    def __init__(self, *args, **kwargs) -> None:
        try:
            super().__init__(*args, **kwargs)
        except ValidationError as e:
            raise SchemaValidationError.from_pydantic(self.__class__.__name__, e) from None

    def dict(self) -> Dict[str, Any]:  # type: ignore[override]
        """JSON-compatible field values."""
        return super().model_dump(mode="json")
