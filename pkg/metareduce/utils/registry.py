from ..errors import InputError
from ._types import Any, Callable, Dict, Iterable, Iterator


class ItemExists(InputError):
    __name__ = "ItemExists"  # type: ignore
    __desc__ = "Item `{}` already exists in the registry with value `{}`."


class ItemNotFound(InputError):
    __name__ = "ItemNotFound"  # type: ignore
    __desc__ = "Item `{}` does not exist in the registry. Known items: {}."

    def __init__(self, key: str, known: Iterable[str] = ()) -> None:
        super().__init__(key, ", ".join(sorted(map(str, known))) or "none")


class Registry:
    """
    Base class for registers, such as the strategy or optimizer registry.
    """
    def __init__(self, name: str = "registry") -> None:
        self.name = name
        self.registry: Dict[str, Any] = {}

    def register(self, key: str, value: Any) -> Any:
        if key in self:
            raise ItemExists(key, self[key])
        self[key] = value
        return value

    def decorator(self, key: str) -> Callable[[Any], Any]:
        """
        Return a decorator registering the decorated object under `key`.
        """
        def wrapper(obj: Any) -> Any:
            return self.register(key, obj)
        return wrapper

    def unregister(self, key: str) -> None:
        del self[key]

    def __getitem__(self, key: str) -> Any:
        if key not in self.registry:
            raise ItemNotFound(key, self.registry.keys())
        return self.registry[key]

    def __setitem__(self, key: str, value: Any) -> None:
        self.registry[key] = value

    def __len__(self) -> int:
        return len(self.registry)

    def __delitem__(self, key: str) -> None:
        del self.registry[key]

    def __iter__(self) -> Iterator[str]:
        return iter(self.registry)

    def __contains__(self, key: object) -> bool:
        return key in self.registry

    def __str__(self) -> str:
        return f"{self.name}: {sorted(self.registry)}"

    def __repr__(self) -> str:
        return f"Registry({self.name!r}, {sorted(self.registry)!r})"
