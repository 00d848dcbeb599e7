"""
Lazy top-level namespace: `metareduce.build_ranking` imports `metareduce.ranking`
on first access only, so `import metareduce` stays cheap for the CLI.
"""
import importlib
import os
from types import ModuleType

from ._types import Any, Dict, List, Mapping, Optional, Union

ImportStructure = Mapping[str, Union[List[str], "ImportStructure"]]


def flatten_structure(structure: ImportStructure, prefix: str = "") -> Dict[str, str]:
    """
    Map every exported name, and every module, of a nested import structure to
    the dotted path of the module that provides it.

    >>> flatten_structure({"meta": {"store": ["ingest"]}})
    {'meta': 'meta', 'meta.store': 'meta.store', 'ingest': 'meta.store'}
    """
    paths: Dict[str, str] = {}
    for key, value in structure.items():
        path = f"{prefix}{key}"
        paths.setdefault(path, path)
        if isinstance(value, Mapping):
            paths.update(flatten_structure(value, f"{path}."))
        else:
            for name in value:
                paths[name] = path
    return paths


class LazyModule(ModuleType):
    """
    Module whose public names are imported when first accessed.

    Adapted from:
    https://github.com/huggingface/diffusers/blob/main/src/diffusers/utils/import_utils.py
    """

    def __init__(self, name: str, module_file: str, import_structure: ImportStructure, module_spec: Optional[Any] = None) -> None:
        super().__init__(name)
        self._structure = import_structure
        self._paths = flatten_structure(import_structure)
        self.__all__ = sorted(n for n in self._paths if "." not in n)
        self.__file__ = module_file
        self.__spec__ = module_spec
        self.__path__ = [os.path.dirname(module_file)]

    def __dir__(self) -> List[str]:
        return sorted(set(super().__dir__()) | set(self.__all__))

    def __getattr__(self, name: str) -> Any:
        path = self._paths.get(name)
        if path is None:
            raise AttributeError(f"module {self.__name__} has no attribute {name}")
        module = importlib.import_module(f".{path}", self.__name__)
        value = module if path == name else getattr(module, name)
        setattr(self, name, value)
        return value

    def __reduce__(self):
        return self.__class__, (self.__name__, self.__file__, self._structure)


def import_class(class_name: str) -> Any:
    """Public class of the package by name, e.g. the `base_class` of a serialized payload."""
    return getattr(importlib.import_module("metareduce"), class_name)
