import os
import json

from .schema import Schema
from .utils._types import *
from .utils.imports import import_class


class Serializable(Schema):
    """
    Schema that can be written to and read back from JSON files.

    * `to_json` - creates a JSON compatible structure tagged with the class name
    * `from_json` - rebuilds an instance from such a structure or from a JSON file
    """

    def to_json(
            self,
            save_path: Optional[str] = None,
            exist_ok: bool = False
    ) -> SerializedType:
        """
        Serialize the instance.

        Args:
            save_path (str): Path to save the serialized instance.
            exist_ok (bool): If True, it will overwrite the file if it exists.

        Returns:
            SerializedType: Serialized instance.
        """
        _serialized = {"base_class": self.__class__.__name__, **self.dict()}

        if save_path:
            self.save_json(data=_serialized, path=save_path, exist_ok=exist_ok)

        return _serialized

    @classmethod
    def from_json(cls, serialized: DeserializableType) -> Self:
        """
        Deserialize an instance.

        Args:
            serialized (DeserializableType): Either a dictionary produced by `to_json`
                or a path to a JSON file holding one.

        Returns:
            Deserialized instance of `cls` or of the subclass it was saved from.
        """
        if isinstance(serialized, (str, os.PathLike)):
            serialized = cls.load_json(str(serialized))

        payload = dict(serialized)
        base_cls = cls
        class_name = payload.pop("base_class", None)
        if class_name and class_name != cls.__name__:
            base_cls = import_class(class_name)
            if not (isinstance(base_cls, type) and issubclass(base_cls, cls)):
                raise ValueError(
                    f"Deserialized class `{class_name}` is not a subclass of `{cls.__name__}`."
                )

        return base_cls(**payload)

    @staticmethod
    def save_json(
        data: SerializedType,
        path: str,
        exist_ok: bool = False
    ) -> None:
        """
        Save the serialized data to a file.
        """
        if os.path.exists(path) and not exist_ok:
            raise FileExistsError(f"File already exists at {path}.")
        with open(path, "w", encoding="utf-8") as f:
            json.dump(data, f, indent=4, sort_keys=True)
            f.write("\n")

    @staticmethod
    def load_json(path: str) -> SerializedType:
        """
        Load the serialized data from a file.
        """
        if not os.path.exists(path):
            raise FileNotFoundError(f"File not found at {path}.")
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
