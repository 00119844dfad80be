from __future__ import annotations

import copy
import hashlib
import json
from typing import Any, Dict, Mapping


class Config(dict):
    def __init__(
        self,
        data: Mapping[str, Any],
        read_only: bool = True,
        location: str = "<in-memory config>",
        *args: Any,
        **kwargs: Any,
    ) -> None:
        super().__init__(*args, **kwargs)
        self._read_only: bool = read_only
        self._location: str = location
        self._initialized: bool = True
        self.update(data)

    @property
    def is_read_only(self) -> bool:
        return self._read_only

    @property
    def config_path(self) -> str:
        return self._location

    def __getattr__(self, name: str) -> Any:
        if name in self.keys():
            value = self[name]
            if isinstance(value, dict) and not isinstance(value, Config):
                return Config(value, read_only=self._read_only, location=f"{self._location}:{name}")
            return value
        try:
            return self.__dict__[name]
        except KeyError:
            raise AttributeError(f"'{type(self).__name__}' object has no attribute '{name}'")

    def __setattr__(self, name: str, value: Any) -> None:
        if name in self.keys() and self._read_only:
            raise RuntimeError(f"'{type(self).__name__}' object is read-only")
        elif name in self.keys() and not self._read_only:
            self[name] = value
        elif name not in self.keys() and "_initialized" not in self.__dict__:
            self.__dict__[name] = value
        else:
            raise AttributeError(f"'{type(self).__name__}' object has no attribute '{name}'")

    def to_dict(self) -> Dict[str, Any]:
        return json.loads(json.dumps(self))

    def with_overrides(self, overrides: Mapping[str, Any]) -> Config:
        """Return a copy with dotted keys (``stage1.epochs``) replaced. ``None`` values are skipped."""
        data = copy.deepcopy(self.to_dict())
        for dotted_key, value in overrides.items():
            if value is None:
                continue
            *parents, leaf = dotted_key.split(".")
            node = data
            for parent in parents:
                node = node.setdefault(parent, {})
            node[leaf] = value
        return Config(data, read_only=self._read_only, location=self._location)

    def canonical_json(self) -> str:
        return json.dumps(self, sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()
