from __future__ import annotations

from typing import Iterable, Iterator, Mapping

import numpy as np


class SchemaError(ValueError):
    pass


class ParamStore:
    """Ordered name -> float64 array mapping with a flat-vector view.

    Iteration order is insertion order, so two stores built by the same code
    flatten identically.
    """

    def __init__(self, items: Mapping[str, np.ndarray] | Iterable[tuple[str, np.ndarray]] = ()):
        self._data: dict[str, np.ndarray] = {}
        pairs = items.items() if isinstance(items, Mapping) else items
        for name, value in pairs:
            self[name] = value

    def __setitem__(self, name: str, value) -> None:
        self._data[name] = np.asarray(value, dtype=np.float64)

    def __getitem__(self, name: str) -> np.ndarray:
        return self._data[name]

    def __contains__(self, name: object) -> bool:
        return name in self._data

    def __iter__(self) -> Iterator[str]:
        return iter(self._data)

    def __len__(self) -> int:
        return len(self._data)

    def __repr__(self) -> str:
        return f"ParamStore({len(self)} tensors, {self.numel()} values)"

    def keys(self):
        return self._data.keys()

    def items(self):
        return self._data.items()

    def values(self):
        return self._data.values()

    def schema(self) -> list[tuple[str, tuple[int, ...]]]:
        return [(name, tuple(v.shape)) for name, v in self._data.items()]

    def numel(self) -> int:
        return sum(v.size for v in self._data.values())

    def copy(self) -> "ParamStore":
        return ParamStore((k, v.copy()) for k, v in self._data.items())

    def flatten(self) -> np.ndarray:
        if not self._data:
            return np.zeros(0)
        return np.concatenate([v.reshape(-1) for v in self._data.values()])

    def unflatten(self, vector: np.ndarray) -> "ParamStore":
        """New store with this store's schema and values taken from ``vector``."""
        return ParamStore.from_flat(self.schema(), vector)

    @staticmethod
    def from_flat(schema: list[tuple[str, tuple[int, ...]]], vector: np.ndarray) -> "ParamStore":
        vector = np.asarray(vector, dtype=np.float64)
        total = sum(int(np.prod(shape, dtype=np.int64)) for _, shape in schema)
        if vector.ndim != 1 or vector.size != total:
            raise SchemaError(f"flat vector of length {vector.size} does not fit schema of {total} values")
        out = ParamStore()
        offset = 0
        for name, shape in schema:
            n = int(np.prod(shape, dtype=np.int64))
            out[name] = vector[offset:offset + n].reshape(shape).copy()
            offset += n
        return out

    def same_schema(self, other: "ParamStore") -> bool:
        return self.schema() == other.schema()

    def check_schema(self, other: "ParamStore", what: str = "parameters") -> None:
        if not self.same_schema(other):
            mine, theirs = dict(self.schema()), dict(other.schema())
            missing = sorted(set(mine) ^ set(theirs))
            shapes = sorted(k for k in set(mine) & set(theirs) if mine[k] != theirs[k])
            raise SchemaError(f"{what} schema mismatch: differing names {missing}, differing shapes {shapes}")
