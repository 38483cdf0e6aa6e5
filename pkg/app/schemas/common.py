"""Shared schema primitives."""

from pydantic import BaseModel, ConfigDict


class BaseSchema(BaseModel):
    model_config = ConfigDict(from_attributes=True)


class FrozenSchema(BaseModel):
    """Immutable value objects (schemas, cost reports, parameters)."""

    model_config = ConfigDict(frozen=True)


def id_sort_key(identifier: str) -> tuple[int, int, str]:
    """
    Order ids numerically when they are integers rendered as strings, and
    lexically otherwise. "9" sorts before "10"; non-numeric ids sort last.
    """
    if identifier.isdigit():
        return (0, int(identifier), "")
    return (1, 0, identifier)
