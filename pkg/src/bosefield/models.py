"""Base models for the package"""

from typing import Any

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict


def make_model_config(**kwargs: Any) -> ConfigDict:
    """Return a Pydantic config"""
    return ConfigDict(
        str_strip_whitespace=True,
        validate_assignment=True,
        validate_default=True,
        extra="forbid",
        use_enum_values=False,
        arbitrary_types_allowed=True,
        populate_by_name=True,
        **kwargs,  # type: ignore
    )


class BoseFieldBaseModel(BaseModel):
    """Base class for all bosefield models"""

    model_config = make_model_config()


class FrozenModel(BoseFieldBaseModel):
    """Base class for immutable numerics shared between chains."""

    model_config = make_model_config(frozen=True)


def read_only(array: NDArray) -> NDArray:
    """Return a read-only view of an array."""
    view = np.asarray(array).view()
    view.flags.writeable = False
    return view
