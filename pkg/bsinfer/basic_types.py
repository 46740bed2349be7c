"""Complex type annotations and basic data structures used throughout the project."""

from __future__ import annotations

from enum import Enum, IntEnum
from typing import Union, List, Dict, Sequence

import numpy as np


# JSON-serializable data types annotations.
JSONSimpleType = Union[int, float, bool, None, str]
JSONType = Union[JSONSimpleType, List['JSONType'], Dict[str, 'JSONType']]
JSONList = List[JSONType]
JSONDict = Dict[str, JSONType]
JSON = Union[JSONList, JSONDict]

# Numeric inputs accepted wherever a real vector or matrix is expected.
ArrayLike = Union[np.ndarray, Sequence[float], Sequence[Sequence[float]]]

# Entropy accepted by the random stream derivation: a single seed or a key tuple.
SeedKey = Union[int, Sequence[int]]


class Statistic(str, Enum):
    """Test statistics reported by the likelihood ratio machinery.

    Values are the stable field names used in JSON and CSV outputs.
    """
    LR = 'lr'
    LR_B = 'lr_b'
    LR_B_STAR = 'lr_b_star'
    LR_B_2STAR = 'lr_b_2star'
    LR_BOOT = 'lr_boot'


class ExitCode(IntEnum):
    OK = 0
    BAD_INPUT = 1
    RANK_DEFICIENT = 2
    NOT_CONVERGED = 3
    ABORTED = 4
