"""Simple utils and boilerplate code: file loading, checksums, random streams and worker pools."""

import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Callable, Iterable, List, Optional, TypeVar

import numpy as np
import yaml
from tqdm import tqdm

from bsinfer.basic_types import JSONType, SeedKey
from bsinfer.core import InputError

logger = logging.getLogger(__name__)

_T = TypeVar('_T')
_R = TypeVar('_R')


def load_yaml(file_path: Path) -> JSONType:
    """Reads YAML file contents into python object.

    Args:
         file_path: Yaml file path in pathlib format.

    Returns:
         Yaml file contents loaded into python object.
    """
    with file_path.open('r', encoding='utf8') as f:
        result = yaml.safe_load(f)

    return result


def load_json(file_path: Path) -> JSONType:
    """Reads JSON file contents into python object.

    Args:
         file_path: Json file path in pathlib format.

    Returns:
         Json file contents loaded into python object.
    """
    with file_path.open('r', encoding='utf8') as f:
        result = json.load(f)

    return result


def load_file(file_path: Path) -> JSONType:
    """Reads JSON and YAML contents files into Python object.

    Args:
        file_path: ``pathlib`` object with configuration file path.

    Returns:
        Object with loaded file contents.
    """
    if not file_path.is_file():
        raise InputError(f'No such file: {str(file_path)}')

    if file_path.suffix == '.json':
        return load_json(file_path)
    elif file_path.suffix in ['.yaml', '.yml']:
        return load_yaml(file_path)
    else:
        raise InputError(f'Unsupported extension of file: {str(file_path)}, can handle only .yaml, .yml or .json')


def file_checksum(file_path: Path) -> str:
    """Returns ``sha256:<hexdigest>`` of the file contents."""
    digest = hashlib.sha256()

    with file_path.open('rb') as f:
        for chunk in iter(lambda: f.read(1 << 16), b''):
            digest.update(chunk)

    return f'sha256:{digest.hexdigest()}'


def _entropy(key: SeedKey) -> List[int]:
    if isinstance(key, (int, np.integer)):
        key = [key]

    entropy = [int(k) for k in key]

    if any(k < 0 for k in entropy):
        raise ValueError(f'Random stream keys must be non-negative integers, got {entropy}')

    return entropy


def derive_stream(key: SeedKey, *subkeys: int) -> np.random.Generator:
    """Creates an independent random stream addressed by an integer key tuple.

    Streams are ``Philox`` counter-based generators keyed through ``SeedSequence``
    from the concatenation of ``key`` and ``subkeys``, e.g. ``(seed, purpose,
    replication, attempt)``. The same tuple always gives the same stream, distinct
    tuples give statistically independent streams, so results do not depend on
    the order in which streams are consumed or on the number of workers.

    Args:
        key: Base seed or base key tuple.
        *subkeys: Further non-negative integers appended to the key.

    Returns:
        Fresh ``numpy`` generator positioned at the start of its stream.
    """
    entropy = _entropy(key) + _entropy(subkeys)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def fresh_seed() -> int:
    """Draws a new 63-bit seed from system entropy."""
    return int(np.random.SeedSequence().generate_state(1, dtype=np.uint64)[0]) >> 1


def parallel_map(func: Callable[[_T], _R], items: Iterable[_T], workers: int = 1,
                 progress: bool = False, desc: Optional[str] = None) -> List[_R]:
    """Maps ``func`` over ``items`` keeping the input order.

    With ``workers > 1`` items are processed in a process pool, so ``func`` and
    items must be picklable (module-level functions or ``functools.partial`` of them).

    Args:
        func: Function applied to each item.
        items: Items to process.
        workers: Number of worker processes, 1 means in-process execution.
        progress: Show a ``tqdm`` progress bar on standard error.
        desc: Progress bar caption.

    Returns:
        List of results in the order of ``items``.
    """
    items = list(items)

    if workers <= 1 or len(items) < 2:
        return list(tqdm(map(func, items), total=len(items), disable=not progress, desc=desc))

    chunksize = max(1, len(items) // (workers * 8))
    logger.debug('Mapping %d items over %d workers, chunk size %d', len(items), workers, chunksize)

    with ProcessPoolExecutor(max_workers=workers) as executor:
        iterator = executor.map(func, items, chunksize=chunksize)
        return list(tqdm(iterator, total=len(items), disable=not progress, desc=desc))


def as_float_array(value: Any, name: str, ndim: int) -> np.ndarray:
    """Converts input to a finite float array of the given dimension.

    Raises:
        ValueError: naming the argument, on bad shape or non-finite values.
    """
    array = np.array(value, dtype=float)

    if ndim == 2 and array.ndim == 1:
        array = array[:, None]

    if array.ndim != ndim:
        raise ValueError(f'{name} must be {ndim}-dimensional, got shape {array.shape}')

    if not np.all(np.isfinite(array)):
        raise ValueError(f'{name} contains non-finite values')

    return array
