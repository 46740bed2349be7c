"""Experiment files management.

Simulation experiments can be described in a single JSON or YAML file instead of
Python code. The file holds a mapping from experiment names to experiment
configs. An experiment config is a dict of ``SimConfig`` fields plus a few
reserved keys:

* ``extends``: name of another experiment of the same set (referenced experiment).
  All fields absent in the config are filled with the corresponding values of
  the referenced config. The referenced experiment can itself extend another
  one, the whole chain is resolved. This is called "experiment resolution".
* ``run``: what to estimate, ``null`` (null rejection rates, default), ``power``
  (nonnull rejection rates) or ``discrepancy`` (relative quantile discrepancies).
* ``grid``: probabilities of a ``discrepancy`` run.
* ``abstract``: when true, the experiment only serves as a base for others and is
  skipped when the whole set is run.

Example::

    base:
      abstract: true
      n: 30
      alpha: 0.5
      replications: 10000
    p3:
      extends: base
      p: 3
      hypothesis: {kind: beta_subset, indices: [1, 2]}
"""

from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Optional

from pydantic import BaseModel, ValidationError

from bsinfer.basic_types import JSONDict
from bsinfer.core import InputError
from bsinfer.montecarlo import SimConfig
from bsinfer.utils import load_file

RUN_KINDS = ('null', 'power', 'discrepancy')
DEFAULT_GRID = tuple(round(0.01 * i, 2) for i in range(1, 100))
_RESERVED = ('extends', 'run', 'grid', 'abstract')


class Experiment(NamedTuple):
    """Resolved and validated experiment.

    Attributes:
        name: Experiment name.
        run: One of ``RUN_KINDS``.
        config: Simulation config.
        grid: Probabilities of a ``discrepancy`` run, empty otherwise.
    """
    name: str
    run: str
    config: SimConfig
    grid: tuple = ()


class ExperimentSet:
    """Named experiment configs sharing one namespace.

    ``ExperimentSet`` is a container for experiment configs loaded from files or
    built in code (see ``bsinfer.presets``). It resolves references among the
    configs and validates them into ``Experiment`` objects.
    """
    def __init__(self) -> None:
        self._meta_configs = {}

    def add_config(self, name: str, config: JSONDict, source: str = 'undefined', update: bool = False) -> None:
        """Adds experiment config to the set.

        Args:
            name: Experiment name.
            config: Experiment config in JSON-serializable dict format.
            source: Config source ID, used to locate the config in error messages.
            update: If ``True``, an existing config with the same name is replaced,
                else an exception is raised. Default value is ``False``.
        """
        if not isinstance(config, dict):
            raise InputError(f'Experiment {name} (source: {source}) must be a mapping')

        if name in self._meta_configs and not update:
            raise InputError(f'Trying to add experiment with already existing name: {name}, '
                             f'new config source: {source}, '
                             f'existing config source: {self._meta_configs[name]["source"]}')

        run = config.get('run', 'null')

        if run not in RUN_KINDS:
            raise InputError(f'Experiment {name} (source: {source}) has unknown run kind \'{run}\', '
                             f'should be one of {RUN_KINDS}')

        self._meta_configs[name] = {
            'config': dict(config),
            'source': source
        }

    def get_config(self, name: str) -> Optional[JSONDict]:
        """Returns raw experiment config by its name or ``None`` if it is absent."""
        meta_config = self._meta_configs.get(name)
        return meta_config['config'] if meta_config else None

    def names(self, include_abstract: bool = False) -> List[str]:
        """Returns experiment names in insertion order."""
        return [name for name, meta in self._meta_configs.items()
                if include_abstract or not meta['config'].get('abstract', False)]

    def _resolve_config(self, name: str, chain: Optional[List[str]] = None) -> JSONDict:
        """Resolves experiment config.

        Recursively merges all configs of the reference chain of the experiment.

        Args:
            name: Experiment name.
            chain: Names already visited in the chain, used for cyclic references
                detection.

        Returns:
            Resolved config without the ``extends`` and ``abstract`` keys.
        """
        meta_config = self._meta_configs[name]
        config = meta_config['config']
        ref_name = config.get('extends')
        chain = (chain or []) + [name]

        if ref_name is None:
            resolved = {}
        elif ref_name not in self._meta_configs:
            raise InputError(f'Experiment {name} (source: {meta_config["source"]}) '
                             f'extends the absent experiment {ref_name}')
        elif ref_name in chain:
            info = ''.join(f'\n\tname: {_name}, extends: {self._meta_configs[_name]["config"].get("extends")}, '
                           f'source: {self._meta_configs[_name]["source"]}' for _name in chain)
            raise InputError(f'Cyclic reference among experiments:{info}')
        else:
            resolved = self._resolve_config(ref_name, chain)

        resolved.update(config)
        resolved.pop('extends', None)
        resolved.pop('abstract', None)
        return resolved

    def resolve(self, name: str) -> JSONDict:
        """Returns fully resolved config of the experiment."""
        if name not in self._meta_configs:
            raise InputError(f'No experiment named {name}, available: {self.names()}')

        return self._resolve_config(name)

    def get_experiment(self, name: str, overrides: Optional[Dict[str, Any]] = None) -> Experiment:
        """Resolves and validates an experiment.

        Args:
            name: Experiment name.
            overrides: ``SimConfig`` field values replacing the configured ones
                (e.g. replication count or seed set on the command line).

        Returns:
            ``Experiment`` instance.

        Raises:
            InputError: If the config can not be resolved or fails validation.
        """
        resolved = self.resolve(name)
        resolved.update({k: v for k, v in (overrides or {}).items() if v is not None})
        run = resolved.pop('run', 'null')
        grid = resolved.pop('grid', None)

        try:
            config = SimConfig.parse_obj(resolved)
        except ValidationError as e:
            source = self._meta_configs[name]['source']
            raise InputError(f'Invalid experiment {name} (source: {source}): {e}') from e

        if run == 'discrepancy':
            grid = tuple(float(prob) for prob in (grid or DEFAULT_GRID))
        elif grid is not None:
            raise InputError(f'Experiment {name} sets a grid but its run kind is \'{run}\'')

        return Experiment(name=name, run=run, config=config, grid=grid or ())

    def experiments(self, overrides: Optional[Dict[str, Any]] = None) -> List[Experiment]:
        """Returns all non-abstract experiments, resolved and validated."""
        return [self.get_experiment(name, overrides) for name in self.names()]


class _ConfigFileModel(BaseModel):
    """Experiment file validation model."""
    __root__: Dict[str, Dict[str, Any]]


def experiment_set_from_dict(configs: JSONDict, source: str = 'undefined') -> ExperimentSet:
    """Builds ``ExperimentSet`` from a mapping of experiment names to configs."""
    try:
        _ConfigFileModel.parse_obj(configs)
    except ValidationError as e:
        raise InputError(f'Experiments (source: {source}) must map names to configs: {e}') from e

    experiment_set = ExperimentSet()

    for name, config in configs.items():
        experiment_set.add_config(name=name, config=config, source=source)

    return experiment_set


def load_config_file(file_path: Path) -> ExperimentSet:
    """Loads experiment configs from a single JSON or YAML file.

    File should contain a dict as the root element where keys are experiment
    names and values are experiment configs.

    Args:
        file_path: ``pathlib`` object with the experiment file path.

    Returns:
        ``ExperimentSet`` instance.
    """
    return experiment_set_from_dict(load_file(file_path), source=str(file_path))
