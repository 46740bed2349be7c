"""Core entities: the config base model and the exception hierarchy."""

from typing import TypeVar, Union

from pydantic import BaseSettings

from bsinfer.basic_types import JSONDict


class ConfigModelBase(BaseSettings):
    """Base model for ``bsinfer`` options and configs.

    Any ``bsinfer`` options object (optimizer settings, simulation experiments,
    run manifests) is a ``pydantic`` BaseSettings model derived from this class.
    Configs can be built from Python keywords, from ``JSONDict`` representations
    (``parse_obj``), which is how JSON and YAML experiment files are turned into
    models, or partly from environment variables: every field can be filled from
    a ``BSINFER_<FIELD>`` variable, so ``BSINFER_SEED`` supplies the seed of any
    config that has a ``seed`` field and did not receive one explicitly.

    Fields defined on the ``bsinfer`` library level should not be overridden or
    used for the logic they were not designed for.
    """
    class Config:
        env_prefix = 'BSINFER_'
        validate_assignment = True


TConfigModel = TypeVar('TConfigModel', bound=ConfigModelBase)
TConfig = Union[JSONDict, TConfigModel]


class BsInferError(Exception):
    """Base class for all errors raised by ``bsinfer``."""


class DomainError(BsInferError, ValueError):
    """Argument outside the domain of a function."""


class RankDeficiencyError(BsInferError, ValueError):
    """Design matrix is not of full column rank."""


class DegenerateDataError(BsInferError, ValueError):
    """Response lies in the column space of the design, the likelihood is unbounded."""


class ConvergenceError(BsInferError, RuntimeError):
    """Likelihood maximization did not converge where convergence is required."""


class HypothesisError(BsInferError, ValueError):
    """Null hypothesis is empty or inconsistent with the design dimensions."""


class BartlettFactorError(BsInferError, ValueError):
    """Bartlett correction factor is not positive."""


class BootstrapError(BsInferError, RuntimeError):
    """Too many bootstrap replicates failed to produce a statistic."""


class ExperimentAbortedError(BsInferError, RuntimeError):
    """Too many Monte Carlo replications failed to produce statistics."""


class InputError(BsInferError, ValueError):
    """Bad user input: files, columns, model or hypothesis specifications."""
