"""Pipeline configuration: a TOML file plus a few environment overrides.

Sections and keys (all optional; relative paths resolve against the
config file's directory):

```toml
[paths]
lexicon = "lexicon.tsv"
mapping = "mapping.csv"
triggers = "triggers.toml"      # omit to use the packaged defaults
corpus = "corpus.jsonl"
model_dir = "models"
annotation_store = "annotations.jsonl"
cohort = "cohort.csv"           # omit to ingest without a cohort window

[cohort]
study_end = 2019-12-31
lookback_months = 3

[forest]
n_trees = 100
min_leaf = 1
bootstrap = true
# max_features / max_depth: omit for sqrt-of-vocab / unlimited

[evaluation]
k = 10
seed = 42
include_irrelevant = false

[service]
port = 8765

[terminology]
sparql_endpoint = "https://example.org/sparql"
```

Environment: ``COMORBID_CONFIG`` names the default config file,
``COMORBID_PORT`` overrides the service port, and
``COMORBID_SPARQL_ENDPOINT`` overrides the SPARQL endpoint.  The
random seed never defaults to the clock; runs are reproducible unless
the caller changes the seed explicitly.
"""
from __future__ import annotations

import datetime
import logging
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

try:  # stdlib from Python 3.11
    import tomllib as tomli
except ModuleNotFoundError:  # pragma: no cover
    import tomli

from .errors import ParseError, ValidationError
from .filtermodel import ForestParams

logger = logging.getLogger(__name__)

ENV_CONFIG = "COMORBID_CONFIG"
ENV_PORT = "COMORBID_PORT"
ENV_SPARQL_ENDPOINT = "COMORBID_SPARQL_ENDPOINT"

DEFAULT_PORT = 8765
DEFAULT_SEED = 42
DEFAULT_K = 10

_KNOWN_SECTIONS = {"paths", "cohort", "forest", "evaluation", "service", "terminology"}


@dataclass(frozen=True)
class PipelineConfig:
    lexicon: Path | None = None
    mapping: Path | None = None
    triggers: Path | None = None
    corpus: Path | None = None
    model_dir: Path = Path("models")
    annotation_store: Path = Path("annotations.jsonl")
    cohort: Path | None = None
    study_end: datetime.date | None = None
    lookback_months: int = 3
    forest: ForestParams = field(default_factory=ForestParams)
    k: int = DEFAULT_K
    seed: int = DEFAULT_SEED
    include_irrelevant: bool = False
    port: int = DEFAULT_PORT
    sparql_endpoint: str | None = None

    def require(self, *names: str) -> None:
        """Fail early when a command needs paths the config does not set."""
        missing = [name for name in names if getattr(self, name) is None]
        if missing:
            raise ValidationError(
                "config is missing required path(s): " + ", ".join(missing)
            )
        for name in names:
            path = getattr(self, name)
            if isinstance(path, Path) and not path.exists():
                raise ValidationError(f"configured {name} path does not exist: {path}")


def _as_path(base: Path, value: Any, key: str) -> Path:
    if not isinstance(value, str):
        raise ValidationError(f"config key {key} must be a string path")
    path = Path(value)
    return path if path.is_absolute() else (base / path)


def _as_date(value: Any, key: str) -> datetime.date:
    if isinstance(value, datetime.datetime):
        return value.date()
    if isinstance(value, datetime.date):
        return value
    if isinstance(value, str):
        try:
            return datetime.date.fromisoformat(value)
        except ValueError as exc:
            raise ValidationError(f"config key {key} is not an ISO date: {value!r}") from exc
    raise ValidationError(f"config key {key} must be a date")


def _as_int(value: Any, key: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"config key {key} must be an integer")
    return value


def _as_bool(value: Any, key: str) -> bool:
    if not isinstance(value, bool):
        raise ValidationError(f"config key {key} must be a boolean")
    return value


def load_config(
    path: str | Path | None = None, env: Mapping[str, str] | None = None
) -> PipelineConfig:
    """Read a config file (or defaults when none is named) and apply env overrides."""
    env = os.environ if env is None else env
    if path is None:
        path = env.get(ENV_CONFIG) or None
    if path is None:
        config = PipelineConfig()
    else:
        config = _load_file(Path(path))
    if ENV_PORT in env:
        try:
            port = int(env[ENV_PORT])
        except ValueError as exc:
            raise ValidationError(f"{ENV_PORT} must be an integer, got {env[ENV_PORT]!r}") from exc
        config = replace(config, port=port)
    if ENV_SPARQL_ENDPOINT in env:
        config = replace(config, sparql_endpoint=env[ENV_SPARQL_ENDPOINT])
    return config


def _load_file(path: Path) -> PipelineConfig:
    try:
        with open(path, "rb") as fh:
            payload = tomli.load(fh)
    except tomli.TOMLDecodeError as exc:
        raise ParseError(f"config file {path} is not valid TOML: {exc}") from exc
    for section in payload:
        if section not in _KNOWN_SECTIONS:
            logger.warning("config file %s has unknown section [%s]; ignoring", path, section)
    base = path.resolve().parent
    paths = payload.get("paths", {})
    cohort = payload.get("cohort", {})
    forest = payload.get("forest", {})
    evaluation = payload.get("evaluation", {})
    service = payload.get("service", {})
    terminology = payload.get("terminology", {})
    params = ForestParams(
        n_trees=_as_int(forest.get("n_trees", 100), "forest.n_trees"),
        max_features=(
            _as_int(forest["max_features"], "forest.max_features")
            if "max_features" in forest
            else None
        ),
        min_leaf=_as_int(forest.get("min_leaf", 1), "forest.min_leaf"),
        max_depth=(
            _as_int(forest["max_depth"], "forest.max_depth") if "max_depth" in forest else None
        ),
        bootstrap=_as_bool(forest.get("bootstrap", True), "forest.bootstrap"),
    )
    params.validate()
    config = PipelineConfig(
        lexicon=_as_path(base, paths["lexicon"], "paths.lexicon") if "lexicon" in paths else None,
        mapping=_as_path(base, paths["mapping"], "paths.mapping") if "mapping" in paths else None,
        triggers=(
            _as_path(base, paths["triggers"], "paths.triggers") if "triggers" in paths else None
        ),
        corpus=_as_path(base, paths["corpus"], "paths.corpus") if "corpus" in paths else None,
        model_dir=(
            _as_path(base, paths["model_dir"], "paths.model_dir")
            if "model_dir" in paths
            else base / "models"
        ),
        annotation_store=(
            _as_path(base, paths["annotation_store"], "paths.annotation_store")
            if "annotation_store" in paths
            else base / "annotations.jsonl"
        ),
        cohort=_as_path(base, paths["cohort"], "paths.cohort") if "cohort" in paths else None,
        study_end=_as_date(cohort["study_end"], "cohort.study_end") if "study_end" in cohort else None,
        lookback_months=_as_int(cohort.get("lookback_months", 3), "cohort.lookback_months"),
        forest=params,
        k=_as_int(evaluation.get("k", DEFAULT_K), "evaluation.k"),
        seed=_as_int(evaluation.get("seed", DEFAULT_SEED), "evaluation.seed"),
        include_irrelevant=_as_bool(
            evaluation.get("include_irrelevant", False), "evaluation.include_irrelevant"
        ),
        port=_as_int(service.get("port", DEFAULT_PORT), "service.port"),
        sparql_endpoint=terminology.get("sparql_endpoint"),
    )
    return config
