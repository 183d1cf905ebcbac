"""Pipeline configuration: one declarative file mapping onto the runtime objects."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .core import AgentRoleConfig, Role, SamplingParams
from .reader import ReadMode, ReaderConfig
from .web import Provider, SearchProviderConfig, SerpAdapter

DEFAULT_MAX_STEPS = 8
DEFAULT_MAX_ROUNDS = 4

_REQUIRED_ROLES = (Role.PLANNER, Role.SEARCHER, Role.READER)


class ConfigError(Exception):
    pass


@dataclass
class PipelineConfig:
    roles: dict[Role, AgentRoleConfig]
    reader: ReaderConfig = field(default_factory=ReaderConfig)
    search: SearchProviderConfig = field(default_factory=SearchProviderConfig)
    max_steps: int = DEFAULT_MAX_STEPS
    max_rounds: int = DEFAULT_MAX_ROUNDS
    fallback_enabled: bool = True

    def __post_init__(self) -> None:
        for role in _REQUIRED_ROLES:
            if role not in self.roles:
                raise ConfigError(f"missing required role config: {role.value}")
        if self.max_steps < 1 or self.max_rounds < 1:
            raise ConfigError("max_steps and max_rounds must be positive")


def _resolve_endpoint(endpoint: str, base_dir: Path) -> str:
    # Scripted endpoints name a script file; resolve it against the config dir.
    if endpoint.startswith("scripted:"):
        raw = endpoint[len("scripted:"):]
        if not Path(raw).is_absolute():
            return "scripted:" + str((base_dir / raw).resolve())
    return endpoint


def _parse_role(name: str, section: Mapping[str, Any], base_dir: Path) -> AgentRoleConfig:
    try:
        role = Role(name)
    except ValueError as exc:
        raise ConfigError(f"unknown role {name!r}") from exc
    if "endpoint" not in section:
        raise ConfigError(f"role {name!r} needs an endpoint")
    sampling = SamplingParams(
        temperature=float(section.get("temperature", SamplingParams.temperature)),
        max_output_tokens=int(section.get("max_output_tokens", SamplingParams.max_output_tokens)),
    )
    try:
        return AgentRoleConfig(
            role=role,
            model_id=str(section.get("model_id", "")),
            endpoint=_resolve_endpoint(str(section["endpoint"]), base_dir),
            sampling=sampling,
            api_key_env=str(section.get("api_key_env", "LLM_API_KEY")),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _parse_reader(section: Mapping[str, Any]) -> ReaderConfig:
    try:
        return ReaderConfig(
            max_chars=int(section.get("max_chars", ReaderConfig.max_chars)),
            mode=ReadMode(section.get("mode", ReadMode.FULL.value)),
            max_selected=int(section.get("max_selected", ReaderConfig.max_selected)),
        )
    except ValueError as exc:
        raise ConfigError(f"bad reader config: {exc}") from exc


def _parse_search(section: Mapping[str, Any], base_dir: Path) -> SearchProviderConfig:
    adapter = None
    if "adapter" in section:
        raw = section["adapter"]
        if not isinstance(raw, Mapping) or "endpoint" not in raw:
            raise ConfigError("search adapter needs at least an endpoint")
        adapter = SerpAdapter(
            endpoint=str(raw["endpoint"]),
            method=str(raw.get("method", "GET")),
            query_param=str(raw.get("query_param", "q")),
            results_path=str(raw.get("results_path", "organic")),
            url_key=str(raw.get("url_key", "link")),
            title_key=str(raw.get("title_key", "title")),
            snippet_key=str(raw.get("snippet_key", "snippet")),
            extra_params=tuple((str(k), str(v)) for k, v in (raw.get("extra_params") or {}).items()),
            api_key_param=raw.get("api_key_param"),
            api_key_header=raw.get("api_key_header"),
        )
    corpus_path = section.get("corpus")
    if corpus_path is not None:
        corpus_path = str(base_dir / corpus_path) if not Path(str(corpus_path)).is_absolute() else str(corpus_path)
    try:
        return SearchProviderConfig(
            provider=Provider(section.get("provider", Provider.MOCK.value)),
            top_k=int(section.get("top_k", SearchProviderConfig.top_k)),
            timeout_ms=int(section.get("timeout_ms", SearchProviderConfig.timeout_ms)),
            api_key_env=str(section.get("api_key_env", "SEARCH_API_KEY")),
            corpus_path=corpus_path,
            adapter=adapter,
        )
    except ValueError as exc:
        raise ConfigError(f"bad search config: {exc}") from exc


def load_config(path: str | Path) -> PipelineConfig:
    """Load a YAML (or JSON) pipeline config; relative paths resolve against the file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"unparseable config: {exc}") from exc
    if not isinstance(data, Mapping):
        raise ConfigError("config root must be a mapping")
    base_dir = path.parent

    roles_section = data.get("roles")
    if not isinstance(roles_section, Mapping):
        raise ConfigError("config needs a 'roles' mapping")
    roles: dict[Role, AgentRoleConfig] = {}
    for name, section in roles_section.items():
        if not isinstance(section, Mapping):
            raise ConfigError(f"role {name!r} section must be a mapping")
        parsed = _parse_role(str(name), section, base_dir)
        roles[parsed.role] = parsed
    return PipelineConfig(
        roles=roles,
        reader=_parse_reader(data.get("reader") or {}),
        search=_parse_search(data.get("search") or {}, base_dir),
        max_steps=int(data.get("max_steps", DEFAULT_MAX_STEPS)),
        max_rounds=int(data.get("max_rounds", DEFAULT_MAX_ROUNDS)),
        fallback_enabled=bool(data.get("fallback_enabled", True)),
    )
