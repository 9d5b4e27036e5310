"""Run configuration: a small TOML document with typed top-level keys, named
backend profiles, and an environment-variable override layer
(TODBENCH_<KEY> overrides the matching top-level key).

The manifest fingerprint hashes the effective config together with the
prompt template version and the corpus digest, so it changes exactly when
one of those changes.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .errors import ConfigError
from .prompts import TEMPLATE_VERSION

ENV_PREFIX = "TODBENCH_"

_PROFILE_KINDS = ("oracle", "http", "replay")


@dataclass(frozen=True)
class BackendProfile:
    name: str
    kind: str
    endpoint: str = ""
    model_id: str = ""
    api_key_env: str = ""
    timeout_ms: int = 60_000
    max_concurrency: int = 4
    script_path: str = ""  # replay profiles: JSON {session_id: [completions]}


@dataclass(frozen=True)
class RunConfig:
    corpus: str = "corpus/fixture"
    profile: str = "oracle"
    out: str = "out"
    seed: int = 0
    no_feedback: bool = False
    no_chain: bool = False
    chain_fallback: bool = False
    max_feedback_retries: int = 3
    turn_cap: int = 40
    concurrency: int = 4
    fuzzy_threshold: float = 0.8
    profiles: dict = field(default_factory=dict)

    def backend_profile(self) -> BackendProfile:
        if self.profile not in self.profiles:
            raise ConfigError(f"profile {self.profile!r} is not defined")
        return self.profiles[self.profile]

    def to_document(self) -> dict:
        doc = {
            "corpus": self.corpus, "profile": self.profile, "out": self.out,
            "seed": self.seed, "no_feedback": self.no_feedback,
            "no_chain": self.no_chain, "chain_fallback": self.chain_fallback,
            "max_feedback_retries": self.max_feedback_retries,
            "turn_cap": self.turn_cap, "concurrency": self.concurrency,
            "fuzzy_threshold": self.fuzzy_threshold,
            "profiles": {
                name: {"kind": p.kind, "endpoint": p.endpoint,
                       "model_id": p.model_id, "api_key_env": p.api_key_env,
                       "timeout_ms": p.timeout_ms,
                       "max_concurrency": p.max_concurrency,
                       "script_path": p.script_path}
                for name, p in sorted(self.profiles.items())
            },
        }
        return doc


_TOP_LEVEL_TYPES = {
    "corpus": str, "profile": str, "out": str, "seed": int,
    "no_feedback": bool, "no_chain": bool, "chain_fallback": bool,
    "max_feedback_retries": int, "turn_cap": int, "concurrency": int,
    "fuzzy_threshold": float,
}

_RANGES = {
    "max_feedback_retries": (0, 10),
    "turn_cap": (4, 500),
    "concurrency": (1, 64),
    "fuzzy_threshold": (0.0, 1.0),
}

_PROFILE_TYPES = {
    "kind": str, "endpoint": str, "model_id": str, "api_key_env": str,
    "timeout_ms": int, "max_concurrency": int, "script_path": str,
}


def _coerce(key: str, raw: str):
    want = _TOP_LEVEL_TYPES[key]
    if want is bool:
        if raw.lower() in ("1", "true", "yes"):
            return True
        if raw.lower() in ("0", "false", "no"):
            return False
        raise ConfigError(f"{ENV_PREFIX}{key.upper()}: not a boolean: {raw!r}")
    try:
        return want(raw)
    except ValueError as exc:
        raise ConfigError(f"{ENV_PREFIX}{key.upper()}: {exc}") from exc


def _check_ranges(values: dict) -> None:
    for key, (low, high) in _RANGES.items():
        value = values[key]
        if not low <= value <= high:
            raise ConfigError(f"{key}={value} outside [{low}, {high}]")


def _parse_profile(name: str, doc: dict) -> BackendProfile:
    unknown = sorted(set(doc) - set(_PROFILE_TYPES))
    if unknown:
        raise ConfigError(f"profile {name!r}: unknown keys {unknown}")
    kind = doc.get("kind", "")
    if kind not in _PROFILE_KINDS:
        raise ConfigError(f"profile {name!r}: kind must be one of "
                          f"{_PROFILE_KINDS}, got {kind!r}")
    for key, value in doc.items():
        if not isinstance(value, _PROFILE_TYPES[key]):
            raise ConfigError(f"profile {name!r}: {key} must be "
                              f"{_PROFILE_TYPES[key].__name__}")
    if kind == "http" and not doc.get("endpoint"):
        raise ConfigError(f"profile {name!r}: http profiles need an endpoint")
    return BackendProfile(name=name, **doc)


def load_config(path: Optional[str] = None,
                overrides: Optional[dict] = None,
                environ: Optional[dict] = None) -> RunConfig:
    """Load TOML config, apply TODBENCH_* environment overrides, then any
    explicit overrides (CLI flags). Unknown keys are rejected."""
    document: dict = {}
    if path is not None:
        with open(path, "rb") as handle:
            try:
                document = tomllib.load(handle)
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"{path}: invalid TOML: {exc}") from exc

    profile_docs = document.pop("profiles", {})
    if not isinstance(profile_docs, dict):
        raise ConfigError("profiles must be a table of profile tables")
    unknown = sorted(set(document) - set(_TOP_LEVEL_TYPES))
    if unknown:
        raise ConfigError(f"unknown config keys {unknown}")

    values = {key: document[key] for key in document}
    environ = os.environ if environ is None else environ
    for key in _TOP_LEVEL_TYPES:
        env_value = environ.get(ENV_PREFIX + key.upper())
        if env_value is not None:
            values[key] = _coerce(key, env_value)
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value

    defaults = RunConfig()
    merged = {key: values.get(key, getattr(defaults, key))
              for key in _TOP_LEVEL_TYPES}
    for key, want in _TOP_LEVEL_TYPES.items():
        value = merged[key]
        if want is float and isinstance(value, int) and not isinstance(value, bool):
            merged[key] = value = float(value)
        if not isinstance(value, want) or (want is not bool and isinstance(value, bool)):
            raise ConfigError(f"{key} must be {want.__name__}")
    _check_ranges(merged)

    profiles = {"oracle": BackendProfile(name="oracle", kind="oracle")}
    for name, doc in profile_docs.items():
        if not isinstance(doc, dict):
            raise ConfigError(f"profile {name!r} must be a table")
        profiles[name] = _parse_profile(name, doc)
    return RunConfig(profiles=profiles, **merged)


def config_fingerprint(config: RunConfig, corpus_digest: str,
                       template_version: str = TEMPLATE_VERSION) -> str:
    payload = {
        "config": config.to_document(),
        "template_version": template_version,
        "corpus_digest": corpus_digest,
    }
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def ensure_out_dir(config: RunConfig) -> Path:
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    return out
