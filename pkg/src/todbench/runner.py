"""Concurrent execution of a corpus run: backend construction from a profile,
per-dialog sessions with exemplar chaining, and the run manifest."""

from __future__ import annotations

import dataclasses
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .backends import Backend, HttpBackendConfig, HttpChatBackend, ReplayBackend
from .config import RunConfig, config_fingerprint
from .corpus import Corpus, CorpusItem
from .errors import BackendError, ConfigError, ExemplarGenerationFailed
from .oracle import build_oracle_backend
from .prompts import TEMPLATE_VERSION, ExemplarCache, choose_source_seed, generate_exemplar
from .session import (
    REPLAY,
    SearchProvider,
    SessionBackendError,
    SessionOptions,
    run_session,
)
from .transcript import DialogTranscript

EXEMPLAR_SOURCE_CHAINED = "chained"
EXEMPLAR_SOURCE_FALLBACK = "source-dialog-fallback"


@dataclass
class DialogOutcome:
    dialog_id: str
    status: str
    exemplar_source: str
    error: str = ""
    transcript: Optional[DialogTranscript] = None


def build_backend(config: RunConfig, corpus: Corpus) -> Backend:
    profile = config.backend_profile()
    if profile.kind == "oracle":
        return build_oracle_backend(corpus)
    if profile.kind == "replay":
        if not profile.script_path:
            raise ConfigError(f"profile {profile.name!r}: replay profiles "
                              "need script_path")
        with open(profile.script_path, "r", encoding="utf-8") as handle:
            sequences = json.load(handle)
        return ReplayBackend.from_sequences(sequences,
                                            model_id=profile.model_id or "replay")
    return HttpChatBackend(HttpBackendConfig(
        endpoint=profile.endpoint, model_id=profile.model_id,
        api_key_env=profile.api_key_env, timeout_ms=profile.timeout_ms,
        max_concurrency=profile.max_concurrency))


def _session_options(config: RunConfig) -> SessionOptions:
    return SessionOptions(max_feedback_retries=config.max_feedback_retries,
                          turn_cap=config.turn_cap,
                          no_feedback=config.no_feedback,
                          no_chain=config.no_chain)


def _run_one(item: CorpusItem, corpus: Corpus, backend: Backend,
             config: RunConfig, cache: ExemplarCache,
             fingerprint: str) -> DialogOutcome:
    schemas = [corpus.registry.get(domain) for domain in item.domains]
    seed_schema, seed_dialog = choose_source_seed(corpus.seeds, schemas)
    exemplar_source = EXEMPLAR_SOURCE_CHAINED
    if config.no_chain:
        exemplar = seed_dialog
        exemplar_source = EXEMPLAR_SOURCE_FALLBACK
    else:
        try:
            exemplar = generate_exemplar(backend, seed_schema, seed_dialog,
                                         schemas, cache=cache)
        except ExemplarGenerationFailed as exc:
            if not config.chain_fallback:
                return DialogOutcome(dialog_id=item.dialog_id,
                                     status="exemplar_failed",
                                     exemplar_source=EXEMPLAR_SOURCE_CHAINED,
                                     error=str(exc))
            exemplar = seed_dialog
            exemplar_source = EXEMPLAR_SOURCE_FALLBACK
        except BackendError as exc:
            return DialogOutcome(dialog_id=item.dialog_id,
                                 status="backend_error",
                                 exemplar_source=EXEMPLAR_SOURCE_CHAINED,
                                 error=str(exc))
    provider = SearchProvider(registry=corpus.registry, mode=REPLAY,
                              replay_results=item.replay_results)
    options = _session_options(config)
    if exemplar_source == EXEMPLAR_SOURCE_FALLBACK:
        options = dataclasses.replace(options, no_chain=True)
    try:
        transcript = run_session(item.goal, corpus.registry, backend, exemplar,
                                 provider, options, dialog_id=item.dialog_id,
                                 config_fingerprint=fingerprint)
        return DialogOutcome(dialog_id=item.dialog_id, status=transcript.status,
                             exemplar_source=exemplar_source,
                             transcript=transcript)
    except SessionBackendError as exc:
        return DialogOutcome(dialog_id=item.dialog_id, status="backend_error",
                             exemplar_source=exemplar_source, error=str(exc),
                             transcript=exc.transcript)


def run_corpus(config: RunConfig, corpus: Corpus,
               backend: Optional[Backend] = None,
               cache: Optional[ExemplarCache] = None
               ) -> tuple[list[DialogOutcome], dict]:
    """Run every corpus item, up to config.concurrency sessions at a time.
    Outcomes come back in corpus order regardless of completion order."""
    backend = backend or build_backend(config, corpus)
    cache = cache or ExemplarCache()
    fingerprint = config_fingerprint(config, corpus.digest)
    with ThreadPoolExecutor(max_workers=config.concurrency) as executor:
        futures = [executor.submit(_run_one, item, corpus, backend, config,
                                   cache, fingerprint)
                   for item in corpus.items]
        outcomes = [future.result() for future in futures]
    manifest = {
        "config_fingerprint": fingerprint,
        "template_version": TEMPLATE_VERSION,
        "corpus_digest": corpus.digest,
        "backend": {"profile": config.profile,
                    "model_id": getattr(backend, "model_id", "")},
        "seed": config.seed,
        "config": config.to_document(),
        "dialogs": [
            {"dialog_id": o.dialog_id, "status": o.status,
             "exemplar_source": o.exemplar_source, "error": o.error}
            for o in outcomes
        ],
    }
    return outcomes, manifest


def write_run_outputs(outcomes: list[DialogOutcome], manifest: dict,
                      out_dir: Path) -> tuple[Path, Path]:
    from .transcript import write_transcripts

    out_dir.mkdir(parents=True, exist_ok=True)
    transcripts_path = out_dir / "transcripts.jsonl"
    manifest_path = out_dir / "manifest.json"
    write_transcripts(transcripts_path,
                      [o.transcript for o in outcomes if o.transcript])
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                             encoding="utf-8")
    return transcripts_path, manifest_path
