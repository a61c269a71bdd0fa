"""HTTP surface: POST /embed, POST /generate, GET /health.

All bodies are JSON (UTF-8). Status codes: 400 for invalid input, 503 while
a model is still loading, 500 on inference failure. Responses conform to
the JSON Schemas shipped in schemas/.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass

from fastapi import FastAPI
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .backends import (
    BackendNotReady,
    EmbeddingBackend,
    GeneratorBackend,
    make_embedding_backend,
    make_generator_backend,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ServerConfig:
    embed_backend: str = "hash"
    embed_model: str | None = None
    generator_backend: str = "extractive"
    generator_model: str | None = None
    max_text_chars: int = 8192
    max_batch: int = 256
    default_max_tokens: int = 256

    @classmethod
    def from_env(cls) -> "ServerConfig":
        env = os.environ
        return cls(
            embed_backend=env.get("MODEL_SERVER_EMBED_BACKEND", "hash"),
            embed_model=env.get("MODEL_SERVER_EMBED_MODEL"),
            generator_backend=env.get("MODEL_SERVER_GENERATOR_BACKEND", "extractive"),
            generator_model=env.get("MODEL_SERVER_GENERATOR_MODEL"),
            max_text_chars=int(env.get("MODEL_SERVER_MAX_TEXT_CHARS", "8192")),
            max_batch=int(env.get("MODEL_SERVER_MAX_BATCH", "256")),
            default_max_tokens=int(env.get("MODEL_SERVER_DEFAULT_MAX_TOKENS", "256")),
        )


class EmbedRequest(BaseModel):
    texts: list[str] = Field(min_length=1)


class GenerateRequest(BaseModel):
    prompt: str = Field(min_length=1)
    max_tokens: int | None = Field(default=None, ge=1)
    temperature: float = Field(default=0.0, ge=0.0)
    seed: int | None = None


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message})


def create_app(
    config: ServerConfig | None = None,
    embedder: EmbeddingBackend | None = None,
    generator: GeneratorBackend | None = None,
) -> FastAPI:
    config = config or ServerConfig.from_env()
    embedder = embedder or make_embedding_backend(config.embed_backend, config.embed_model)
    generator = generator or make_generator_backend(
        config.generator_backend, config.generator_model
    )
    app = FastAPI(title="augrag model server")
    app.state.config = config
    app.state.embedder = embedder
    app.state.generator = generator

    @app.exception_handler(RequestValidationError)
    def invalid_request(_, exc: RequestValidationError):
        # protocol contract: malformed input is 400, not FastAPI's default 422
        return _error(400, f"invalid request: {exc.errors()[0].get('msg', 'bad input')}")

    @app.get("/health")
    def health():
        loading = []
        for backend in (embedder, generator):
            try:
                if not backend.ready:
                    loading.append(backend.name)
            except RuntimeError as e:
                logger.error("backend failed: %s", e)
                loading.append(backend.name)
        return {
            "status": "loading" if loading else "ok",
            "models": [embedder.name, generator.name],
        }

    @app.post("/embed")
    def embed(req: EmbedRequest):
        if len(req.texts) > config.max_batch:
            return _error(400, f"batch larger than {config.max_batch}")
        for i, text in enumerate(req.texts):
            if len(text) > config.max_text_chars:
                return _error(400, f"text {i} exceeds {config.max_text_chars} characters")
        try:
            if not embedder.ready:
                return _error(503, "embedding model loading")
            vectors = embedder.encode(req.texts)
        except BackendNotReady:
            return _error(503, "embedding model loading")
        except Exception as e:  # noqa: BLE001 - inference failure contract
            logger.exception("embedding failed")
            return _error(500, f"embedding failed: {e}")
        return {"vectors": vectors, "dim": embedder.dim, "model": embedder.name}

    @app.post("/generate")
    def generate(req: GenerateRequest):
        if len(req.prompt) > config.max_text_chars:
            return _error(400, f"prompt exceeds {config.max_text_chars} characters")
        max_tokens = req.max_tokens or config.default_max_tokens
        try:
            if not generator.ready:
                return _error(503, "generator model loading")
            text = generator.generate(req.prompt, max_tokens, req.temperature, req.seed)
        except BackendNotReady:
            return _error(503, "generator model loading")
        except Exception as e:  # noqa: BLE001
            logger.exception("generation failed")
            return _error(500, f"generation failed: {e}")
        return {"text": text, "model": generator.name}

    return app
