"""Model artifact file: a key=value text header followed by little-endian float64 arrays.

Layout::

    SAPSOM-MODEL
    version=1
    rows=16
    ...
    payload_sha256=<hex>
    END
    <codebook N*D doubles><transition K*N*N doubles>

The header carries no timestamps, so identical models serialize to identical bytes.
"""
from __future__ import annotations

import hashlib
import os
from dataclasses import asdict, dataclass, fields

import numpy as np

from .agent import Agent, TrainingConfig
from .cartpole import EnvParams
from .som import MapGeometry, SomMap
from .transition import TransitionModel

MAGIC = "SAPSOM-MODEL"
FORMAT_VERSION = 1
_END = "END"


class ArtifactError(Exception):
    pass


class VersionError(ArtifactError):
    pass


class CorruptArtifactError(ArtifactError):
    pass


class ArtifactWriteError(ArtifactError, OSError):
    pass


@dataclass
class ModelArtifact:
    som: SomMap
    model: TransitionModel
    training: TrainingConfig
    env: EnvParams

    @classmethod
    def from_agent(cls, agent: Agent, env: EnvParams) -> "ModelArtifact":
        return cls(agent.som, agent.model, agent.config, env)

    def to_agent(self) -> Agent:
        return Agent(self.som.copy(), self.model.copy(), self.training)

    @property
    def seed(self) -> int:
        return self.training.seed


def _fmt(value) -> str:
    # repr round-trips floats exactly
    return repr(value) if isinstance(value, float) else str(value)


def to_bytes(artifact: ModelArtifact) -> bytes:
    payload = (
        artifact.som.codebook.astype("<f8").tobytes()
        + artifact.model.matrices.astype("<f8").tobytes()
    )
    lines = [
        MAGIC,
        f"version={FORMAT_VERSION}",
        f"rows={artifact.som.geometry.rows}",
        f"cols={artifact.som.geometry.cols}",
        f"input_dim={artifact.som.dim}",
        f"n_actions={artifact.model.n_actions}",
    ]
    lines += [f"train.{k}={_fmt(v)}" for k, v in asdict(artifact.training).items()]
    lines += [f"env.{k}={_fmt(v)}" for k, v in asdict(artifact.env).items()]
    lines += [f"payload_bytes={len(payload)}", f"payload_sha256={hashlib.sha256(payload).hexdigest()}", _END]
    return ("\n".join(lines) + "\n").encode("ascii") + payload


def save_model(artifact: ModelArtifact, path) -> None:
    data = to_bytes(artifact)
    tmp = f"{path}.tmp"
    try:
        with open(tmp, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except OSError as exc:
        raise ArtifactWriteError(f"cannot write model to {path}: {exc}") from exc


def _typed(cls, raw: dict):
    out = {}
    for f in fields(cls):
        if f.name not in raw:
            raise CorruptArtifactError(f"header is missing {cls.__name__}.{f.name}")
        text = raw[f.name]
        out[f.name] = int(text) if f.type in ("int", int) else float(text)
    return cls(**out)


def from_bytes(data: bytes) -> ModelArtifact:
    marker = f"\n{_END}\n".encode("ascii")
    end = data.find(marker)
    if not data.startswith(MAGIC.encode("ascii")) or end < 0:
        raise CorruptArtifactError("not a model artifact (missing magic line or header terminator)")
    header_lines = data[:end].decode("ascii").splitlines()[1:]
    payload = data[end + len(marker):]
    try:
        header = dict(line.split("=", 1) for line in header_lines)
    except ValueError as exc:
        raise CorruptArtifactError("malformed header line") from exc

    version = header.get("version")
    if version != str(FORMAT_VERSION):
        raise VersionError(f"unsupported artifact version {version!r}, expected {FORMAT_VERSION}")

    try:
        rows, cols = int(header["rows"]), int(header["cols"])
        dim, k = int(header["input_dim"]), int(header["n_actions"])
        expected_len = int(header["payload_bytes"])
        digest = header["payload_sha256"]
    except (KeyError, ValueError) as exc:
        raise CorruptArtifactError(f"bad header: {exc}") from exc
    n = rows * cols
    if len(payload) != expected_len or expected_len != 8 * (n * dim + k * n * n):
        raise CorruptArtifactError(f"payload is {len(payload)} bytes, expected {expected_len}")
    if hashlib.sha256(payload).hexdigest() != digest:
        raise CorruptArtifactError("payload checksum mismatch")

    values = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    codebook = values[: n * dim].reshape(n, dim)
    matrices = values[n * dim:].reshape(k, n, n)
    prefixed = lambda p: {key[len(p):]: v for key, v in header.items() if key.startswith(p)}
    try:
        training = _typed(TrainingConfig, prefixed("train."))
        env = _typed(EnvParams, prefixed("env."))
    except ValueError as exc:
        raise CorruptArtifactError(f"bad config value in header: {exc}") from exc
    return ModelArtifact(SomMap(MapGeometry(rows, cols), codebook), TransitionModel(matrices), training, env)


def load_model(path) -> ModelArtifact:
    with open(path, "rb") as fh:
        return from_bytes(fh.read())


def artifact_digest(artifact: ModelArtifact) -> str:
    return hashlib.sha256(to_bytes(artifact)).hexdigest()
