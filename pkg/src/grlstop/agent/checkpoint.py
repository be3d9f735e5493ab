"""Checkpoint container.

Layout::

    GRLSTOP-CHECKPOINT <version>\\n
    <one-line JSON header>\\n
    <float64 little-endian arrays, in PARAM_NAMES order>

The header records array names and shapes, the trainer and environment
configs and free-form metadata (rollout/step counters).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..environment import EnvConfig
from .policy import PARAM_NAMES, PolicyNetwork
from .ppo import TrainerConfig

MAGIC = b"GRLSTOP-CHECKPOINT"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class PolicyCheckpoint:
    policy: PolicyNetwork
    trainer_config: TrainerConfig
    env_config: EnvConfig
    meta: dict = field(default_factory=dict)

    def header(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "obs_dim": self.policy.obs_dim,
            "hidden": self.policy.hidden,
            "arrays": [[k, list(self.policy.params[k].shape)] for k in PARAM_NAMES],
            "trainer_config": self.trainer_config.to_dict(),
            "env_config": self.env_config.to_dict(),
            "meta": self.meta,
        }

    def check_env(self, cfg: EnvConfig) -> None:
        if cfg.B != self.env_config.B:
            raise CheckpointError(
                f"checkpoint was trained with B={self.env_config.B} "
                f"(observation length {self.policy.obs_dim}); cannot apply to B={cfg.B}"
            )


def save_checkpoint(path, ckpt: PolicyCheckpoint) -> None:
    header = json.dumps(ckpt.header(), sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC + b" " + str(FORMAT_VERSION).encode() + b"\n")
        fh.write(header + b"\n")
        for k in PARAM_NAMES:
            fh.write(np.ascontiguousarray(ckpt.policy.params[k], dtype="<f8").tobytes())


def read_header(path) -> dict:
    with open(path, "rb") as fh:
        return _read_header(fh, path)


def _read_header(fh, path) -> dict:
    first = fh.readline()
    parts = first.rstrip(b"\n").split(b" ")
    if len(parts) != 2 or parts[0] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    try:
        version = int(parts[1])
    except ValueError:
        raise CheckpointError(f"{path}: unreadable format version {parts[1]!r}") from None
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: checkpoint format version {version}, this build reads version {FORMAT_VERSION}")
    line = fh.readline()
    if not line.endswith(b"\n"):
        raise CheckpointError(f"{path}: truncated header")
    try:
        return json.loads(line)
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: corrupt header ({exc})") from None


def load_checkpoint(path) -> PolicyCheckpoint:
    with open(path, "rb") as fh:
        header = _read_header(fh, path)
        params = {}
        for name, shape in header["arrays"]:
            count = int(np.prod(shape))
            raw = fh.read(8 * count)
            if len(raw) != 8 * count:
                raise CheckpointError(f"{path}: truncated while reading {name}")
            params[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).astype(np.float64)
        if fh.read(1):
            raise CheckpointError(f"{path}: trailing bytes after weights")
    if set(params) != set(PARAM_NAMES):
        raise CheckpointError(f"{path}: unexpected parameter set {sorted(params)}")
    policy = PolicyNetwork(header["obs_dim"], header["hidden"], params=params)
    return PolicyCheckpoint(
        policy,
        TrainerConfig.from_dict(header["trainer_config"]),
        EnvConfig.from_dict(header["env_config"]),
        header.get("meta", {}),
    )
