"""Run configuration: JSON file + dotted-path overrides, strictly validated.

Unknown keys are fatal so hyperparameter typos cannot silently no-op. The
effective config is echoed to the output directory on every run; re-running
from the echo reproduces the run.
"""

import json
import os
from dataclasses import asdict
from pathlib import Path

from .errors import ConfigError
from .model import ModelConfig
from .train import TrainConfig

ENV_OUT_DIR = "CPRN_OUT_DIR"


def default_config():
    return {
        "model": ModelConfig().to_dict(),
        "train": asdict(TrainConfig()),
        "data": {"manifest": None, "patch_size": 48, "eval_fraction": 0.2},
        "out_dir": None,
        "seed": 0,
    }


def _merge_strict(base, update, path=""):
    for key, value in update.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key: {where}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            _merge_strict(base[key], value, where)
        else:
            base[key] = value
    return base


def _parse_override(text):
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw  # bare strings like CPRN_S
    node = value
    for part in reversed(key.split(".")):
        node = {part: node}
    return node


def load_run_config(path=None, overrides=()):
    """Merge defaults <- config file <- overrides, then validate."""
    cfg = default_config()
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must be a JSON object")
        _merge_strict(cfg, data)
    for item in overrides:
        _merge_strict(cfg, _parse_override(item))

    model_section = dict(cfg["model"])
    if model_section.get("M") is None:
        model_section.pop("M", None)
    try:
        model_cfg = ModelConfig(**model_section)
    except TypeError as exc:
        raise ConfigError(f"bad model section: {exc}") from exc
    model_cfg.validate()
    cfg["model"] = model_cfg.to_dict()
    try:
        TrainConfig(**cfg["train"]).validate()
    except TypeError as exc:
        raise ConfigError(f"bad train section: {exc}") from exc
    data_sec = cfg["data"]
    if data_sec["patch_size"] % cfg["model"]["scale"] != 0:
        raise ConfigError(
            f"patch size {data_sec['patch_size']} must be divisible by scale {cfg['model']['scale']}"
        )
    return cfg


def model_config_from(cfg):
    return ModelConfig(**cfg["model"])


def train_config_from(cfg):
    return TrainConfig(**cfg["train"])


def resolve_out_dir(cfg):
    out = cfg.get("out_dir") or os.environ.get(ENV_OUT_DIR) or "runs"
    return Path(out)


def echo_config(cfg, out_dir):
    """Write the effective config next to the run artifacts."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(
        json.dumps(cfg, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
