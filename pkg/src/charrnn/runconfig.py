"""Flat key=value run configuration with exhaustive unknown-key rejection.

The grammar: one `key = value` per line, blank lines and `#` comments
ignored. Every key has a declared type and default; unknown keys are errors
so experiment manifests stay diffable and typo-proof. `--override key=value`
applies on top of the file.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .bptt import LossSpec
from .schemes import SchemeId, TrainConfig


class ConfigError(ValueError):
    pass


def _opt(parse):
    return lambda s: None if s == "" else parse(s)


_BOOLS = {"true": True, "false": False, "1": True, "0": False}


@dataclass
class RunConfig:
    dataset: str = ""
    out_dir: str = "run"
    scheme: int = 1
    k1: int = 20
    k2: int = 100
    k3: int | None = None
    decay: str = "none"
    lanes: int = 64
    total_batches: int = 12_800
    learning_rate: float = 0.001
    clip: float = 50.0
    step_clip: float | None = None
    seed: int = 0
    precision: str = "f64"
    num_layers: int = 1
    hidden_size: int = 512
    dense_size: int = 1024
    leakiness: float = 0.01
    rotation: int | None = None
    test_len: int = 11_100
    eval_points: int = 40
    mode: str = "multinomial"
    bench_warmup: int = 5
    bench_iters: int = 20

    def train_config(self) -> TrainConfig:
        tc = TrainConfig(
            scheme=SchemeId(self.scheme), k1=self.k1, k2=self.k2,
            lanes=self.lanes, total_batches=self.total_batches,
            learning_rate=self.learning_rate, clip=self.clip,
            loss=LossSpec(k3=self.k3, decay=self.decay), seed=self.seed,
            precision=self.precision, step_clip=self.step_clip)
        tc.validate()
        return tc

    def model_config(self, vocab_size: int):
        from .model import ModelConfig
        mc = ModelConfig(vocab_size=vocab_size, num_layers=self.num_layers,
                         hidden_size=self.hidden_size, dense_size=self.dense_size,
                         leakiness=self.leakiness)
        mc.validate()
        return mc

    def resolved_rotation(self) -> int:
        if self.rotation is not None:
            return self.rotation
        from .numerics import Rng
        return int(Rng(self.seed).derive("rotation").raw_u64(1)[0])


_PARSERS = {
    "dataset": str, "out_dir": str, "decay": str, "precision": str, "mode": str,
    "scheme": int, "k1": int, "k2": int, "lanes": int, "total_batches": int,
    "seed": int, "num_layers": int, "hidden_size": int, "dense_size": int,
    "test_len": int, "eval_points": int, "bench_warmup": int, "bench_iters": int,
    "learning_rate": float, "clip": float, "leakiness": float,
    "k3": _opt(int), "rotation": _opt(int), "step_clip": _opt(float),
}
assert set(_PARSERS) == {f.name for f in fields(RunConfig)}


def parse_assignments(lines, source: str) -> dict:
    out = {}
    for ln, line in enumerate(lines, start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{ln}: expected 'key = value', got {line.strip()!r}")
        key, _, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _PARSERS:
            raise ConfigError(f"{source}:{ln}: unknown key {key!r}")
        try:
            out[key] = _PARSERS[key](value)
        except ValueError:
            raise ConfigError(f"{source}:{ln}: bad value {value!r} for {key}") from None
    return out


def load_run_config(path, overrides=()) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    values = parse_assignments(text.splitlines(), str(path))
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        values.update(parse_assignments([item], "--override"))
    cfg = RunConfig(**values)
    try:
        cfg.train_config()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def snapshot(cfg: RunConfig) -> str:
    """Resolved config as sorted key=value lines (written next to results)."""
    parts = []
    for f in sorted(fields(RunConfig), key=lambda f: f.name):
        val = getattr(cfg, f.name)
        parts.append(f"{f.name} = {'' if val is None else val}")
    return "\n".join(parts) + "\n"
