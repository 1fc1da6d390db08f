"""Line-based `key = value` run configuration with fixed sections.

Sections are [dataset] [score] [select] [combine] [augment] [eval]; unknown
sections or keys are a hard error so config drift cannot pass silently.
Values keep their declared types; booleans are true/false.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path


class RunConfigError(ValueError):
    pass


_SCHEMA: dict[str, dict[str, type]] = {
    "dataset": {
        "classes": int,
        "per_class": int,
        "test_per_class": int,
        "side": int,
        "seed": int,
    },
    "score": {
        "epochs": int,
        "batch_size": int,
        "learning_rate": float,
        "early_window": int,
        "hidden_dim": int,
    },
    "select": {
        "metric": str,
        "direction": str,
        "balanced": bool,
        "tie_break": str,
    },
    "combine": {
        "grid": int,
        "cell_side": int,
        "ipc_out": int,
    },
    "augment": {
        "patch_mode": str,
        "crop": bool,
        "crop_min": float,
        "crop_max": float,
        "aspect_min": float,
        "aspect_max": float,
        "flip_prob": float,
        "mix": str,
        "mix_probability": float,
        "label_mixing": bool,
        "cutout_fraction": float,
    },
    "eval": {
        "epochs": int,
        "batch_size": int,
        "learning_rate": float,
        "hidden_dim": int,
    },
}

DEFAULTS: dict[str, dict] = {
    "dataset": {"classes": 10, "per_class": 200, "test_per_class": 100, "side": 32, "seed": 7},
    "score": {
        "epochs": 30,
        "batch_size": 64,
        "learning_rate": 0.05,
        "early_window": 10,
        "hidden_dim": 64,
    },
    "select": {"metric": "el2n", "direction": "easy", "balanced": True, "tie_break": "sample_id"},
    "combine": {"grid": 2, "cell_side": 16, "ipc_out": 2},
    "augment": {
        "patch_mode": "extract",
        "crop": True,
        "crop_min": 0.08,
        "crop_max": 1.0,
        "aspect_min": 0.75,
        "aspect_max": 4.0 / 3.0,
        "flip_prob": 0.5,
        "mix": "none",
        "mix_probability": 0.0,
        "label_mixing": False,
        "cutout_fraction": 0.5,
    },
    "eval": {"epochs": 60, "batch_size": 32, "learning_rate": 0.05, "hidden_dim": 64},
}


@dataclass(frozen=True)
class RunConfig:
    sections: dict

    def __getitem__(self, section: str) -> dict:
        return self.sections[section]

    def text(self) -> str:
        lines = []
        for section in _SCHEMA:
            lines.append(f"[{section}]")
            for key, value in self.sections[section].items():
                if isinstance(value, bool):
                    value = "true" if value else "false"
                elif isinstance(value, float):
                    value = f"{value:g}"
                lines.append(f"{key} = {value}")
            lines.append("")
        return "\n".join(lines)


def default_run_config() -> RunConfig:
    return RunConfig({s: dict(v) for s, v in DEFAULTS.items()})


def _parse_value(raw: str, kind: type, where: str):
    if kind is bool:
        if raw not in ("true", "false"):
            raise RunConfigError(f"{where}: boolean must be true or false, got {raw!r}")
        return raw == "true"
    try:
        return kind(raw)
    except ValueError:
        raise RunConfigError(f"{where}: cannot parse {raw!r} as {kind.__name__}") from None


def parse_run_config(text: str, source: str = "<config>") -> RunConfig:
    sections = {s: dict(v) for s, v in DEFAULTS.items()}
    current: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        where = f"{source}:{lineno}"
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if name not in _SCHEMA:
                raise RunConfigError(f"{where}: unknown section [{name}]")
            current = name
            continue
        if "=" not in line:
            raise RunConfigError(f"{where}: expected key = value, got {line!r}")
        if current is None:
            raise RunConfigError(f"{where}: key outside any section")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _SCHEMA[current]:
            raise RunConfigError(f"{where}: unknown key {key!r} in section [{current}]")
        sections[current][key] = _parse_value(value, _SCHEMA[current][key], where)
    return RunConfig(sections)


def load_run_config(path) -> RunConfig:
    p = Path(path)
    return parse_run_config(p.read_text(encoding="utf-8"), source=str(p))
