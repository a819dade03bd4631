"""Bundled experiment presets and sweep grids.

Loads preset definitions from YAML and provides lookup by name.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from transport_filter.core.exceptions import ConfigError
from transport_filter.core.models import ExperimentConfig, SweepGrid


@dataclass
class PresetDefinition:
    """A named experiment configuration."""

    name: str
    description: str | None = None
    experiment: dict[str, Any] = field(default_factory=dict)
    sweep: str | None = None

    @classmethod
    def from_dict(cls, name: str, data: dict[str, Any]) -> PresetDefinition:
        """Create from dictionary (YAML data)."""
        return cls(
            name=name,
            description=data.get("description"),
            experiment={"name": name, **data.get("experiment", {})},
            sweep=data.get("sweep"),
        )

    def config(self) -> ExperimentConfig:
        return ExperimentConfig.from_dict(self.experiment)


class PresetRegistry:
    """Registry of experiment presets loaded from YAML."""

    def __init__(self, presets_path: Path | str | None = None):
        if presets_path is None:
            presets_path = Path(__file__).parent.parent / "data" / "presets.yaml"

        self._presets_path = Path(presets_path)
        self._presets: dict[str, PresetDefinition] = {}
        self._sweeps: dict[str, dict[str, Any]] = {}
        self._load()

    def _load(self) -> None:
        if not self._presets_path.exists():
            raise FileNotFoundError(f"Presets file not found: {self._presets_path}")

        with open(self._presets_path) as f:
            data = yaml.safe_load(f) or {}

        for name, preset_data in data.get("presets", {}).items():
            self._presets[name] = PresetDefinition.from_dict(name, preset_data)
        self._sweeps = dict(data.get("sweeps", {}))

    def get(self, name: str) -> PresetDefinition:
        try:
            return self._presets[name]
        except KeyError:
            known = ", ".join(sorted(self._presets))
            raise ConfigError(f"unknown preset {name!r} (known: {known})") from None

    def all_presets(self) -> list[PresetDefinition]:
        return list(self._presets.values())

    def sweep_grid(self, name: str = "default") -> SweepGrid:
        if name not in self._sweeps:
            raise ConfigError(f"unknown sweep grid {name!r}")
        return SweepGrid.model_validate(self._sweeps[name])

    def __len__(self) -> int:
        return len(self._presets)

    def __repr__(self) -> str:
        return f"PresetRegistry({len(self._presets)} presets, {len(self._sweeps)} sweeps)"


def load_preset(name: str) -> ExperimentConfig:
    """Validated config of a bundled preset."""
    return PresetRegistry().get(name).config()


def load_sweep_grid(name: str = "default") -> SweepGrid:
    return PresetRegistry().sweep_grid(name)
