"""Cluster profile registry.

A :class:`ClusterProfile` captures the per-machine facts that make launch
scripts non-portable: which scheduler runs the cluster, which launcher its
users reach for, how many GPUs a node carries, and whether the scheduler
exports the submitting shell's environment to all allocated nodes.

Profiles are data, not code.  The default bundle (``data/clusters.json``)
ships nine production machines; new clusters are added by editing the JSON
document, never by touching this module.  A loaded :class:`ProfileSet` is
immutable and safe to share between threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import IO, Iterator

from .errors import ProfileParseError, RegistryConflictError, UnknownClusterError
from .types import Launcher, ModuleSystem, PythonEnv, Scheduler

_REQUIRED_FIELDS = (
    "id",
    "scheduler",
    "default_launcher",
    "gpus_per_node",
    "gpu_type",
    "env_propagation",
    "module_system",
    "python_env",
    "max_walltime_minutes",
)


@dataclass(frozen=True)
class ClusterProfile:
    """Immutable description of one cluster."""

    id: str
    aliases: tuple[str, ...]
    scheduler: Scheduler
    default_launcher: Launcher
    gpus_per_node: int
    gpu_type: str
    env_propagation: bool
    module_system: ModuleSystem
    python_env: PythonEnv
    max_walltime_minutes: int
    known_faults: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.gpus_per_node < 1:
            raise ProfileParseError(
                f"gpus_per_node must be >= 1, got {self.gpus_per_node}", field="gpus_per_node"
            )
        if self.max_walltime_minutes < 1:
            raise ProfileParseError(
                f"max_walltime_minutes must be >= 1, got {self.max_walltime_minutes}",
                field="max_walltime_minutes",
            )


class ProfileSet:
    """Read-only collection of profiles keyed by id, resolvable by alias."""

    def __init__(self, profiles: list[ClusterProfile]):
        by_id: dict[str, ClusterProfile] = {}
        by_name: dict[str, ClusterProfile] = {}
        for profile in profiles:
            for name in (profile.id, *profile.aliases):
                key = name.lower()
                if key in by_name:
                    raise RegistryConflictError(name, by_name[key].id, profile.id)
                by_name[key] = profile
            by_id[profile.id] = profile
        self._by_id = by_id
        self._by_name = by_name

    def __len__(self) -> int:
        return len(self._by_id)

    def __iter__(self) -> Iterator[ClusterProfile]:
        return iter(self._by_id.values())

    def __contains__(self, cluster_id: str) -> bool:
        return cluster_id in self._by_id

    def ids(self) -> list[str]:
        return list(self._by_id)

    def resolve(self, name: str) -> ClusterProfile:
        """Return the profile whose id or alias matches ``name``.

        Matching is case-insensitive and exact; prefixes are not completed.
        Raises :class:`UnknownClusterError` listing the valid ids otherwise.
        """
        profile = self._by_name.get(name.strip().lower())
        if profile is None:
            raise UnknownClusterError(name, self.ids())
        return profile


def _parse_record(record: dict, index: int) -> ClusterProfile:
    if not isinstance(record, dict):
        raise ProfileParseError("profile record must be an object", record=index)
    for name in _REQUIRED_FIELDS:
        if name not in record:
            raise ProfileParseError("missing field", record=index, field=name)
    try:
        return ClusterProfile(
            id=str(record["id"]).lower(),
            aliases=tuple(str(a).lower() for a in record.get("aliases", [])),
            scheduler=Scheduler(record["scheduler"]),
            default_launcher=Launcher(record["default_launcher"]),
            gpus_per_node=int(record["gpus_per_node"]),
            gpu_type=str(record["gpu_type"]),
            env_propagation=bool(record["env_propagation"]),
            module_system=ModuleSystem(record["module_system"]),
            python_env=PythonEnv(record["python_env"]),
            max_walltime_minutes=int(record["max_walltime_minutes"]),
            known_faults=tuple(str(f) for f in record.get("known_faults", [])),
        )
    except (ValueError, TypeError) as exc:
        raise ProfileParseError(str(exc), record=index) from exc


def load_profiles(source: str | Path | IO[str]) -> ProfileSet:
    """Load a profile document (JSON array of profile records).

    ``source`` may be a filesystem path, an open text stream, or a string
    containing the JSON document itself.
    """
    text = _read_source(source)
    try:
        records = json.loads(text) if text.strip() else []
    except json.JSONDecodeError as exc:
        raise ProfileParseError(f"invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(records, list):
        raise ProfileParseError("profile document must be a JSON array")
    return ProfileSet([_parse_record(rec, i) for i, rec in enumerate(records)])


def default_profiles() -> ProfileSet:
    """Load the bundled nine-cluster profile set."""
    data = resources.files("launchport.data").joinpath("clusters.json").read_text("utf-8")
    return load_profiles(data)


def _read_source(source: str | Path | IO[str]) -> str:
    if hasattr(source, "read"):
        return source.read()  # type: ignore[union-attr]
    if isinstance(source, Path):
        return source.read_text("utf-8")
    text = str(source)
    stripped = text.lstrip()
    if stripped.startswith("[") or stripped.startswith("{") or not stripped:
        return text
    return Path(text).read_text("utf-8")
