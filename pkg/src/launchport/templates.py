"""Launch-script template repository.

A template is a verified script body with typed ``{name}`` placeholders and
matching metadata.  The repository is keyed by the four-tuple
``(cluster, framework, strategy, launcher)``; one cluster can legitimately
carry both a torchrun and an mpiexec variant of the same strategy.

Placeholder grammar: a single pair of braces around a lowercase identifier
(``[a-z][a-z0-9_]*``), no nesting, no escaping.  Shell constructs such as
``$VAR``, ``${VAR}``, and ``$(...)`` are not placeholders and pass through
substitution untouched, so template bodies may freely mix both notations.

``TemplateSet`` is an immutable value: :func:`add_template` returns a new set
and never mutates the input.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import IO, Iterator

from .errors import TemplateConflictError, TemplateInvalidError
from .types import Framework, Launcher, Strategy

# A placeholder is {name} not preceded by '$' (which would make it a shell
# parameter expansion like ${SLURM_PROCID}).
PLACEHOLDER_RE = re.compile(r"(?<!\$)\{([a-z][a-z0-9_]*)\}")

PARAM_KINDS = ("integer", "port", "path", "text")

TemplateKey = tuple[str, Framework, Strategy, Launcher]


def placeholders(body: str) -> list[str]:
    """Return placeholder names in ``body``, deduplicated, in first-occurrence order."""
    seen: list[str] = []
    for match in PLACEHOLDER_RE.finditer(body):
        name = match.group(1)
        if name not in seen:
            seen.append(name)
    return seen


@dataclass(frozen=True)
class ParamDecl:
    """Declaration of one template parameter."""

    name: str
    kind: str = "text"
    required: bool = True
    default: int | str | None = None


@dataclass(frozen=True)
class Template:
    """One launch-script template with its declared parameters."""

    id: str
    cluster: str
    framework: Framework
    strategy: Strategy
    launcher: Launcher
    body: str
    params: tuple[ParamDecl, ...]
    verified: bool = False
    notes: str = ""

    @property
    def key(self) -> TemplateKey:
        return (self.cluster, self.framework, self.strategy, self.launcher)

    def param(self, name: str) -> ParamDecl | None:
        for decl in self.params:
            if decl.name == name:
                return decl
        return None

    def required_params(self) -> list[str]:
        return [p.name for p in self.params if p.required]


def validate_template(t: Template) -> None:
    """Raise :class:`TemplateInvalidError` if ``t`` violates any invariant."""
    declared = {p.name for p in t.params}
    for decl in t.params:
        if decl.kind not in PARAM_KINDS:
            raise TemplateInvalidError(t.id, f"unknown param kind '{decl.kind}'")
    names = [p.name for p in t.params]
    if len(names) != len(set(names)):
        raise TemplateInvalidError(t.id, "duplicate param declarations")
    body_names = set(placeholders(t.body))
    for name in body_names:
        if name not in declared:
            raise TemplateInvalidError(t.id, f"undeclared placeholder '{{{name}}}'")
    for decl in t.params:
        if decl.required and decl.name not in body_names:
            raise TemplateInvalidError(
                t.id, f"required param '{decl.name}' does not appear in body"
            )


class TemplateSet:
    """Immutable collection of templates, unique by id and by key tuple."""

    def __init__(self, templates: list[Template]):
        by_id: dict[str, Template] = {}
        by_key: dict[TemplateKey, Template] = {}
        for t in templates:
            validate_template(t)
            if t.id in by_id:
                raise TemplateInvalidError(t.id, "duplicate template id")
            if t.key in by_key:
                raise TemplateConflictError(t.key, by_key[t.key].id, t.id)
            by_id[t.id] = t
            by_key[t.key] = t
        self._by_id = by_id
        self._by_key = by_key

    def __len__(self) -> int:
        return len(self._by_id)

    def __iter__(self) -> Iterator[Template]:
        return iter(self._by_id.values())

    def __contains__(self, template_id: str) -> bool:
        return template_id in self._by_id

    def get(self, template_id: str) -> Template:
        return self._by_id[template_id]

    def find_key(self, key: TemplateKey) -> Template | None:
        return self._by_key.get(key)

    def ids(self) -> list[str]:
        return list(self._by_id)


def add_template(tset: TemplateSet, t: Template) -> TemplateSet:
    """Return a new set extended with ``t``; the input set is unchanged."""
    validate_template(t)
    if t.id in tset:
        raise TemplateInvalidError(t.id, "duplicate template id")
    existing = tset.find_key(t.key)
    if existing is not None:
        raise TemplateConflictError(t.key, existing.id, t.id)
    return TemplateSet(list(tset) + [t])


def _parse_param(raw: dict, template_id: str) -> ParamDecl:
    if "name" not in raw:
        raise TemplateInvalidError(template_id, "param record missing 'name'")
    return ParamDecl(
        name=str(raw["name"]),
        kind=str(raw.get("kind", "text")),
        required=bool(raw.get("required", True)),
        default=raw.get("default"),
    )


def _parse_record(raw: dict, index: int) -> Template:
    if not isinstance(raw, dict):
        raise TemplateInvalidError(f"#{index}", "template record must be an object")
    try:
        template_id = str(raw["id"])
        return Template(
            id=template_id,
            cluster=str(raw["cluster"]).lower(),
            framework=Framework(raw["framework"]),
            strategy=Strategy(raw["strategy"]),
            launcher=Launcher(raw["launcher"]),
            body=str(raw["body"]),
            params=tuple(_parse_param(p, template_id) for p in raw.get("params", [])),
            verified=bool(raw.get("verified", False)),
            notes=str(raw.get("notes", "")),
        )
    except KeyError as exc:
        raise TemplateInvalidError(f"#{index}", f"missing field {exc}") from exc
    except ValueError as exc:
        raise TemplateInvalidError(raw.get("id", f"#{index}"), str(exc)) from exc


def load_repository(source: str | Path | IO[str]) -> TemplateSet:
    """Load a repository document (JSON array of template records)."""
    text = _read_source(source)
    try:
        records = json.loads(text) if text.strip() else []
    except json.JSONDecodeError as exc:
        raise TemplateInvalidError("<document>", f"invalid JSON at line {exc.lineno}: {exc.msg}")
    if not isinstance(records, list):
        raise TemplateInvalidError("<document>", "repository document must be a JSON array")
    return TemplateSet([_parse_record(rec, i) for i, rec in enumerate(records)])


def dump_repository(tset: TemplateSet) -> str:
    """Serialize a template set back to the repository document format."""
    records = []
    for t in tset:
        records.append(
            {
                "id": t.id,
                "cluster": t.cluster,
                "framework": t.framework.value,
                "strategy": t.strategy.value,
                "launcher": t.launcher.value,
                "body": t.body,
                "params": [
                    {
                        "name": p.name,
                        "kind": p.kind,
                        "required": p.required,
                        "default": p.default,
                    }
                    for p in t.params
                ],
                "verified": t.verified,
                "notes": t.notes,
            }
        )
    return json.dumps(records, indent=2) + "\n"


def default_templates() -> TemplateSet:
    """Load the bundled template repository."""
    data = resources.files("launchport.data").joinpath("templates.json").read_text("utf-8")
    return load_repository(data)


def mark_verified(tset: TemplateSet, template_id: str) -> TemplateSet:
    """Return a new set with ``template_id`` flagged as verified."""
    updated = [replace(t, verified=True) if t.id == template_id else t for t in tset]
    return TemplateSet(updated)


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
