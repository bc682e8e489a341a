"""Named bodies, fields, group elements and jets loaded from one JSON file."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import jsonschema

from . import diffeo as D
from .errors import ConvexDiffError, WorkspaceError
from .evolution import ParametricFlowSpec
from .fields import LieAlgebraCurve, field_from_json
from .geometry import body_from_json
from .jets import jet_from_json

__all__ = ["Workspace", "load_workspace", "default_workspace", "load_schema", "validate", "TOOL_VERSION"]

TOOL_VERSION = "1.0"


def load_schema(name):
    text = resources.files("convexdiff").joinpath("schemas").joinpath(f"{name}.schema.json").read_text("utf-8")
    return json.loads(text)


def validate(doc, name):
    """Validate ``doc`` against a shipped schema; raises ``WorkspaceError`` with the JSON path."""
    try:
        jsonschema.validate(doc, load_schema(name))
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise WorkspaceError(exc.message, f"{name}:{where}") from None


@dataclass
class Workspace:
    raw: dict
    source: str = "<default>"
    _cache: dict = field(default_factory=dict, repr=False)

    def _entry(self, section, key):
        try:
            return self.raw.get(section, {})[key]
        except KeyError:
            known = ", ".join(sorted(self.raw.get(section, {}))) or "none"
            raise WorkspaceError(f"unknown id {key!r} (known: {known})", f"{self.source}:{section}") from None

    def _cached(self, section, key, build):
        slot = (section, key)
        if slot not in self._cache:
            try:
                self._cache[slot] = build(self._entry(section, key))
            except WorkspaceError:
                raise
            except (ConvexDiffError, KeyError, TypeError, ValueError) as exc:
                raise WorkspaceError(str(exc), f"{self.source}:{section}/{key}") from exc
        return self._cache[slot]

    def body(self, key):
        return self._cached("bodies", key, body_from_json)

    def field(self, key):
        def build(desc):
            return field_from_json(desc, self.body(desc["body"]))
        return self._cached("fields", key, build)

    def flow_spec(self, key, N=2048, tol=1e-13):
        desc = self._entry("fields", key)
        box = desc.get("param_box")
        return ParametricFlowSpec(self.field(key), tuple(box) if box else None, N, tol)

    def jet(self, key):
        return self._cached("jets", key, jet_from_json)

    def element(self, key):
        return self._cached("elements", key, self._build_element)

    def _build_element(self, desc):
        kind = desc["kind"]
        if kind == "identity":
            return D.identity(self.body(desc["body"]))
        if kind == "analytic":
            return D.from_field(self.field(desc["field"]), desc.get("t"))
        if kind == "flow":
            f = self.field(desc["field"])
            return D.flow_element(LieAlgebraCurve(f), desc.get("t", 1.0), N=desc.get("grid", 2048))
        if kind == "compose":
            psi, phi = desc["of"]
            return D.compose(self.element(psi), self.element(phi))
        if kind == "invert":
            return D.invert(self.element(desc["of"]))
        raise WorkspaceError(f"unknown element kind {kind!r}")

    def ids(self, section):
        return sorted(self.raw.get(section, {}))


def _check(doc, source):
    try:
        validate(doc, "workspace")
    except WorkspaceError as exc:
        raise WorkspaceError(str(exc), source) from None
    major = str(doc["version"]).split(".")[0]
    if major != TOOL_VERSION.split(".")[0]:
        raise WorkspaceError(f"workspace version {doc['version']} does not match tool version {TOOL_VERSION}",
                             f"{source}:version")
    for fid, fdesc in doc.get("fields", {}).items():
        if fdesc["body"] not in doc.get("bodies", {}):
            raise WorkspaceError(f"field refers to unknown body {fdesc['body']!r}", f"{source}:fields/{fid}")
    for eid, edesc in doc.get("elements", {}).items():
        refs = []
        if "body" in edesc:
            refs.append(("bodies", edesc["body"]))
        if "field" in edesc:
            refs.append(("fields", edesc["field"]))
        if "of" in edesc:
            of = edesc["of"] if isinstance(edesc["of"], list) else [edesc["of"]]
            refs += [("elements", o) for o in of]
        for section, ref in refs:
            if ref not in doc.get(section, {}):
                raise WorkspaceError(f"unknown {section[:-1]} {ref!r}", f"{source}:elements/{eid}")


def load_workspace(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise WorkspaceError(exc.strerror or str(exc), str(path)) from None
    except json.JSONDecodeError as exc:
        raise WorkspaceError(f"invalid JSON: {exc.msg}", f"{path}:{exc.lineno}:{exc.colno}") from None
    _check(doc, str(path))
    return Workspace(doc, str(path))


def default_workspace():
    text = resources.files("convexdiff").joinpath("data").joinpath("default_workspace.json").read_text("utf-8")
    doc = json.loads(text)
    _check(doc, "<default>")
    return Workspace(doc)
