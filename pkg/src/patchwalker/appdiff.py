"""Version diffing over declared code models.

A code model is a three-layer tree (packages / classes / methods). Each
method declares an opcode token stream; special token prefixes carry the
cross-reference information used elsewhere (``call:``, ``field:``, ``str:``).
Two versions are compared through layered hash trees: a method digest covers
the method signature and its opcodes, parent digests combine child digests
sorted by name, so unchanged subtrees can be skipped during the diff.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterator

CALL_PREFIX = "call:"
FIELD_PREFIX = "field:"
LITERAL_PREFIX = "str:"


class CodeModelError(ValueError):
    """Raised for malformed code models (e.g. duplicate method ids)."""


@dataclass(frozen=True)
class MethodDecl:
    """One method: ``name`` is the signature string, unique within its class."""

    name: str
    opcodes: tuple[str, ...]

    def calls(self) -> tuple[str, ...]:
        return tuple(op[len(CALL_PREFIX):] for op in self.opcodes if op.startswith(CALL_PREFIX))

    def terms(self) -> frozenset[str]:
        """Class attributes and string literals referenced by this method."""
        out = set()
        for op in self.opcodes:
            if op.startswith(FIELD_PREFIX):
                out.add(op[len(FIELD_PREFIX):])
            elif op.startswith(LITERAL_PREFIX):
                out.add(op[len(LITERAL_PREFIX):])
        return frozenset(out)

    def literals(self) -> frozenset[str]:
        return frozenset(
            op[len(LITERAL_PREFIX):] for op in self.opcodes if op.startswith(LITERAL_PREFIX)
        )


@dataclass(frozen=True)
class ClassDecl:
    name: str
    methods: tuple[MethodDecl, ...]
    extends: str | None = None


@dataclass(frozen=True)
class PackageDecl:
    name: str
    classes: tuple[ClassDecl, ...]


@dataclass
class CodeModel:
    """Declared packages/classes/methods of one app version."""

    packages: tuple[PackageDecl, ...]
    _methods: dict[str, MethodDecl] = field(default_factory=dict, repr=False)
    _method_class: dict[str, str] = field(default_factory=dict, repr=False)
    _class_extends: dict[str, str | None] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        for pkg in self.packages:
            for cls in pkg.classes:
                cls_id = f"{pkg.name}.{cls.name}"
                if cls_id in self._class_extends:
                    raise CodeModelError(f"duplicate class id: {cls_id}")
                self._class_extends[cls_id] = cls.extends
                for m in cls.methods:
                    mid = f"{cls_id}.{m.name}"
                    if mid in self._methods:
                        raise CodeModelError(f"duplicate method id: {mid}")
                    self._methods[mid] = m
                    self._method_class[mid] = cls_id

    @classmethod
    def from_json(cls, obj: dict) -> "CodeModel":
        packages = []
        for pkg in obj.get("packages", []):
            classes = []
            for c in pkg.get("classes", []):
                methods = tuple(
                    MethodDecl(name=m["name"], opcodes=tuple(m.get("opcodes", [])))
                    for m in c.get("methods", [])
                )
                classes.append(ClassDecl(name=c["name"], methods=methods, extends=c.get("extends")))
            packages.append(PackageDecl(name=pkg["name"], classes=tuple(classes)))
        return cls(packages=tuple(packages))

    def methods(self) -> dict[str, MethodDecl]:
        return self._methods

    def method(self, method_id: str) -> MethodDecl:
        return self._methods[method_id]

    def has_method(self, method_id: str) -> bool:
        return method_id in self._methods

    def class_of(self, method_id: str) -> str:
        return self._method_class[method_id]

    def class_ids(self) -> Iterator[str]:
        return iter(self._class_extends)

    def parent_class(self, class_id: str) -> str | None:
        return self._class_extends.get(class_id)

    def methods_of_class(self, class_id: str) -> list[str]:
        return sorted(m for m, c in self._method_class.items() if c == class_id)

    def call_graph(self) -> dict[str, tuple[str, ...]]:
        """caller -> callees, restricted to methods declared in this model."""
        return {
            mid: tuple(c for c in decl.calls() if c in self._methods)
            for mid, decl in sorted(self._methods.items())
        }

    def instruction_count(self, method_id: str) -> int:
        return len(self._methods[method_id].opcodes)

    def literal_pool(self) -> tuple[str, ...]:
        pool: set[str] = set()
        for decl in self._methods.values():
            pool.update(decl.literals())
        return tuple(sorted(pool))


def _digest(kind: str, name: str, parts: list[str]) -> str:
    h = hashlib.sha256()
    h.update(kind.encode())
    h.update(b"\x00")
    h.update(name.encode())
    for part in parts:
        h.update(b"\x00")
        h.update(part.encode())
    return h.hexdigest()


@dataclass(frozen=True)
class HashTree:
    """Layered digests of a code model, indexed by name at every layer."""

    method_digests: dict[str, str]
    class_digests: dict[str, str]
    package_digests: dict[str, str]
    classes_by_package: dict[str, tuple[str, ...]]
    methods_by_class: dict[str, tuple[str, ...]]
    root: str


def build_hash_tree(model: CodeModel) -> HashTree:
    """Digest every layer bottom-up; siblings are combined sorted by name."""
    method_digests: dict[str, str] = {}
    class_digests: dict[str, str] = {}
    package_digests: dict[str, str] = {}
    classes_by_package: dict[str, tuple[str, ...]] = {}
    methods_by_class: dict[str, tuple[str, ...]] = {}
    for pkg in model.packages:
        cls_parts = []
        cls_ids = []
        for cls in sorted(pkg.classes, key=lambda c: c.name):
            cls_id = f"{pkg.name}.{cls.name}"
            cls_ids.append(cls_id)
            m_parts = []
            mids = []
            for m in sorted(cls.methods, key=lambda m: m.name):
                mid = f"{cls_id}.{m.name}"
                mids.append(mid)
                d = _digest("method", m.name, list(m.opcodes))
                method_digests[mid] = d
                m_parts.append(f"{m.name}={d}")
            class_digests[cls_id] = _digest("class", cls.name, m_parts)
            methods_by_class[cls_id] = tuple(mids)
            cls_parts.append(f"{cls.name}={class_digests[cls_id]}")
        package_digests[pkg.name] = _digest("package", pkg.name, cls_parts)
        classes_by_package[pkg.name] = tuple(cls_ids)
    root_parts = [f"{n}={d}" for n, d in sorted(package_digests.items())]
    return HashTree(
        method_digests=method_digests,
        class_digests=class_digests,
        package_digests=package_digests,
        classes_by_package=classes_by_package,
        methods_by_class=methods_by_class,
        root=_digest("model", "", root_parts),
    )


@dataclass(frozen=True)
class UpdatedMethodSet:
    """Test targets: methods modified or introduced by the second version.

    Method identity is the full signature string, so a signature change shows
    up as a new method rather than a modified one. Deleted methods are
    dropped; they cannot be exercised in the version under test.
    """

    modified: frozenset[str]
    new: frozenset[str]

    @property
    def all(self) -> frozenset[str]:
        return self.modified | self.new

    def to_json(self) -> dict:
        return {
            "identity": "full method signature string",
            "modified": sorted(self.modified),
            "new": sorted(self.new),
        }


def diff(v1: HashTree, v2: HashTree) -> UpdatedMethodSet:
    """Top-down tree comparison; descends only into packages/classes that differ."""
    modified: set[str] = set()
    new: set[str] = set()

    changed_classes = []
    for pkg, digest in sorted(v2.package_digests.items()):
        if v1.package_digests.get(pkg) == digest:
            continue
        prefix = pkg + "."
        changed_classes.extend(c for c in v2.class_digests if c.startswith(prefix))

    changed_methods = []
    for cls in sorted(changed_classes):
        if v1.class_digests.get(cls) == v2.class_digests[cls]:
            continue
        prefix = cls + "."
        changed_methods.extend(m for m in v2.method_digests if m.startswith(prefix))

    for mid in sorted(changed_methods):
        old = v1.method_digests.get(mid)
        if old is None:
            new.add(mid)
        elif old != v2.method_digests[mid]:
            modified.add(mid)

    return UpdatedMethodSet(modified=frozenset(modified), new=frozenset(new))


def diff_models(v1: CodeModel, v2: CodeModel) -> UpdatedMethodSet:
    return diff(build_hash_tree(v1), build_hash_tree(v2))


def write_updated_methods(path: str, updated: UpdatedMethodSet) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(updated.to_json(), f, indent=2, sort_keys=True)
        f.write("\n")
