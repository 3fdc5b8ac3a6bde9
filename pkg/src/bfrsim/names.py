"""Hierarchical content names.

A name like ``/unibe.ch/images/fileName1/01`` has components
``("unibe.ch", "images", "fileName1", "01")``; the last one is a segment
number when it is all digits.
"""
from __future__ import annotations

from typing import Iterable

__all__ = [
    "ContentName",
    "MalformedName",
    "parse",
    "enumerate_prefixes",
    "strip_segment",
    "append_segment",
    "is_prefix_of",
    "format_segment",
]


class MalformedName(ValueError):
    pass


class ContentName:
    """Immutable name; equality and hashing go through the canonical URI."""

    __slots__ = ("components", "uri")

    def __init__(self, components: Iterable[str]):
        comps = tuple(components)
        if not comps:
            raise MalformedName("a name needs at least one component")
        for c in comps:
            if not c or "/" in c:
                raise MalformedName(f"invalid component {c!r}")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "uri", "/" + "/".join(comps))

    def __setattr__(self, key, value):
        raise AttributeError("ContentName is immutable")

    def __reduce__(self):
        return (ContentName, (self.components,))

    def __len__(self) -> int:
        return len(self.components)

    def __str__(self) -> str:
        return self.uri

    def __repr__(self) -> str:
        return f"ContentName({self.uri!r})"

    def __eq__(self, other: object) -> bool:
        if isinstance(other, ContentName):
            return self.uri == other.uri
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.uri)

    @property
    def segment(self) -> int | None:
        last = self.components[-1]
        return int(last) if last.isdigit() and len(self.components) > 1 else None

    def prefix(self, length: int) -> "ContentName":
        return ContentName(self.components[:length])

    def child(self, component: str) -> "ContentName":
        return ContentName(self.components + (component,))


def parse(text: str) -> ContentName:
    if not text or not text.startswith("/"):
        raise MalformedName(f"name must start with '/': {text!r}")
    parts = text.split("/")[1:]
    if parts and parts[-1] == "":
        parts.pop()  # trailing slash
    if not parts or any(p == "" for p in parts):
        raise MalformedName(f"empty component in {text!r}")
    return ContentName(parts)


def enumerate_prefixes(name: ContentName) -> list[str]:
    """All prefixes of ``name`` in advertisement form.

    Intermediate prefixes keep a trailing slash (``/a/``, ``/a/b/``) and the
    full name does not, so a directory and a file of the same spelling stay
    distinct filter elements.
    """
    comps = name.components
    out = []
    acc = ""
    for c in comps[:-1]:
        acc += "/" + c
        out.append(acc + "/")
    out.append(acc + "/" + comps[-1])
    return out


def format_segment(segment: int) -> str:
    if segment < 0:
        raise ValueError("segment numbers are non-negative")
    return f"{segment:02d}"


def append_segment(name: ContentName, segment: int) -> ContentName:
    return name.child(format_segment(segment))


def strip_segment(name: ContentName) -> ContentName:
    """Drop a trailing numeric segment component; other names pass through."""
    if name.segment is None:
        return name
    return ContentName(name.components[:-1])


def is_prefix_of(prefix: ContentName, name: ContentName) -> bool:
    p = prefix.components
    return len(p) <= len(name.components) and name.components[: len(p)] == p
