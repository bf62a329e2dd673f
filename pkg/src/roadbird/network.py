"""Road topology: nodes, directed links, routed paths and their strip layout.

Topologies are read from three whitespace-separated text files::

    node.txt   <id> <x> <y>
    link.txt   <id> <from> <to> <length> <width>
    path.txt   <id> <link_id> [<link_id> ...]

Blank lines and ``#`` comments are ignored. Lengths and widths are meters.
"""

from __future__ import annotations

import logging
import math
import pathlib
from dataclasses import dataclass, field

log = logging.getLogger(__name__)


class TopologyError(ValueError):
    """Raised for malformed or inconsistent topology input."""


@dataclass(frozen=True)
class Node:
    id: int
    x: float
    y: float


@dataclass(frozen=True)
class Link:
    id: int
    from_node: int
    to_node: int
    length: float
    width: float


@dataclass(frozen=True)
class Path:
    id: int
    links: tuple[int, ...]

    @property
    def origin_link(self) -> int:
        return self.links[0]


@dataclass(frozen=True)
class TopologyParts:
    nodes: dict[int, Node]
    links: dict[int, Link]
    paths: dict[int, Path]


@dataclass(frozen=True)
class RoadNetwork:
    """Validated topology plus the strip count of every link.

    Immutable once built; runs may share one instance.
    """

    nodes: dict[int, Node]
    links: dict[int, Link]
    paths: dict[int, Path]
    strip_width: float
    strips: dict[int, int] = field(default_factory=dict)

    def strip_count(self, link_id: int) -> int:
        return self.strips[link_id]

    def paths_from(self, node_id: int) -> list[Path]:
        """Paths whose first link leaves ``node_id``, ordered by path id."""
        return [p for _, p in sorted(self.paths.items())
                if self.links[p.links[0]].from_node == node_id]

    @property
    def generating_nodes(self) -> list[int]:
        return sorted({self.links[p.links[0]].from_node for p in self.paths.values()})


def _records(text: str, name: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def _bad(name: str, lineno: int, msg: str) -> TopologyError:
    return TopologyError(f"{name}:{lineno}: {msg}")


def parse_topology(node_text: str, link_text: str, path_text: str) -> TopologyParts:
    """Parse and cross-validate the three topology files.

    Raises
    ------
    TopologyError
        On a malformed line (with its line number), duplicate ids, dangling
        references, non-positive geometry or a discontinuous path.
    """
    nodes: dict[int, Node] = {}
    for lineno, tok in _records(node_text, "node.txt"):
        if len(tok) != 3:
            raise _bad("node.txt", lineno, f"expected 3 fields, got {len(tok)}")
        try:
            node = Node(int(tok[0]), float(tok[1]), float(tok[2]))
        except ValueError as exc:
            raise _bad("node.txt", lineno, str(exc)) from None
        if node.id in nodes:
            raise _bad("node.txt", lineno, f"duplicate node id {node.id}")
        nodes[node.id] = node

    links: dict[int, Link] = {}
    for lineno, tok in _records(link_text, "link.txt"):
        if len(tok) != 5:
            raise _bad("link.txt", lineno, f"expected 5 fields, got {len(tok)}")
        try:
            link = Link(int(tok[0]), int(tok[1]), int(tok[2]), float(tok[3]), float(tok[4]))
        except ValueError as exc:
            raise _bad("link.txt", lineno, str(exc)) from None
        if link.id in links:
            raise _bad("link.txt", lineno, f"duplicate link id {link.id}")
        for end in (link.from_node, link.to_node):
            if end not in nodes:
                raise _bad("link.txt", lineno, f"unknown node {end}")
        if link.from_node == link.to_node:
            raise _bad("link.txt", lineno, "link starts and ends at the same node")
        if not (link.length > 0 and math.isfinite(link.length)):
            raise _bad("link.txt", lineno, f"non-positive length {link.length}")
        if not (link.width > 0 and math.isfinite(link.width)):
            raise _bad("link.txt", lineno, f"non-positive width {link.width}")
        links[link.id] = link

    paths: dict[int, Path] = {}
    for lineno, tok in _records(path_text, "path.txt"):
        if len(tok) < 2:
            raise _bad("path.txt", lineno, "path needs an id and at least one link")
        try:
            pid, seq = int(tok[0]), tuple(int(t) for t in tok[1:])
        except ValueError as exc:
            raise _bad("path.txt", lineno, str(exc)) from None
        if pid in paths:
            raise _bad("path.txt", lineno, f"duplicate path id {pid}")
        for lid in seq:
            if lid not in links:
                raise _bad("path.txt", lineno, f"unknown link {lid}")
        for a, b in zip(seq, seq[1:]):
            if links[a].to_node != links[b].from_node:
                raise _bad("path.txt", lineno, f"discontinuous path: link {a} does not lead into link {b}")
        paths[pid] = Path(pid, seq)

    if not paths:
        log.warning("topology has no paths; no vehicles can be generated")
    return TopologyParts(nodes, links, paths)


def strip_count(link_width: float, strip_width: float) -> int:
    """Number of whole strips that fit across a link; leftover width is unused."""
    if link_width <= 0 or strip_width <= 0:
        raise ValueError("link and strip widths must be positive")
    # guard 7.5/2.5 style ratios against representation error
    n = math.floor(link_width / strip_width + 1e-9)
    if n < 1:
        raise ValueError(f"link width {link_width} m is narrower than one strip ({strip_width} m)")
    return n


def build_network(parts: TopologyParts, strip_width: float) -> RoadNetwork:
    if strip_width <= 0:
        raise ValueError("strip width must be positive")
    strips = {}
    for lid, link in sorted(parts.links.items()):
        try:
            strips[lid] = strip_count(link.width, strip_width)
        except ValueError as exc:
            raise TopologyError(f"link {lid}: {exc}") from None
    return RoadNetwork(dict(parts.nodes), dict(parts.links), dict(parts.paths), strip_width, strips)


def load_topology(directory: "str | pathlib.Path") -> TopologyParts:
    d = pathlib.Path(directory)
    texts = []
    for name in ("node.txt", "link.txt", "path.txt"):
        f = d / name
        if not f.is_file():
            raise TopologyError(f"missing {f}")
        texts.append(f.read_text(encoding="utf-8"))
    return parse_topology(*texts)


def serialize_topology(parts: TopologyParts | RoadNetwork) -> tuple[str, str, str]:
    """Inverse of :func:`parse_topology`; floats use ``repr`` so parsing is exact."""
    nodes = "".join(f"{n.id} {n.x!r} {n.y!r}\n" for _, n in sorted(parts.nodes.items()))
    links = "".join(f"{l.id} {l.from_node} {l.to_node} {l.length!r} {l.width!r}\n"
                    for _, l in sorted(parts.links.items()))
    paths = "".join(f"{p.id} {' '.join(map(str, p.links))}\n" for _, p in sorted(parts.paths.items()))
    return nodes, links, paths
