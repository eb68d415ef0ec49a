"""Kinship domain: the 33-member family graph and corpus count estimation.

The family structure spans five generations around a designated ego ("Bob",
male, or "Alice", female).  Member labels compose "F" father, "M" mother,
"B" brother, "Z" sister, "S" son, "D" daughter with "y" younger / "e" elder,
so "MBe" is the mother's elder brother.  Members connect only through the
primitive parent-of / child-of relations; every link carries both directions.

From per-language (member, term, count) tables this module estimates the
communicative need p(u) = count(u) / sum_v count(v) over the 32 non-ego
members and the encoder q_s(w|u) = count(u, w) / count(u), and derives the
Bayesian decoder, yielding a ready-to-evaluate NamingSystem.
"""

from __future__ import annotations

import os
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .info import ConditionalDistribution, Distribution, NamingSystem, bayesian_decoder

__all__ = [
    "MEMBERS",
    "EGO_INDEX",
    "N_NODES",
    "EGO_IDENTITIES",
    "PARENT_OF",
    "CHILD_OF",
    "CountTableError",
    "KinMember",
    "KinshipGraph",
    "CountTable",
    "build_kinship_graph",
    "prune_graph",
    "encode_node_features",
    "export_edge_list",
    "load_count_table",
    "load_raw_terms",
    "split_polysemous_counts",
    "estimate_system",
    "data_dir",
    "bundled_table_path",
    "BUNDLED_LANGUAGES",
]

# The 32 non-ego members in canonical (count table) row order; ego is node 32.
MEMBERS = (
    "MM", "MF", "FM", "FF",
    "M", "F",
    "MZy", "MBy", "MZe", "MBe", "FZy", "FBy", "FZe", "FBe",
    "Zy", "By", "Ze", "Be",
    "D", "S",
    "ZyD", "ZyS", "ByD", "ByS", "ZeD", "ZeS", "BeD", "BeS",
    "DD", "DS", "SD", "SS",
)
EGO_INDEX = 32
N_NODES = 33
EGO_IDENTITIES = ("Bob", "Alice")

PARENT_OF = "parent-of"
CHILD_OF = "child-of"

_GENERATION = {
    **{m: 1 for m in ("MM", "MF", "FM", "FF")},
    **{m: 2 for m in ("M", "F", "MZy", "MBy", "MZe", "MBe", "FZy", "FBy", "FZe", "FBe")},
    **{m: 3 for m in ("Zy", "By", "Ze", "Be", "ego")},
    **{m: 4 for m in ("D", "S", "ZyD", "ZyS", "ByD", "ByS", "ZeD", "ZeS", "BeD", "BeS")},
    **{m: 5 for m in ("DD", "DS", "SD", "SS")},
}

# Genealogical parent -> children links.  Grandparent couples share their
# children; everything at or below ego hangs off a single in-graph parent.
_PARENT_LINKS = (
    ("MM", ("M", "MZy", "MBy", "MZe", "MBe")),
    ("MF", ("M", "MZy", "MBy", "MZe", "MBe")),
    ("FM", ("F", "FZy", "FBy", "FZe", "FBe")),
    ("FF", ("F", "FZy", "FBy", "FZe", "FBe")),
    ("M", ("ego", "Zy", "By", "Ze", "Be")),
    ("F", ("ego", "Zy", "By", "Ze", "Be")),
    ("ego", ("D", "S")),
    ("Zy", ("ZyD", "ZyS")),
    ("By", ("ByD", "ByS")),
    ("Ze", ("ZeD", "ZeS")),
    ("Be", ("BeD", "BeS")),
    ("D", ("DD", "DS")),
    ("S", ("SD", "SS")),
)

_FEMALE = frozenset(
    ("MM", "FM", "M", "MZy", "MZe", "FZy", "FZe", "Zy", "Ze",
     "D", "ZyD", "ByD", "ZeD", "BeD", "DD", "SD")
)

# Labels whose trailing y/e qualifies age relative to the connecting parent
# (a parent's sibling), as opposed to age relative to ego (an ego sibling).
_YOUNGER_THAN_PARENT = frozenset(("MZy", "MBy", "FZy", "FBy"))
_ELDER_THAN_PARENT = frozenset(("MZe", "MBe", "FZe", "FBe"))

_OLDER_THAN_EGO = frozenset(
    ("MM", "MF", "FM", "FF", "M", "F",
     "MZy", "MBy", "MZe", "MBe", "FZy", "FBy", "FZe", "FBe", "Ze", "Be")
)

# One-hot slot layout: 4 attributes x {value-a, value-b, not-applicable}.
FEATURE_DIM = 12
_ATTR_OFFSETS = {"gender": 0, "gender_vs_ego": 3, "age_vs_ego": 6, "age_vs_parent": 9}


class CountTableError(ValueError):
    """A count table file or record violates the expected format."""


@dataclass(frozen=True)
class KinMember:
    label: str
    generation: int
    is_ego: bool = False


@dataclass(frozen=True)
class KinshipGraph:
    """33 members with typed directed edges and one-hot node features.

    ``edges`` holds (src, relation, dst) index triples; a parent-of edge from
    parent to child is always paired with the reverse child-of edge.  Node
    indices follow MEMBERS order with ego last (index 32).
    """

    ego_identity: str
    nodes: tuple
    edges: tuple
    node_features: np.ndarray

    def __post_init__(self):
        feats = np.asarray(self.node_features, dtype=np.float64).copy()
        feats.setflags(write=False)
        object.__setattr__(self, "node_features", feats)
        labels = [n.label for n in self.nodes]
        if len(labels) != len(set(labels)):
            raise ValueError("node labels must be unique")
        if sum(n.is_ego for n in self.nodes) != 1:
            raise ValueError("exactly one ego node required")

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def neighbors(self, relation: str) -> list:
        """Per-node list of source indices of incoming ``relation`` edges."""
        incoming = [[] for _ in range(self.n_nodes)]
        for src, rel, dst in self.edges:
            if rel == relation:
                incoming[dst].append(src)
        return incoming

    def undirected_adjacency(self) -> list:
        adj = [set() for _ in range(self.n_nodes)]
        for src, _, dst in self.edges:
            adj[src].add(dst)
            adj[dst].add(src)
        return [sorted(s) for s in adj]


def _node_label(index: int, ego_identity: str) -> str:
    return ego_identity if index == EGO_INDEX else MEMBERS[index]


def _node_index(label: str) -> int:
    return EGO_INDEX if label == "ego" else MEMBERS.index(label)


def _build_nodes(ego_identity: str) -> tuple:
    nodes = [KinMember(m, _GENERATION[m]) for m in MEMBERS]
    nodes.append(KinMember(ego_identity, _GENERATION["ego"], is_ego=True))
    return tuple(nodes)


def _full_edges() -> tuple:
    edges = []
    for parent, children in _PARENT_LINKS:
        p = _node_index(parent)
        for child in children:
            c = _node_index(child)
            edges.append((p, PARENT_OF, c))
            edges.append((c, CHILD_OF, p))
    return tuple(edges)


def encode_node_features(graph: "KinshipGraph") -> np.ndarray:
    """One-hot features (33 x 12), a pure function of the ego identity.

    Attributes: gender (male/female), gender relative to ego (same/other),
    age relative to ego (older/younger), age relative to the connecting
    parent (elder/younger, defined for parents' siblings only).  Each
    attribute has an explicit not-applicable slot.
    """
    return _features_for(graph.ego_identity)


def _features_for(ego_identity: str) -> np.ndarray:
    if ego_identity not in EGO_IDENTITIES:
        raise ValueError(f"unknown ego identity {ego_identity!r}")
    ego_female = ego_identity == "Alice"
    feats = np.zeros((N_NODES, FEATURE_DIM))

    def set_slot(i, attr, slot):
        # slot: 0 = value-a, 1 = value-b, 2 = not-applicable
        feats[i, _ATTR_OFFSETS[attr] + slot] = 1.0

    for i in range(N_NODES):
        if i == EGO_INDEX:
            female = ego_female
            set_slot(i, "gender", 1 if female else 0)
            set_slot(i, "gender_vs_ego", 0)
            set_slot(i, "age_vs_ego", 2)
            set_slot(i, "age_vs_parent", 2)
            continue
        label = MEMBERS[i]
        female = label in _FEMALE
        set_slot(i, "gender", 1 if female else 0)
        set_slot(i, "gender_vs_ego", 0 if female == ego_female else 1)
        set_slot(i, "age_vs_ego", 0 if label in _OLDER_THAN_EGO else 1)
        if label in _ELDER_THAN_PARENT:
            set_slot(i, "age_vs_parent", 0)
        elif label in _YOUNGER_THAN_PARENT:
            set_slot(i, "age_vs_parent", 1)
        else:
            set_slot(i, "age_vs_parent", 2)
    return feats


def build_kinship_graph(ego_identity: str) -> KinshipGraph:
    """The full five-generation graph for the given ego identity."""
    if ego_identity not in EGO_IDENTITIES:
        raise ValueError(f"ego identity must be one of {EGO_IDENTITIES}")
    return KinshipGraph(
        ego_identity=ego_identity,
        nodes=_build_nodes(ego_identity),
        edges=_full_edges(),
        node_features=_features_for(ego_identity),
    )


def prune_graph(graph: KinshipGraph) -> KinshipGraph:
    """Reduce the graph to the shortest-path tree rooted at ego.

    Breadth-first search over the undirected view; a node's tree parent is
    its first-visited neighbor, with ties broken by ascending node index.
    Every retained link keeps its original parent-of / child-of edge pair.
    """
    adj = graph.undirected_adjacency()
    dist = [-1] * graph.n_nodes
    tree_parent = [-1] * graph.n_nodes
    dist[EGO_INDEX] = 0
    queue = deque([EGO_INDEX])
    while queue:
        node = queue.popleft()
        for nb in adj[node]:
            if dist[nb] == -1:
                dist[nb] = dist[node] + 1
                tree_parent[nb] = node
                queue.append(nb)
    if any(d == -1 for d in dist):
        missing = [graph.nodes[i].label for i, d in enumerate(dist) if d == -1]
        raise ValueError(f"graph is disconnected; unreachable: {missing}")

    kept_links = {frozenset((i, tree_parent[i])) for i in range(graph.n_nodes) if tree_parent[i] >= 0}
    edges = tuple(
        (src, rel, dst) for src, rel, dst in graph.edges if frozenset((src, dst)) in kept_links
    )
    return KinshipGraph(
        ego_identity=graph.ego_identity,
        nodes=graph.nodes,
        edges=edges,
        node_features=graph.node_features,
    )


def export_edge_list(graph: KinshipGraph, path) -> None:
    """Write edges as ``src<TAB>relation<TAB>dst`` label triples."""
    lines = []
    for src, rel, dst in graph.edges:
        lines.append(
            f"{_node_label(src, graph.ego_identity)}\t{rel}\t{_node_label(dst, graph.ego_identity)}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Count tables and estimation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CountTable:
    """Per-language (member, term, count) records; counts may be fractional."""

    language: str
    rows: tuple  # (member_label, term, count)

    def __post_init__(self):
        seen = set()
        for member, term, count in self.rows:
            if member not in MEMBERS:
                raise CountTableError(f"unknown member label {member!r}")
            if count < 0:
                raise CountTableError(f"negative count for ({member}, {term})")
            if (member, term) in seen:
                raise CountTableError(f"duplicate (member, term) pair ({member}, {term})")
            seen.add((member, term))

    def member_totals(self) -> dict:
        totals = {m: 0.0 for m in MEMBERS}
        for member, _, count in self.rows:
            totals[member] += count
        return totals


def load_count_table(path, language: str | None = None) -> CountTable:
    """Parse a post-split TSV with header ``member<TAB>term<TAB>count``."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines:
        raise CountTableError(f"{path}: empty file")
    if [c.strip() for c in lines[0].split("\t")] != ["member", "term", "count"]:
        raise CountTableError(f"{path}:1: expected header 'member\\tterm\\tcount'")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise CountTableError(f"{path}:{lineno}: expected 3 tab-separated fields")
        member, term, raw = (p.strip() for p in parts)
        if member not in MEMBERS:
            raise CountTableError(f"{path}:{lineno}: unknown member label {member!r}")
        try:
            count = float(raw)
        except ValueError:
            raise CountTableError(f"{path}:{lineno}: bad count {raw!r}") from None
        if count < 0:
            raise CountTableError(f"{path}:{lineno}: negative count {count}")
        rows.append((member, term, count))
    if not rows:
        raise CountTableError(f"{path}: no data rows")
    return CountTable(language=language or path.stem, rows=tuple(rows))


def load_raw_terms(path) -> list:
    """Parse a pre-split TSV ``term<TAB>count<TAB>members`` (comma-separated)."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise CountTableError(f"{path}: empty file")
    if [c.strip() for c in lines[0].split("\t")] != ["term", "count", "members"]:
        raise CountTableError(f"{path}:1: expected header 'term\\tcount\\tmembers'")
    raw = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise CountTableError(f"{path}:{lineno}: expected 3 tab-separated fields")
        term, raw_count, members = (p.strip() for p in parts)
        try:
            count = float(raw_count)
        except ValueError:
            raise CountTableError(f"{path}:{lineno}: bad count {raw_count!r}") from None
        referents = tuple(m.strip() for m in members.split(",") if m.strip())
        raw.append((term, count, referents))
    return raw


def split_polysemous_counts(raw_terms, language: str = "raw") -> CountTable:
    """Divide each term's count evenly among its plausible referents.

    ``raw_terms`` holds (term, count, referent_labels) records; a term whose
    referent set has k members contributes count / k to each of them.  Total
    mass is conserved.
    """
    accumulated = {}
    for term, count, referents in raw_terms:
        if not referents:
            raise CountTableError(f"term {term!r} has an empty referent set")
        if count < 0:
            raise CountTableError(f"term {term!r} has a negative count")
        for member in referents:
            if member not in MEMBERS:
                raise CountTableError(f"term {term!r} names unknown member {member!r}")
            key = (member, term)
            accumulated[key] = accumulated.get(key, 0.0) + count / len(referents)
    rows = tuple(
        (member, term, count)
        for (member, term), count in sorted(
            accumulated.items(), key=lambda kv: (MEMBERS.index(kv[0][0]), kv[0][1])
        )
    )
    return CountTable(language=language, rows=rows)


def estimate_system(table: CountTable) -> NamingSystem:
    """Estimate need, encoder, and Bayesian decoder from corpus counts.

    p(u) is proportional to the member's total count; q_s(w|u) is the
    member-conditional term frequency.  Objects follow canonical member
    order; words appear in first-use order over that scan.
    """
    totals = table.member_totals()
    zero = [m for m in MEMBERS if totals[m] <= 0.0]
    if zero:
        raise CountTableError(
            f"{table.language}: no counts for member(s) {', '.join(zero)}"
        )

    by_member = {m: [] for m in MEMBERS}
    for member, term, count in table.rows:
        by_member[member].append((term, count))

    words = []
    word_index = {}
    for member in MEMBERS:
        for term, _ in by_member[member]:
            if term not in word_index:
                word_index[term] = len(words)
                words.append(term)

    counts = np.zeros((len(MEMBERS), len(words)))
    for member, term, count in table.rows:
        counts[MEMBERS.index(member), word_index[term]] += count

    member_sums = counts.sum(axis=1)
    need = Distribution(member_sums / member_sums.sum())
    encoder = ConditionalDistribution(counts / member_sums[:, None])
    decoder = bayesian_decoder(need, encoder)
    return NamingSystem(
        object_labels=MEMBERS,
        word_labels=tuple(words),
        need=need,
        encoder=encoder,
        decoder=decoder,
    )


# ---------------------------------------------------------------------------
# Bundled fixtures
# ---------------------------------------------------------------------------

BUNDLED_LANGUAGES = ("en", "nl", "es", "vi")


def data_dir() -> Path:
    """Fixture directory; the LEXOPT_DATA_DIR environment variable overrides."""
    override = os.environ.get("LEXOPT_DATA_DIR")
    if override:
        return Path(override)
    return Path(__file__).resolve().parent / "data"


def bundled_table_path(language: str) -> Path:
    path = data_dir() / f"{language}.tsv"
    if not path.is_file():
        raise CountTableError(f"no bundled count table for language {language!r} at {path}")
    return path
