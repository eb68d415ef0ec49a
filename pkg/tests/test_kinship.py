import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lexopt.info import entropy, evaluate_system
from lexopt.kinship import (
    CHILD_OF,
    EGO_INDEX,
    MEMBERS,
    N_NODES,
    PARENT_OF,
    CountTable,
    CountTableError,
    build_kinship_graph,
    bundled_table_path,
    encode_node_features,
    estimate_system,
    export_edge_list,
    load_count_table,
    load_raw_terms,
    prune_graph,
    split_polysemous_counts,
)

# Manual enumeration of the family structure's parent links, used as an
# independent fixture against the module's embedded edge data.
EXPECTED_PARENT_LINKS = [
    # grandparent couples -> parents and their siblings
    *[("MM", c) for c in ("M", "MZy", "MBy", "MZe", "MBe")],
    *[("MF", c) for c in ("M", "MZy", "MBy", "MZe", "MBe")],
    *[("FM", c) for c in ("F", "FZy", "FBy", "FZe", "FBe")],
    *[("FF", c) for c in ("F", "FZy", "FBy", "FZe", "FBe")],
    # parents -> ego and siblings
    *[("M", c) for c in ("ego", "Zy", "By", "Ze", "Be")],
    *[("F", c) for c in ("ego", "Zy", "By", "Ze", "Be")],
    # single-parent links below ego
    ("ego", "D"), ("ego", "S"),
    ("Zy", "ZyD"), ("Zy", "ZyS"), ("By", "ByD"), ("By", "ByS"),
    ("Ze", "ZeD"), ("Ze", "ZeS"), ("Be", "BeD"), ("Be", "BeS"),
    ("D", "DD"), ("D", "DS"), ("S", "SD"), ("S", "SS"),
]


def node_idx(label):
    return EGO_INDEX if label == "ego" else MEMBERS.index(label)


def bfs_distances(adjacency, start):
    dist = {start: 0}
    frontier = [start]
    while frontier:
        nxt = []
        for node in frontier:
            for nb in adjacency[node]:
                if nb not in dist:
                    dist[nb] = dist[node] + 1
                    nxt.append(nb)
        frontier = nxt
    return dist


# ---------------------------------------------------------------------------
# Graph construction
# ---------------------------------------------------------------------------


def test_graph_has_33_nodes_and_one_ego():
    for ego in ("Bob", "Alice"):
        g = build_kinship_graph(ego)
        assert g.n_nodes == N_NODES == 33
        assert sum(n.is_ego for n in g.nodes) == 1
        assert g.nodes[EGO_INDEX].label == ego


def test_father_is_parent_of_brother_and_ego():
    g = build_kinship_graph("Bob")
    edges = set(g.edges)
    assert (node_idx("F"), PARENT_OF, node_idx("Be")) in edges
    assert (node_idx("F"), PARENT_OF, node_idx("ego")) in edges
    assert (node_idx("ego"), CHILD_OF, node_idx("F")) in edges


def test_parent_edges_match_manual_enumeration():
    g = build_kinship_graph("Bob")
    got = {(s, d) for s, rel, d in g.edges if rel == PARENT_OF}
    expected = {(node_idx(p), node_idx(c)) for p, c in EXPECTED_PARENT_LINKS}
    assert got == expected
    assert len(got) == len(EXPECTED_PARENT_LINKS) == 44


def test_every_parent_edge_has_reverse_child_edge():
    g = build_kinship_graph("Alice")
    edges = set(g.edges)
    for src, rel, dst in g.edges:
        if rel == PARENT_OF:
            assert (dst, CHILD_OF, src) in edges
    assert len([e for e in g.edges if e[1] == CHILD_OF]) == 44


def test_both_egos_share_topology():
    bob = build_kinship_graph("Bob")
    alice = build_kinship_graph("Alice")
    assert bob.edges == alice.edges
    assert [n.label for n in bob.nodes[:-1]] == [n.label for n in alice.nodes[:-1]]


def test_invalid_ego_rejected():
    with pytest.raises(ValueError):
        build_kinship_graph("Carol")


# ---------------------------------------------------------------------------
# Pruning
# ---------------------------------------------------------------------------


def test_pruned_graph_is_spanning_tree():
    for ego in ("Bob", "Alice"):
        pruned = prune_graph(build_kinship_graph(ego))
        links = {frozenset((s, d)) for s, _, d in pruned.edges}
        assert len(links) == 32
        assert len(pruned.edges) == 64  # each link keeps both directions
        # acyclic + spanning: |V| - 1 undirected links and connected
        dist = bfs_distances(pruned.undirected_adjacency(), EGO_INDEX)
        assert len(dist) == 33


def test_pruned_depths_equal_full_graph_bfs():
    for ego in ("Bob", "Alice"):
        full = build_kinship_graph(ego)
        pruned = prune_graph(full)
        full_dist = bfs_distances(full.undirected_adjacency(), EGO_INDEX)
        tree_dist = bfs_distances(pruned.undirected_adjacency(), EGO_INDEX)
        for node in range(33):
            assert tree_dist[node] == full_dist[node]


def test_grandmother_depth_two_via_mother():
    pruned = prune_graph(build_kinship_graph("Bob"))
    dist = bfs_distances(pruned.undirected_adjacency(), EGO_INDEX)
    assert dist[node_idx("MM")] == 2
    # deterministic tie-break: sibling rows attach through M (index 4), not F
    links = {frozenset((s, d)) for s, _, d in pruned.edges}
    for sibling in ("Zy", "By", "Ze", "Be"):
        assert frozenset((node_idx("M"), node_idx(sibling))) in links
        assert frozenset((node_idx("F"), node_idx(sibling))) not in links


def test_pruned_edges_are_subset_of_full():
    full = build_kinship_graph("Bob")
    pruned = prune_graph(full)
    assert set(pruned.edges) <= set(full.edges)


# ---------------------------------------------------------------------------
# Node features
# ---------------------------------------------------------------------------


def test_feature_shape_and_one_hot_blocks():
    g = build_kinship_graph("Bob")
    feats = encode_node_features(g)
    assert feats.shape == (33, 12)
    for block in range(4):
        assert np.all(feats[:, 3 * block : 3 * block + 3].sum(axis=1) == 1.0)


def test_mother_features_bob_vs_alice():
    m = node_idx("M")
    bob = encode_node_features(build_kinship_graph("Bob"))
    alice = encode_node_features(build_kinship_graph("Alice"))
    # gender: female slot
    assert bob[m, 1] == 1.0 and alice[m, 1] == 1.0
    # gender relative to ego: different for Bob, same for Alice
    assert bob[m, 4] == 1.0
    assert alice[m, 3] == 1.0


def test_grandparent_age_vs_parent_not_applicable():
    feats = encode_node_features(build_kinship_graph("Bob"))
    for label in ("MM", "MF", "FM", "FF"):
        assert feats[node_idx(label), 11] == 1.0
    # parents' siblings carry the attribute
    assert feats[node_idx("MZe"), 9] == 1.0
    assert feats[node_idx("MZy"), 10] == 1.0


def test_features_deterministic_and_differ_only_in_ego_relative_slots():
    bob = build_kinship_graph("Bob")
    assert encode_node_features(bob).tobytes() == encode_node_features(bob).tobytes()
    alice = build_kinship_graph("Alice")
    fb, fa = encode_node_features(bob), encode_node_features(alice)
    # absolute gender and both age attributes agree for all non-ego nodes
    assert np.array_equal(fb[:32, 0:3], fa[:32, 0:3])
    assert np.array_equal(fb[:32, 6:12], fa[:32, 6:12])
    # the ego-relative gender block differs somewhere
    assert not np.array_equal(fb[:, 3:6], fa[:, 3:6])


def test_edge_list_export(tmp_path):
    g = prune_graph(build_kinship_graph("Bob"))
    out = tmp_path / "edges.tsv"
    export_edge_list(g, out)
    lines = out.read_text(encoding="utf-8").strip().splitlines()
    assert len(lines) == 64
    assert any(line == f"M\t{PARENT_OF}\tBob" for line in lines)


# ---------------------------------------------------------------------------
# Count tables
# ---------------------------------------------------------------------------


def test_load_english_fixture_rows():
    table = load_count_table(bundled_table_path("en"), "en")
    rows = dict(((m, t), c) for m, t, c in table.rows)
    assert rows[("M", "Mother")] == 65458
    assert rows[("ZyD", "Niece")] == 326.25


def test_load_rejects_empty_file(tmp_path):
    empty = tmp_path / "empty.tsv"
    empty.write_text("", encoding="utf-8")
    with pytest.raises(CountTableError):
        load_count_table(empty)


def test_load_rejects_bad_rows_with_line_numbers(tmp_path):
    bad = tmp_path / "bad.tsv"
    bad.write_text("member\tterm\tcount\nXX\tfoo\t1\n", encoding="utf-8")
    with pytest.raises(CountTableError, match=":2"):
        load_count_table(bad)
    bad.write_text("member\tterm\tcount\nM\tfoo\t-3\n", encoding="utf-8")
    with pytest.raises(CountTableError, match=":2"):
        load_count_table(bad)
    bad.write_text("member\tterm\tcount\nM\tfoo\tzzz\n", encoding="utf-8")
    with pytest.raises(CountTableError, match="bad count"):
        load_count_table(bad)


def test_split_polysemous_niece():
    table = split_polysemous_counts(
        [("Niece", 1305, ("ZyD", "ByD", "ZeD", "BeD"))], language="en-raw"
    )
    for member in ("ZyD", "ByD", "ZeD", "BeD"):
        assert dict(((m, t), c) for m, t, c in table.rows)[(member, "Niece")] == 326.25


def test_split_unambiguous_term_keeps_full_count():
    table = split_polysemous_counts([("Mother", 10.0, ("M",))])
    assert table.rows == (("M", "Mother", 10.0),)


def test_split_rejects_empty_referents():
    with pytest.raises(CountTableError):
        split_polysemous_counts([("x", 1.0, ())])


@settings(max_examples=40, deadline=None)
@given(
    st.lists(
        st.tuples(
            st.sampled_from(["a", "b", "c", "d"]),
            st.floats(0, 1e6, allow_nan=False),
            st.sets(st.sampled_from(MEMBERS), min_size=1, max_size=6),
        ),
        min_size=1,
        max_size=10,
    )
)
def test_split_conserves_total_mass(raw):
    raw_terms = [(t, c, tuple(sorted(refs))) for t, c, refs in raw]
    table = split_polysemous_counts(raw_terms)
    total_in = sum(c for _, c, _ in raw_terms)
    total_out = sum(c for _, _, c in table.rows)
    assert total_out == pytest.approx(total_in, rel=1e-12, abs=1e-9)


def test_raw_tsv_round_trip(tmp_path):
    raw = tmp_path / "raw.tsv"
    raw.write_text(
        "term\tcount\tmembers\nNiece\t1305\tZyD,ByD,ZeD,BeD\nMother\t10\tM\n",
        encoding="utf-8",
    )
    table = split_polysemous_counts(load_raw_terms(raw), language="x")
    rows = dict(((m, t), c) for m, t, c in table.rows)
    assert rows[("ZyD", "Niece")] == 326.25
    assert rows[("M", "Mother")] == 10.0


# ---------------------------------------------------------------------------
# Estimation
# ---------------------------------------------------------------------------


def test_estimate_english_need_and_encoder():
    system = estimate_system(load_count_table(bundled_table_path("en"), "en"))
    mother_total = 65458 + 29849 + 707 + 388
    grand_total = sum(c for _, _, c in load_count_table(bundled_table_path("en")).rows)
    m = MEMBERS.index("M")
    assert system.need.probs[m] == pytest.approx(mother_total / grand_total, rel=1e-12)
    w = system.word_labels.index("Mom")
    assert system.encoder.matrix[m, w] == pytest.approx(29849 / mother_total, rel=1e-12)


def test_estimate_single_member_table():
    table = CountTable(language="toy", rows=(("MM", "granny", 3.0),))
    with pytest.raises(CountTableError, match="no counts"):
        estimate_system(table)


def test_estimate_requires_all_members():
    rows = tuple((m, f"t{m}", 1.0) for m in MEMBERS[:-1])
    with pytest.raises(CountTableError, match="SS"):
        estimate_system(CountTable(language="partial", rows=rows))


def test_estimated_systems_are_valid_and_on_curve():
    for lang in ("en", "nl", "es", "vi"):
        system = estimate_system(load_count_table(bundled_table_path(lang), lang))
        assert system.n_objects == 32
        assert abs(system.need.probs.sum() - 1.0) < 1e-12
        point = evaluate_system(system)
        assert abs(point.distance_nats) < 1e-9
        assert point.adjusted_complexity_nats < 0.0
        assert 0.0 < point.complexity_nats <= entropy(system.need) + 1e-9


def test_cross_language_ordering():
    points = {}
    for lang in ("en", "nl", "es", "vi"):
        system = estimate_system(load_count_table(bundled_table_path(lang), lang))
        points[lang] = evaluate_system(system)
    others = [points[lang] for lang in ("en", "nl", "es")]
    assert points["vi"].adjusted_complexity_nats < min(
        p.adjusted_complexity_nats for p in others
    )
    assert points["vi"].info_loss_nats > max(p.info_loss_nats for p in others)
