"""Speaker/listener graph networks for the kinship referential game.

Both agents encode the 33-node kinship graph with a relational graph
convolution: an input projection of the one-hot node features followed by
``n_layers`` applications of one shared-parameter layer

    h'_i = relu( W_self h_i + sum_r mean_{j in N_r(i)} W_r h_j )

with one weight matrix per relation (parent-of, child-of).  The speaker
scores vocabulary tokens from the concatenated (ego, target) embeddings
through two linear maps and samples a relaxed one-hot message with
Gumbel-Softmax; the listener embeds the message and scores every node with
a bilinear form.  Training minimizes cross-entropy of the target against
the 6-candidate score softmax.

Everything is plain float64 numpy.  ``backward`` is a purpose-built
reverse-mode pass through the whole stack (noise held constant, shared
layer gradients accumulated across applications); it is validated
coordinate-by-coordinate against central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..kinship import (
    CHILD_OF,
    EGO_IDENTITIES,
    EGO_INDEX,
    FEATURE_DIM,
    PARENT_OF,
    KinshipGraph,
    build_kinship_graph,
    prune_graph,
)

__all__ = [
    "GameDims",
    "AgentParams",
    "GraphTensors",
    "Batch",
    "PARAM_ROLES",
    "init_params",
    "graph_tensors",
    "game_graphs",
    "rgcn_forward",
    "speaker_forward",
    "listener_forward",
    "sample_gumbel",
    "game_loss",
    "backward",
]


@dataclass(frozen=True)
class GameDims:
    d: int = 80
    d_h: int = 20
    vocab_size: int = 128
    n_layers: int = 3
    feature_dim: int = FEATURE_DIM

    def __post_init__(self):
        for name in ("d", "d_h", "vocab_size", "n_layers", "feature_dim"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


def _param_shapes(dims: GameDims) -> dict:
    """Canonical parameter order; Adam and checkpoints iterate this order."""
    return {
        "speaker.input_proj": (dims.d, dims.feature_dim),
        "speaker.self_loop": (dims.d, dims.d),
        "speaker.rel_parent": (dims.d, dims.d),
        "speaker.rel_child": (dims.d, dims.d),
        "speaker.hidden": (dims.d_h, 2 * dims.d),
        "speaker.lexicon": (dims.vocab_size, dims.d_h),
        "listener.input_proj": (dims.d, dims.feature_dim),
        "listener.self_loop": (dims.d, dims.d),
        "listener.rel_parent": (dims.d, dims.d),
        "listener.rel_child": (dims.d, dims.d),
        "listener.token_emb": (dims.vocab_size, dims.d_h),
        "listener.bilinear": (dims.d_h, dims.d),
    }


PARAM_ROLES = tuple(_param_shapes(GameDims()).keys())

_GNN_KEYS = ("input_proj", "self_loop", "rel_parent", "rel_child")


@dataclass
class AgentParams:
    """All trainable tensors of both agents, keyed in canonical order."""

    dims: GameDims
    tensors: dict

    def __post_init__(self):
        expected = _param_shapes(self.dims)
        if tuple(self.tensors.keys()) != tuple(expected.keys()):
            raise ValueError("parameter keys do not match the canonical layout")
        for name, shape in expected.items():
            if self.tensors[name].shape != shape:
                raise ValueError(
                    f"{name} has shape {self.tensors[name].shape}, expected {shape}"
                )

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def agent(self, which: str) -> dict:
        return {k.split(".", 1)[1]: v for k, v in self.tensors.items() if k.startswith(which)}

    def copy(self) -> "AgentParams":
        return AgentParams(self.dims, {k: v.copy() for k, v in self.tensors.items()})

    def zeros_like(self) -> dict:
        return {k: np.zeros_like(v) for k, v in self.tensors.items()}


def init_params(dims: GameDims, seed: int) -> AgentParams:
    """Glorot-uniform init, one seeded stream drawn in canonical order."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0,)))
    tensors = {}
    for name, shape in _param_shapes(dims).items():
        bound = np.sqrt(6.0 / (shape[0] + shape[1]))
        tensors[name] = rng.uniform(-bound, bound, size=shape)
    return AgentParams(dims, tensors)


# ---------------------------------------------------------------------------
# Graph tensors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GraphTensors:
    """Dense per-relation mean-normalized adjacency plus node features."""

    ego_identity: str
    features: np.ndarray      # 33 x feature_dim
    norm_parent: np.ndarray   # 33 x 33; row i averages parent-of sources
    norm_child: np.ndarray    # 33 x 33


def _normalized_incoming(graph: KinshipGraph, relation: str) -> np.ndarray:
    mat = np.zeros((graph.n_nodes, graph.n_nodes))
    for node, sources in enumerate(graph.neighbors(relation)):
        for src in sources:
            mat[node, src] = 1.0 / len(sources)
    return mat


def graph_tensors(graph: KinshipGraph) -> GraphTensors:
    return GraphTensors(
        ego_identity=graph.ego_identity,
        features=np.asarray(graph.node_features, dtype=np.float64),
        norm_parent=_normalized_incoming(graph, PARENT_OF),
        norm_child=_normalized_incoming(graph, CHILD_OF),
    )


def game_graphs(pruning: bool) -> dict:
    """GraphTensors for both ego identities, pruned or full."""
    out = {}
    for ego in EGO_IDENTITIES:
        graph = build_kinship_graph(ego)
        if pruning:
            graph = prune_graph(graph)
        out[ego] = graph_tensors(graph)
    return out


# ---------------------------------------------------------------------------
# Relational GNN forward / backward
# ---------------------------------------------------------------------------


def _gnn_forward(weights: dict, graph: GraphTensors, n_layers: int):
    h = graph.features @ weights["input_proj"].T
    inputs, pres, aggs = [h], [], []
    for _ in range(n_layers):
        agg_p = graph.norm_parent @ h
        agg_c = graph.norm_child @ h
        pre = h @ weights["self_loop"].T + agg_p @ weights["rel_parent"].T + agg_c @ weights["rel_child"].T
        h = np.maximum(pre, 0.0)
        pres.append(pre)
        aggs.append((agg_p, agg_c))
        inputs.append(h)
    return h, (inputs, pres, aggs)


def _gnn_backward(weights: dict, graph: GraphTensors, cache, d_out: np.ndarray, grads: dict, prefix: str):
    inputs, pres, aggs = cache
    d_h = d_out
    for layer in reversed(range(len(pres))):
        d_pre = d_h * (pres[layer] > 0.0)
        h_in = inputs[layer]
        agg_p, agg_c = aggs[layer]
        grads[f"{prefix}.self_loop"] += d_pre.T @ h_in
        grads[f"{prefix}.rel_parent"] += d_pre.T @ agg_p
        grads[f"{prefix}.rel_child"] += d_pre.T @ agg_c
        d_h = (
            d_pre @ weights["self_loop"]
            + graph.norm_parent.T @ (d_pre @ weights["rel_parent"])
            + graph.norm_child.T @ (d_pre @ weights["rel_child"])
        )
    grads[f"{prefix}.input_proj"] += d_h.T @ graph.features


def rgcn_forward(params: AgentParams, graph: GraphTensors, agent: str = "speaker") -> np.ndarray:
    """Node embeddings (33 x d) for one agent's relational stack."""
    if agent not in ("speaker", "listener"):
        raise ValueError(f"unknown agent {agent!r}")
    h, _ = _gnn_forward(params.agent(agent), graph, params.dims.n_layers)
    return h


# ---------------------------------------------------------------------------
# Single-instance agent operations
# ---------------------------------------------------------------------------


def sample_gumbel(rng, shape) -> np.ndarray:
    """Standard Gumbel noise -log(-log(U)) with U ~ Uniform(0, 1)."""
    u = np.clip(rng.random(shape), 1e-300, 1.0 - 1e-16)
    return -np.log(-np.log(u))


def _speaker_scores(params: AgentParams, graph: GraphTensors, ego: int, target: int) -> np.ndarray:
    h = rgcn_forward(params, graph, "speaker")
    z = np.concatenate([h[ego], h[target]])
    return params["speaker.lexicon"] @ (params["speaker.hidden"] @ z)


def _softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = logits - logits.max(axis=axis, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=axis, keepdims=True)


def speaker_forward(
    params: AgentParams,
    graph: GraphTensors,
    ego: int,
    target: int,
    temperature: float,
    mode: str = "train",
    rng=None,
    noise: np.ndarray | None = None,
) -> np.ndarray:
    """One-token message over the vocabulary.

    Train mode returns the Gumbel-Softmax relaxation softmax((score + g)/t);
    eval mode returns the exact one-hot of the highest-scoring token.
    """
    if ego == target:
        raise ValueError("ego cannot be its own referent")
    scores = _speaker_scores(params, graph, ego, target)
    if mode == "eval":
        message = np.zeros_like(scores)
        message[int(np.argmax(scores))] = 1.0
        return message
    if mode != "train":
        raise ValueError(f"unknown mode {mode!r}")
    if noise is None:
        if rng is None:
            raise ValueError("train mode needs rng or explicit noise")
        noise = sample_gumbel(rng, scores.shape)
    return _softmax((scores + noise) / temperature)


def listener_forward(params: AgentParams, graph: GraphTensors, message) -> np.ndarray:
    """Bilinear compatibility scores of the message against all 33 nodes."""
    if isinstance(message, (int, np.integer)):
        one_hot = np.zeros(params.dims.vocab_size)
        one_hot[int(message)] = 1.0
        message = one_hot
    message = np.asarray(message, dtype=np.float64)
    if message.shape != (params.dims.vocab_size,):
        raise ValueError("message must be a distribution over the vocabulary")
    token_vec = params["listener.token_emb"].T @ message
    nodes = rgcn_forward(params, graph, "listener")
    return (token_vec @ params["listener.bilinear"]) @ nodes.T


def game_loss(scores: np.ndarray, target: int, candidates) -> float:
    """Cross-entropy of the target under the candidate-score softmax."""
    candidates = list(candidates)
    if target not in candidates:
        raise ValueError("target must be among the candidates")
    cand = np.asarray([scores[c] for c in candidates])
    shifted = cand - cand.max()
    log_z = np.log(np.exp(shifted).sum()) + cand.max()
    return float(log_z - scores[target])


# ---------------------------------------------------------------------------
# Batched loss and gradients
# ---------------------------------------------------------------------------


@dataclass
class Batch:
    """Index arrays for a mini-batch; candidate column 0 is the target."""

    ego_ids: np.ndarray      # (B,) index into the ego-ordered graph pair
    targets: np.ndarray      # (B,) node ids in [0, 32)
    candidates: np.ndarray   # (B, 1 + n_distractors) node ids, col 0 = target
    noise: np.ndarray        # (B, vocab) fixed Gumbel draws

    def __post_init__(self):
        if not np.array_equal(self.candidates[:, 0], self.targets):
            raise ValueError("candidate column 0 must hold the targets")


def backward(params: AgentParams, graphs, batch: Batch, temperature: float):
    """Mean batch loss and its gradient for every parameter tensor.

    ``graphs`` is the (Bob, Alice) GraphTensors pair indexed by
    ``batch.ego_ids``.  Gumbel noise is treated as a constant, so the result
    is the exact derivative of the relaxed training loss.
    """
    dims = params.dims
    n = batch.targets.shape[0]
    speaker, listener = params.agent("speaker"), params.agent("listener")

    h_nodes, s_caches, v_nodes, l_caches = [], [], [], []
    for g in graphs:
        h, cache = _gnn_forward(speaker, g, dims.n_layers)
        h_nodes.append(h)
        s_caches.append(cache)
        v, cache = _gnn_forward(listener, g, dims.n_layers)
        v_nodes.append(v)
        l_caches.append(cache)
    h_stack = np.stack(h_nodes)  # (2, 33, d)
    v_stack = np.stack(v_nodes)

    ego_rows = h_stack[batch.ego_ids, EGO_INDEX]          # (B, d)
    tgt_rows = h_stack[batch.ego_ids, batch.targets]      # (B, d)
    z = np.concatenate([ego_rows, tgt_rows], axis=1)      # (B, 2d)
    hid = z @ speaker["hidden"].T                         # (B, d_h)
    scores_s = hid @ speaker["lexicon"].T                 # (B, V)
    message = _softmax((scores_s + batch.noise) / temperature, axis=1)

    token_vec = message @ listener["token_emb"]           # (B, d_h)
    query = token_vec @ listener["bilinear"]              # (B, d)
    v_sel = v_stack[batch.ego_ids]                        # (B, 33, d)
    scores_l = np.einsum("bd,bnd->bn", query, v_sel)      # (B, 33)

    cand_scores = np.take_along_axis(scores_l, batch.candidates, axis=1)
    shifted = cand_scores - cand_scores.max(axis=1, keepdims=True)
    softmax_cand = _softmax(cand_scores, axis=1)
    log_z = np.log(np.exp(shifted).sum(axis=1)) + cand_scores.max(axis=1)
    loss = float(np.mean(log_z - cand_scores[:, 0]))

    grads = params.zeros_like()

    # d loss / d candidate scores, then scatter to the 33-node score grid
    d_cand = softmax_cand / n
    d_cand[:, 0] -= 1.0 / n
    d_scores_l = np.zeros_like(scores_l)
    np.put_along_axis(d_scores_l, batch.candidates, d_cand, axis=1)

    d_query = np.einsum("bn,bnd->bd", d_scores_l, v_sel)
    d_v_sel = d_scores_l[:, :, None] * query[:, None, :]
    d_v_stack = np.zeros_like(v_stack)
    np.add.at(d_v_stack, batch.ego_ids, d_v_sel)

    grads["listener.bilinear"] += token_vec.T @ d_query
    d_token_vec = d_query @ listener["bilinear"].T
    grads["listener.token_emb"] += message.T @ d_token_vec
    d_message = d_token_vec @ listener["token_emb"].T

    # softmax((s + noise)/t) backward with constant noise
    inner = (d_message * message).sum(axis=1, keepdims=True)
    d_scores_s = message * (d_message - inner) / temperature

    grads["speaker.lexicon"] += d_scores_s.T @ hid
    d_hid = d_scores_s @ speaker["lexicon"]
    grads["speaker.hidden"] += d_hid.T @ z
    d_z = d_hid @ speaker["hidden"]

    d_h_stack = np.zeros_like(h_stack)
    ego_col = np.full(n, EGO_INDEX)
    np.add.at(d_h_stack, (batch.ego_ids, ego_col), d_z[:, : dims.d])
    np.add.at(d_h_stack, (batch.ego_ids, batch.targets), d_z[:, dims.d :])

    for g_idx, g in enumerate(graphs):
        _gnn_backward(speaker, g, s_caches[g_idx], d_h_stack[g_idx], grads, "speaker")
        _gnn_backward(listener, g, l_caches[g_idx], d_v_stack[g_idx], grads, "listener")
    return loss, grads
