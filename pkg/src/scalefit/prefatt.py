"""Layered internal preferential attachment: simulation and empirical estimators.

New edges form only between existing nodes of adjacent layers, with
probability proportional to the product of the two endpoint degrees.
Degrees are frozen within a timestep, so every edge drawn in a step uses
start-of-step degrees.
"""

import math
from dataclasses import dataclass

import numpy as np

from .tpl import DomainError

_RETRY_CAP = 100


@dataclass(frozen=True)
class AttachmentConfig:
    """Per-pair rates and stepping policy for the attachment simulation."""

    rates: tuple  # a^l, one per adjacent layer pair
    timesteps: int = 1
    edges_per_step_mode: str = "expected-value"  # or "poisson"
    allow_multi_edges: bool = True
    seed: int = 0

    def __post_init__(self):
        if any(a < 0 for a in self.rates):
            raise DomainError("rates must be >= 0")
        if self.timesteps < 1:
            raise DomainError("timesteps must be >= 1")
        if self.edges_per_step_mode not in ("expected-value", "poisson"):
            raise DomainError(f"unknown mode {self.edges_per_step_mode!r}")


@dataclass
class AttachmentState:
    """Edge multiplicities per adjacent layer pair, plus the current time."""

    matrices: list  # integer arrays, matrices[l] has shape (N_l, N_{l+1})
    time: int = 0
    dropped: int = 0  # edges abandoned after the duplicate-retry cap

    def __post_init__(self):
        self.matrices = [np.asarray(m, dtype=np.int64) for m in self.matrices]
        for a, b in zip(self.matrices, self.matrices[1:]):
            if a.shape[1] != b.shape[0]:
                raise DomainError("adjacent multiplicity matrices disagree on layer size")

    @property
    def n_layers(self):
        return len(self.matrices) + 1

    def layer_sizes(self):
        return [self.matrices[0].shape[0]] + [m.shape[1] for m in self.matrices]

    def degrees(self, l: int) -> np.ndarray:
        """Total degree of every node in layer l (up-side plus down-side)."""
        sizes = self.layer_sizes()
        d = np.zeros(sizes[l], dtype=np.int64)
        if l < len(self.matrices):
            d += self.matrices[l].sum(axis=1)
        if l > 0:
            d += self.matrices[l - 1].sum(axis=0)
        return d

    def copy(self):
        return AttachmentState(
            matrices=[m.copy() for m in self.matrices],
            time=self.time,
            dropped=self.dropped,
        )


def delta_general(d1: float, d2: float, n_nodes: int, a: float, pair_sum: float) -> float:
    """Expected new edges per unit time between two nodes in a flat network."""
    if pair_sum <= 0:
        raise DomainError("pair_sum must be positive (empty network)")
    return 2.0 * n_nodes * a * d1 * d2 / pair_sum


def delta_layered(d1: float, d2: float, n_l: int, a_l: float, cross_sum: float) -> float:
    """Expected new edges per unit time between a layer-l and a layer-(l+1) node."""
    if cross_sum <= 0:
        raise DomainError("cross_sum must be positive (empty layer pair)")
    return n_l * a_l * d1 * d2 / cross_sum


def growth_factor(t: float, n_l: int, a_l: float, n_lm1: int, a_lm1: float,
                  deg_sum0: float) -> float:
    """Closed-form degree multiplier c(t) = 1 + (N^l a^l + N^{l-1} a^{l-1}) t / sum d(0).

    For boundary layers pass zero for the missing side's N and a.
    """
    if deg_sum0 <= 0:
        raise DomainError("deg_sum0 must be positive")
    if t < 0:
        raise DomainError("t must be >= 0")
    return 1.0 + (n_l * a_l + n_lm1 * a_lm1) * t / deg_sum0


def _draw_edge_count(expected: float, mode: str, rng) -> int:
    if mode == "poisson":
        return int(rng.poisson(expected))
    # expected-value mode: stochastic rounding keeps long-run totals exact
    base = math.floor(expected)
    frac = expected - base
    return base + (1 if (frac > 0 and rng.random() < frac) else 0)


def _place_edges(mat, count, p_left, p_right, allow_multi, rng):
    """Attach `count` edges sampled node-by-node proportional to degree products."""
    n_l, n_r = mat.shape
    dropped = 0
    if count <= 0:
        return 0
    i = rng.choice(n_l, size=count, p=p_left)
    j = rng.choice(n_r, size=count, p=p_right)
    if allow_multi:
        np.add.at(mat, (i, j), 1)
        return 0
    for k in range(count):
        a, b = i[k], j[k]
        tries = 0
        while mat[a, b] and tries < _RETRY_CAP:
            a = rng.choice(n_l, p=p_left)
            b = rng.choice(n_r, p=p_right)
            tries += 1
        if mat[a, b]:
            dropped += 1
        else:
            mat[a, b] = 1
    return dropped


def simulate(initial: AttachmentState, cfg: AttachmentConfig) -> list:
    """Run the attachment dynamics, returning states at t = 0, 1, ..., T.

    Per step and layer pair, N^l * a^l new edges (exact in expected-value
    mode, Poisson otherwise) are assigned to node pairs with probability
    proportional to the product of start-of-step degrees. Deterministic
    given cfg.seed.
    """
    if len(cfg.rates) != len(initial.matrices):
        raise DomainError("need one rate per adjacent layer pair")
    for l in range(initial.n_layers):
        if initial.degrees(l).sum() == 0 and _pair_participates(cfg.rates, l, initial.n_layers):
            raise DomainError(f"layer {l} has all-zero degrees but a positive attachment rate")

    rng = np.random.default_rng(cfg.seed)
    states = [initial.copy()]
    cur = initial.copy()
    for _ in range(cfg.timesteps):
        start_deg = [cur.degrees(l).astype(float) for l in range(cur.n_layers)]
        for l, a_l in enumerate(cfg.rates):
            if a_l == 0:
                continue
            n_l = cur.matrices[l].shape[0]
            dl, dr = start_deg[l], start_deg[l + 1]
            count = _draw_edge_count(n_l * a_l, cfg.edges_per_step_mode, rng)
            cur.dropped += _place_edges(
                cur.matrices[l], count, dl / dl.sum(), dr / dr.sum(),
                cfg.allow_multi_edges, rng,
            )
        cur.time += 1
        states.append(cur.copy())
    return states


def _pair_participates(rates, l, n_layers):
    up = l < len(rates) and rates[l] > 0
    down = l > 0 and rates[l - 1] > 0
    return up or down


def _check_step_pair(before: AttachmentState, after: AttachmentState):
    if before.time + 1 != after.time:
        raise DomainError("states must be one timestep apart")
    if [m.shape for m in before.matrices] != [m.shape for m in after.matrices]:
        raise DomainError("states have mismatched layer sizes")


def estimate_delta(before: AttachmentState, after: AttachmentState, l: int) -> dict:
    """Empirical per-pair attachment rate, keyed by (d1, d2) at time `before.time`.

    New edges between nodes of degree d1 (layer l) and d2 (layer l+1),
    divided by the number of such node pairs, connected or not.
    """
    _check_step_pair(before, after)
    diff = after.matrices[l] - before.matrices[l]
    d1 = before.degrees(l)
    d2 = before.degrees(l + 1)
    u1, inv1, c1 = np.unique(d1, return_inverse=True, return_counts=True)
    u2, inv2, c2 = np.unique(d2, return_inverse=True, return_counts=True)
    # sum new edges per degree class: onehot(u1) @ diff @ onehot(u2)^T
    grouped = np.zeros((u1.size, u2.size), dtype=np.int64)
    np.add.at(grouped, (inv1[:, None], inv2[None, :]), diff)
    pairs = np.outer(c1, c2).astype(float)
    rates = grouped / pairs
    return {(int(a), int(b)): float(rates[i, j])
            for i, a in enumerate(u1) for j, b in enumerate(u2)}


def estimate_omega(before: AttachmentState, after: AttachmentState, l: int) -> dict:
    """Empirical new-connection count per degree class of layer l.

    Counts new edges on both the up and down sides of the layer, divided by
    the number of degree-d nodes at time `before.time`.
    """
    _check_step_pair(before, after)
    sizes = before.layer_sizes()
    gains = np.zeros(sizes[l], dtype=np.int64)
    if l < len(before.matrices):
        gains += (after.matrices[l] - before.matrices[l]).sum(axis=1)
    if l > 0:
        gains += (after.matrices[l - 1] - before.matrices[l - 1]).sum(axis=0)
    d = before.degrees(l)
    u, inv, c = np.unique(d, return_inverse=True, return_counts=True)
    tot = np.zeros(u.size, dtype=np.int64)
    np.add.at(tot, inv, gains)
    return {int(k): float(v) / int(n) for k, v, n in zip(u, tot, c)}
