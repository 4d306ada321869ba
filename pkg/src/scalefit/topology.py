"""Sparsified feedforward topologies and per-node degree counting.

A node is a unit in a dense layer, a pixel in a flat input layer, and a
feature map (channel) in a convolutional or image-input layer. Each retained
filter weight of a conv layer counts once per spatial use (the output
spatial size of that layer). The softmax layer is never pruned and carries
no nodes of its own; its weights count toward the layer below.
"""

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .tpl import DomainError, TplParams, sample_discrete

PARAM_KINDS = ("dense", "conv", "softmax")
NODE_KINDS = ("input", "dense", "conv")

# re-pairing passes before a duplicate stub pair is given up on
_SYNTH_MAX_PASSES = 60


class TopologyError(ValueError):
    """Inconsistent layer specs or masks."""


@dataclass
class LayerSpec:
    name: str
    kind: str  # input | dense | conv | pool | softmax
    units: int | None = None
    channels: int | None = None
    spatial: tuple | None = None  # (h, w) for image input / conv output
    filter: tuple | None = None  # (kh, kw)
    stride: tuple = (1, 1)
    padding: tuple = (0, 0)
    pool_size: tuple | None = None
    pruned: bool = False

    def to_manifest(self, mask_file=None):
        d = {"name": self.name, "kind": self.kind, "pruned": self.pruned}
        if self.units is not None:
            d["units"] = self.units
        if self.channels is not None:
            d["channels"] = self.channels
        if self.spatial is not None:
            d["spatial"] = list(self.spatial)
        if self.filter is not None:
            d["filter"] = list(self.filter)
        if self.kind == "conv":
            d["stride"] = list(self.stride)
            d["padding"] = list(self.padding)
        if self.pool_size is not None:
            d["pool_size"] = list(self.pool_size)
        if mask_file is not None:
            d["mask_file"] = mask_file
        return d


@dataclass
class SparseMask:
    """Boolean retain/prune flags for one parameterized layer's weights."""

    layer_name: str
    bits: np.ndarray  # dense [out, in]; conv [out_ch, in_ch, kh, kw]

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=bool)


@dataclass
class NetworkTopology:
    layers: list
    masks: dict  # layer name -> SparseMask, for pruned parameterized layers
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.layers or self.layers[0].kind != "input":
            raise TopologyError("first layer must be kind 'input'")


@dataclass
class DegreeTable:
    """Per node-layer up/down degree arrays, in network order."""

    layers: list  # of (name, up: int ndarray, down: int ndarray)

    def totals(self, name: str) -> np.ndarray:
        for n, up, down in self.layers:
            if n == name:
                return up + down
        raise KeyError(name)

    def layer_names(self):
        return [n for n, _, _ in self.layers]

    def check_edge_conservation(self):
        """Sum of up-degrees of each layer must equal the next layer's down-degrees."""
        for (na, up, _), (nb, _, down) in zip(self.layers, self.layers[1:]):
            if int(up.sum()) != int(down.sum()):
                raise TopologyError(
                    f"edge conservation violated between {na} and {nb}: "
                    f"{int(up.sum())} != {int(down.sum())}"
                )

    def write_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["layer", "node", "up", "down", "total"])
            for name, up, down in self.layers:
                for i in range(up.size):
                    w.writerow([name, i, int(up[i]), int(down[i]), int(up[i] + down[i])])


def conv_output_spatial(in_hw, filt, stride=(1, 1), padding=(0, 0)):
    oh = (in_hw[0] + 2 * padding[0] - filt[0]) // stride[0] + 1
    ow = (in_hw[1] + 2 * padding[1] - filt[1]) // stride[1] + 1
    if oh <= 0 or ow <= 0:
        raise TopologyError(f"non-positive conv output spatial dims ({oh}, {ow})")
    return oh, ow


def _mask_for(net: NetworkTopology, spec: LayerSpec, shape):
    if spec.pruned:
        m = net.masks.get(spec.name)
        if m is None:
            raise TopologyError(f"layer {spec.name} is pruned but has no mask")
        if m.bits.shape != shape:
            raise TopologyError(
                f"mask shape {m.bits.shape} for layer {spec.name} does not match expected {shape}"
            )
        return m.bits
    return np.ones(shape, dtype=bool)


def degree_table(net: NetworkTopology) -> DegreeTable:
    """Count retained connections per node, conv weights weighted by spatial uses."""
    specs = net.layers
    first = specs[0]

    # incoming node space: ("flat", n) or ("image", channels, h, w)
    if first.units is not None:
        state = ("flat", first.units)
        nodes = [[first.name, np.zeros(first.units, dtype=np.int64), np.zeros(first.units, dtype=np.int64)]]
    elif first.channels is not None and first.spatial is not None:
        state = ("image", first.channels, first.spatial[0], first.spatial[1])
        nodes = [[first.name, np.zeros(first.channels, dtype=np.int64), np.zeros(first.channels, dtype=np.int64)]]
    else:
        raise TopologyError("input layer needs units or channels+spatial")

    for spec in specs[1:]:
        if spec.kind == "pool":
            if state[0] != "image":
                raise TopologyError(f"pool layer {spec.name} after non-image layer")
            _, ch, h, w = state
            ph, pw = spec.pool_size
            state = ("image", ch, h // ph, w // pw)
        elif spec.kind == "conv":
            if state[0] != "image":
                raise TopologyError(f"conv layer {spec.name} after non-image layer")
            _, in_ch, h, w = state
            kh, kw = spec.filter
            oh, ow = conv_output_spatial((h, w), spec.filter, spec.stride, spec.padding)
            bits = _mask_for(net, spec, (spec.channels, in_ch, kh, kw))
            uses = oh * ow
            edges = bits.sum(axis=(2, 3)).astype(np.int64) * uses  # [out_ch, in_ch]
            nodes[-1][1] += edges.sum(axis=0)  # previous layer's up-degrees
            nodes.append([spec.name, np.zeros(spec.channels, dtype=np.int64), edges.sum(axis=1)])
            state = ("image", spec.channels, oh, ow)
        elif spec.kind in ("dense", "softmax"):
            if state[0] == "flat":
                in_features = state[1]
            else:
                _, ch, h, w = state
                in_features = ch * h * w
            bits = _mask_for(net, spec, (spec.units, in_features))
            if state[0] == "flat":
                nodes[-1][1] += bits.sum(axis=0).astype(np.int64)
            else:
                # channel-major flatten [ch, h, w]: each conv node owns a block of columns
                per_ch = bits.reshape(spec.units, ch, h * w).sum(axis=(0, 2)).astype(np.int64)
                nodes[-1][1] += per_ch
            if spec.kind == "dense":
                nodes.append([spec.name, np.zeros(spec.units, dtype=np.int64),
                              bits.sum(axis=1).astype(np.int64)])
            # softmax layer gets no node rows of its own
            state = ("flat", spec.units)
        elif spec.kind == "input":
            raise TopologyError("input layer may only appear first")
        else:
            raise TopologyError(f"unsupported layer kind {spec.kind!r}")

    return DegreeTable(layers=[(n, up, down) for n, up, down in nodes])


def prune_magnitude(weights, s: float, layer_name: str = "") -> SparseMask:
    """Prune the floor(s*count) smallest-magnitude weights.

    Ties at the threshold magnitude are broken by flat index ascending
    (lower indices pruned first), making the mask deterministic.
    """
    w = np.asarray(weights, dtype=float)
    if w.size == 0:
        raise DomainError("empty weight array")
    if not (0 < s < 1):
        raise DomainError(f"prune fraction must be in (0, 1), got {s}")
    k = int(math.floor(s * w.size))
    order = np.argsort(np.abs(w).ravel(), kind="stable")
    bits = np.ones(w.size, dtype=bool)
    bits[order[:k]] = False
    return SparseMask(layer_name=layer_name, bits=bits.reshape(w.shape))


def _analytic_mean(p: TplParams) -> float:
    lo, hi = p.require_integer_support()
    k = np.arange(lo, hi + 1, dtype=float)
    w = k**(-p.alpha)
    return float(np.sum(k * w) / np.sum(w))


def _balance(deg, total_target, x_cap, rng):
    """Nudge integer degrees until they sum to total_target, respecting [1, x_cap]."""
    deg = deg.copy()
    diff = int(total_target - deg.sum())
    while diff != 0:
        if diff > 0:
            cand = np.flatnonzero(deg < x_cap)
            step = 1
        else:
            cand = np.flatnonzero(deg > 1)
            step = -1
        if cand.size == 0:
            raise DomainError("cannot balance degree sequences within caps")
        take = min(abs(diff), cand.size)
        idx = rng.choice(cand, size=take, replace=False)
        deg[idx] += step
        diff -= step * take
    return deg


def _pair_bipartite(dl, dr, n_left, n_right, rng):
    """Configuration-model pairing with duplicate-edge rejection.

    Returns (mask, realized_left, realized_right); stubs that cannot be
    placed without duplicating an edge are dropped.
    """
    left_stubs = np.repeat(np.arange(n_left), dl)
    right_stubs = np.repeat(np.arange(n_right), dr)
    mask = np.zeros((n_right, n_left), dtype=bool)
    for _ in range(_SYNTH_MAX_PASSES):
        if left_stubs.size == 0:
            break
        rng.shuffle(right_stubs)
        keys = left_stubs.astype(np.int64) * n_right + right_stubs
        # first occurrence within the batch, and not already an edge
        _, first_idx = np.unique(keys, return_index=True)
        fresh = np.zeros(keys.size, dtype=bool)
        fresh[first_idx] = True
        fresh &= ~mask[right_stubs, left_stubs]
        mask[right_stubs[fresh], left_stubs[fresh]] = True
        left_stubs = left_stubs[~fresh]
        right_stubs = right_stubs[~fresh]
    return mask, mask.sum(axis=0), mask.sum(axis=1)


def synth_masks(sizes, targets, seed: int) -> NetworkTopology:
    """Generate a dense-layer chain whose per-pair degrees follow target TPLs.

    sizes: node counts per layer [n0, ..., nL]; targets: one TplParams per
    adjacent layer pair. Nodes whose realized degree ends more than 2 away
    from target are listed in the returned topology's meta["unrealized"].
    """
    if len(targets) != len(sizes) - 1:
        raise DomainError("need one target TplParams per adjacent layer pair")
    rng = np.random.default_rng(seed)
    seed_seq = np.random.SeedSequence(seed).generate_state(2 * len(targets) + 1)

    layers = [LayerSpec(name="input", kind="input", units=sizes[0])]
    masks = {}
    unrealized = {}
    for i, p in enumerate(targets):
        n_left, n_right = sizes[i], sizes[i + 1]
        mean = _analytic_mean(p)
        if mean > n_right or mean > n_left:
            raise DomainError(
                f"infeasible target for pair {i}: mean degree {mean:.1f} exceeds capacity"
            )
        dl = sample_discrete(p, n_left, int(seed_seq[2 * i])).degrees
        rng.shuffle(dl)
        dr = sample_discrete(p, n_right, int(seed_seq[2 * i + 1])).degrees
        rng.shuffle(dr)
        # match stub totals by nudging the right side
        dr = _balance(dr, dl.sum(), n_left, rng)
        mask, real_l, real_r = _pair_bipartite(dl, dr, n_left, n_right, rng)
        name = f"fc{i + 1}"
        bad_l = np.flatnonzero(np.abs(real_l - dl) > 2)
        bad_r = np.flatnonzero(np.abs(real_r - dr) > 2)
        if bad_l.size or bad_r.size:
            unrealized[name] = {"left": bad_l.tolist(), "right": bad_r.tolist()}
        layers.append(LayerSpec(name=name, kind="dense", units=n_right, pruned=True))
        masks[name] = SparseMask(layer_name=name, bits=mask)
    return NetworkTopology(layers=layers, masks=masks, meta={"unrealized": unrealized})


# ---------------------------------------------------------------------------
# container format, version 1


def save_topology(net: NetworkTopology, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for spec in net.layers:
        mask_file = None
        if spec.pruned:
            mask_file = f"{spec.name}.mask"
            bits = net.masks[spec.name].bits
            (out / mask_file).write_bytes(bits.astype(np.uint8).tobytes())
        entries.append(spec.to_manifest(mask_file))
    manifest = {"version": 1, "layers": entries}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return out / "manifest.json"


def _expected_mask_shape(layers, idx):
    """Shape of layer idx's mask, derived by walking the preceding layers."""
    first = layers[0]
    if first.units is not None:
        state = ("flat", first.units)
    else:
        state = ("image", first.channels, first.spatial[0], first.spatial[1])
    for spec in layers[1:idx + 1]:
        if spec.kind == "pool":
            _, ch, h, w = state
            state = ("image", ch, h // spec.pool_size[0], w // spec.pool_size[1])
        elif spec.kind == "conv":
            _, in_ch, h, w = state
            oh, ow = conv_output_spatial((h, w), spec.filter, spec.stride, spec.padding)
            shape = (spec.channels, in_ch, spec.filter[0], spec.filter[1])
            state = ("image", spec.channels, oh, ow)
        else:
            in_features = state[1] if state[0] == "flat" else state[1] * state[2] * state[3]
            shape = (spec.units, in_features)
            state = ("flat", spec.units)
    return shape


def load_topology(path) -> NetworkTopology:
    """Read a version-1 topology container (manifest.json + raw mask files)."""
    path = Path(path)
    manifest_path = path if path.name == "manifest.json" else path / "manifest.json"
    base = manifest_path.parent
    try:
        manifest = json.loads(manifest_path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise TopologyError(f"cannot read manifest: {e}") from e
    if manifest.get("version") != 1:
        raise TopologyError(f"unsupported container version {manifest.get('version')!r}")
    entries = manifest.get("layers", [])
    if not entries:
        raise TopologyError("manifest has no layers")

    layers = []
    for e in entries:
        layers.append(LayerSpec(
            name=e["name"],
            kind=e["kind"],
            units=e.get("units"),
            channels=e.get("channels"),
            spatial=tuple(e["spatial"]) if "spatial" in e else None,
            filter=tuple(e["filter"]) if "filter" in e else None,
            stride=tuple(e.get("stride", (1, 1))),
            padding=tuple(e.get("padding", (0, 0))),
            pool_size=tuple(e["pool_size"]) if "pool_size" in e else None,
            pruned=bool(e.get("pruned", False)),
        ))

    masks = {}
    for i, (e, spec) in enumerate(zip(entries, layers)):
        if not spec.pruned:
            continue
        mask_file = e.get("mask_file")
        if mask_file is None:
            raise TopologyError(f"layer {spec.name}: pruned but no mask_file")
        shape = _expected_mask_shape(layers, i)
        raw = (base / mask_file).read_bytes()
        expect = int(np.prod(shape))
        if len(raw) != expect:
            raise TopologyError(
                f"layer {spec.name}: mask file has {len(raw)} bytes, expected {expect}"
            )
        bits = np.frombuffer(raw, dtype=np.uint8).reshape(shape).astype(bool)
        masks[spec.name] = SparseMask(layer_name=spec.name, bits=bits)
    return NetworkTopology(layers=layers, masks=masks)
