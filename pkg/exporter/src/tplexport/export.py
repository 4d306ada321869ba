"""Checkpoint-to-container export.

Reads a framework checkpoint (numpy .npz or a torch state dict) plus an
architecture description (arch.json) and writes a version-1 topology
container: manifest.json plus one raw mask file per pruned layer, one byte
per weight (0 = pruned), row-major, channel-major flatten between conv and
dense layers.

Masks come from one of two sources:
  - an explicit prune fraction s: the floor(s * count) smallest-magnitude
    weights are dropped, ties at the threshold broken by flat index
    ascending (lower indices pruned first);
  - an already-sparse checkpoint: mask = |w| > eps (eps defaults to 0,
    i.e. exact stored zeros).

The network's output layer is always exported fully retained. Grouped
convolutions are expanded to block-diagonal ungrouped masks.
"""

import json
import math
from pathlib import Path

import numpy as np


class ExportError(ValueError):
    """Bad architecture description, checkpoint, or shape mismatch."""


PARAM_KINDS = ("dense", "conv", "softmax")


def magnitude_mask(weights, s):
    """Retain-mask dropping the floor(s*count) smallest-magnitude weights.

    Ties at the cut magnitude are pruned in flat-index-ascending order so
    the result is deterministic.
    """
    w = np.asarray(weights, dtype=float)
    if not (0 < s < 1):
        raise ExportError(f"prune fraction must be in (0, 1), got {s}")
    k = int(math.floor(s * w.size))
    order = np.argsort(np.abs(w).ravel(), kind="stable")
    mask = np.ones(w.size, dtype=bool)
    mask[order[:k]] = False
    return mask.reshape(w.shape)


def load_checkpoint(path):
    """Checkpoint file -> {tensor name: float ndarray}.

    Supports numpy archives (.npz) and torch files (.pt/.pth/.bin) holding a
    state dict, possibly nested under a 'state_dict' key.
    """
    p = Path(path)
    if not p.exists():
        raise ExportError(f"checkpoint not found: {p}")
    suffix = p.suffix.lower()
    if suffix == ".npz":
        with np.load(p) as z:
            return {k: np.asarray(z[k], dtype=float) for k in z.files}
    if suffix in (".pt", ".pth", ".bin"):
        try:
            import torch
        except ImportError as e:  # pragma: no cover
            raise ExportError("torch is required to read this checkpoint") from e
        obj = torch.load(p, map_location="cpu", weights_only=True)
        if isinstance(obj, dict) and "state_dict" in obj and isinstance(obj["state_dict"], dict):
            obj = obj["state_dict"]
        if not isinstance(obj, dict):
            raise ExportError(f"{p}: expected a state dict, got {type(obj).__name__}")
        return {k: v.detach().cpu().numpy().astype(float)
                for k, v in obj.items() if hasattr(v, "detach")}
    raise ExportError(f"unsupported checkpoint format: {p.name}")


def _load_arch(path):
    try:
        arch = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ExportError(f"cannot read architecture description: {e}") from e
    layers = arch.get("layers")
    if not layers:
        raise ExportError("architecture description has no layers")
    if layers[0].get("kind") != "input":
        raise ExportError("first layer must be kind 'input'")
    return layers


def _conv_out(hw, filt, stride, padding):
    oh = (hw[0] + 2 * padding[0] - filt[0]) // stride[0] + 1
    ow = (hw[1] + 2 * padding[1] - filt[1]) // stride[1] + 1
    if oh <= 0 or ow <= 0:
        raise ExportError(f"non-positive conv output spatial dims ({oh}, {ow})")
    return oh, ow


def _walk_shapes(layers):
    """Expected full (ungrouped) mask shape per parameterized layer name."""
    first = layers[0]
    if "units" in first:
        state = ("flat", int(first["units"]))
    elif "channels" in first and "spatial" in first:
        state = ("image", int(first["channels"]), *map(int, first["spatial"]))
    else:
        raise ExportError("input layer needs units or channels+spatial")
    shapes = {}
    for e in layers[1:]:
        kind = e.get("kind")
        if kind == "pool":
            if state[0] != "image":
                raise ExportError(f"pool layer {e.get('name')} after non-image layer")
            ph, pw = e["pool_size"]
            state = ("image", state[1], state[2] // ph, state[3] // pw)
        elif kind == "conv":
            if state[0] != "image":
                raise ExportError(f"conv layer {e.get('name')} after non-image layer")
            filt = tuple(e["filter"])
            stride = tuple(e.get("stride", (1, 1)))
            padding = tuple(e.get("padding", (0, 0)))
            out_ch = int(e["channels"])
            shapes[e["name"]] = (out_ch, state[1], filt[0], filt[1])
            oh, ow = _conv_out(state[2:], filt, stride, padding)
            state = ("image", out_ch, oh, ow)
        elif kind in ("dense", "softmax"):
            n_in = state[1] if state[0] == "flat" else state[1] * state[2] * state[3]
            shapes[e["name"]] = (int(e["units"]), n_in)
            state = ("flat", int(e["units"]))
        else:
            raise ExportError(f"unsupported layer kind {kind!r} in layer {e.get('name')}")
    return shapes


def _layer_mask(entry, tensors, full_shape, s, eps):
    """Retain-mask of the declared full shape from the layer's weight tensor."""
    tname = entry.get("tensor")
    if tname is None:
        raise ExportError(f"layer {entry['name']}: parameterized layer needs a 'tensor' name")
    if tname not in tensors:
        raise ExportError(f"layer {entry['name']}: tensor {tname!r} not in checkpoint")
    w = tensors[tname]
    groups = int(entry.get("groups", 1))
    if groups == 1:
        if w.shape != full_shape:
            raise ExportError(
                f"layer {entry['name']}: tensor {tname!r} has shape {tuple(w.shape)}, "
                f"expected {full_shape}"
            )
        if s is not None:
            return magnitude_mask(w, s)
        return np.abs(w) > eps
    # grouped conv: tensor is (out, in/groups, kh, kw); expand block-diagonally
    if entry.get("kind") != "conv":
        raise ExportError(f"layer {entry['name']}: groups only supported for conv layers")
    out_ch, in_ch, kh, kw = full_shape
    if out_ch % groups or in_ch % groups:
        raise ExportError(f"layer {entry['name']}: channels not divisible by groups={groups}")
    want = (out_ch, in_ch // groups, kh, kw)
    if w.shape != want:
        raise ExportError(
            f"layer {entry['name']}: tensor {tname!r} has shape {tuple(w.shape)}, "
            f"expected {want} for groups={groups}"
        )
    small = magnitude_mask(w, s) if s is not None else np.abs(w) > eps
    mask = np.zeros(full_shape, dtype=bool)
    og, ig = out_ch // groups, in_ch // groups
    for g in range(groups):
        mask[g * og:(g + 1) * og, g * ig:(g + 1) * ig] = small[g * og:(g + 1) * og]
    return mask


def export(checkpoint_path, arch_path, out_dir, s=None, eps=0.0):
    """Write the topology container for one checkpoint; returns the manifest path."""
    layers = _load_arch(arch_path)
    tensors = load_checkpoint(checkpoint_path)
    shapes = _walk_shapes(layers)
    param_names = [e["name"] for e in layers if e.get("kind") in PARAM_KINDS]
    if not param_names:
        raise ExportError("architecture has no parameterized layers")
    output_name = param_names[-1]

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for e in layers:
        entry = {"name": e["name"], "kind": e["kind"]}
        for key in ("units", "channels"):
            if key in e:
                entry[key] = int(e[key])
        for key in ("spatial", "filter", "pool_size"):
            if key in e:
                entry[key] = list(e[key])
        if e["kind"] == "conv":
            entry["stride"] = list(e.get("stride", (1, 1)))
            entry["padding"] = list(e.get("padding", (0, 0)))
        if e["kind"] in PARAM_KINDS and e["name"] != output_name:
            mask = _layer_mask(e, tensors, shapes[e["name"]], s, eps)
            mask_file = f"{e['name']}.mask"
            (out / mask_file).write_bytes(mask.astype(np.uint8).tobytes())
            entry["pruned"] = True
            entry["mask_file"] = mask_file
        else:
            # the output layer is always exported fully retained
            entry["pruned"] = False
        entries.append(entry)
    manifest = {"version": 1, "layers": entries}
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest_path
