"""Command-line interface: degree extraction, TPL fitting, attachment simulation.

Exit codes: 0 success, 2 input error, 3 no fittable data.
"""

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .tpl import DomainError, TplParams, DegreeSample, sample_discrete
from .fitting import FitConfig, fit_tpl, bootstrap_pvalue, empirical_ccdf
from .topology import TopologyError, degree_table, load_topology
from .prefatt import AttachmentConfig, AttachmentState, simulate, estimate_delta, estimate_omega

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NO_FIT = 3


def _max_workers():
    env = os.environ.get("SCALEFIT_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _json_dump(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# degrees


def cmd_degrees(args):
    try:
        net = load_topology(args.manifest)
        table = degree_table(net)
        table.check_edge_conservation()
    except (TopologyError, DomainError, OSError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "degrees.csv"
    table.write_csv(csv_path)
    for name, up, down in table.layers:
        tot = up + down
        print(f"{name}: n={tot.size} min={tot.min()} max={tot.max()} mean={tot.mean():.2f}")
    print(f"wrote {csv_path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# fit


def _read_degree_csv(path):
    """Degree CSV (layer,node,up,down,total) -> ordered {layer: totals array}."""
    layers = {}
    with open(path, newline="") as f:
        rdr = csv.DictReader(f)
        if rdr.fieldnames is None or "layer" not in rdr.fieldnames or "total" not in rdr.fieldnames:
            raise DomainError(f"{path}: not a degree CSV (need layer,total columns)")
        for row in rdr:
            layers.setdefault(row["layer"], []).append(int(row["total"]))
    if not layers:
        raise DomainError(f"{path}: empty degree CSV")
    return {k: np.asarray(v, dtype=np.int64) for k, v in layers.items()}


def _load_layer_degrees(inp):
    p = Path(inp)
    if p.is_dir() or p.name == "manifest.json":
        net = load_topology(p)
        table = degree_table(net)
        return {name: up + down for name, up, down in table.layers}
    return _read_degree_csv(p)


def _ccdf_rows(sample: DegreeSample, params: TplParams):
    """Rows (x, empirical_ccdf, model_ccdf) over the fitted support."""
    emp = empirical_ccdf(sample, params)
    lo, hi = int(params.x_min), int(params.x_max)
    xs = np.arange(lo, hi + 1, dtype=float)
    w = xs**(-params.alpha)
    tail = np.cumsum(w[::-1])[::-1]
    model = tail / tail[0]
    return [(int(x), emp[int(x)], float(mv)) for x, mv in zip(xs, model)]


def _write_ccdf_csv(rows, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["x", "empirical_ccdf", "model_ccdf"])
        for x, e, mdl in rows:
            w.writerow([x, repr(e), repr(mdl)])


def _write_ccdf_svg(rows, path, title=""):
    """Self-contained log-log CCDF plot: empirical dots plus model curve."""
    pts = [(math.log10(x), e, m) for x, e, m in rows if x > 0 and e > 0 and m > 0]
    if not pts:
        Path(path).write_text("<svg xmlns='http://www.w3.org/2000/svg'/>")
        return
    xs = [p[0] for p in pts]
    ys = [math.log10(v) for p in pts for v in (p[1], p[2])]
    x0, x1 = min(xs), max(xs) or 1.0
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1
    W, H, pad = 640, 480, 50

    def sx(v):
        return pad + (v - x0) / (x1 - x0) * (W - 2 * pad)

    def sy(v):
        return H - pad - (v - y0) / (y1 - y0) * (H - 2 * pad)

    parts = [
        f"<svg xmlns='http://www.w3.org/2000/svg' width='{W}' height='{H}'>",
        f"<rect width='{W}' height='{H}' fill='white'/>",
        f"<text x='{W // 2}' y='20' text-anchor='middle'>{title}</text>",
    ]
    model_pts = " ".join(
        f"{sx(math.log10(x)):.1f},{sy(math.log10(m)):.1f}" for x, e, m in rows if m > 0
    )
    parts.append(f"<polyline points='{model_pts}' fill='none' stroke='red'/>")
    for x, e, _ in rows:
        if e > 0:
            parts.append(
                f"<circle cx='{sx(math.log10(x)):.1f}' cy='{sy(math.log10(e)):.1f}' r='2' fill='black'/>"
            )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts))


def _fit_one_layer(name, degrees, cfg, gof):
    sample = DegreeSample(degrees, layer_name=name)
    try:
        result = fit_tpl(sample, cfg)
    except DomainError as e:
        return name, None, None, str(e)
    if gof:
        result.p_value = bootstrap_pvalue(sample, result, cfg)
    return name, result, sample, None


def cmd_fit(args):
    try:
        layers = _load_layer_degrees(args.input)
    except (TopologyError, DomainError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    cfg = FitConfig(
        k_percent=args.k,
        alpha_bounds=(1.0 + 1e-6, args.alpha_max),
        n_boot=args.n_boot,
        seed=args.seed,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    results = {}
    with ThreadPoolExecutor(max_workers=_max_workers()) as ex:
        futs = [ex.submit(_fit_one_layer, name, degs, cfg, args.gof)
                for name, degs in layers.items()]
        fitted = [f.result() for f in futs]

    n_ok = 0
    for name, result, sample, err in fitted:
        if err is not None:
            results[name] = {"error": err}
            continue
        n_ok += 1
        results[name] = result.to_dict()
        rows = _ccdf_rows(sample, result.params)
        _write_ccdf_csv(rows, out / f"ccdf_{name}.csv")
        if args.svg:
            _write_ccdf_svg(rows, out / f"ccdf_{name}.svg", title=name)
    _json_dump(results, out / "fit.json")
    for name in layers:
        r = results[name]
        if "error" in r:
            print(f"{name}: unfittable ({r['error']})")
        else:
            msg = (f"{name}: alpha={r['alpha']:.4f} x_min={r['x_min']} "
                   f"x_max={r['x_max']} D={r['ks_stat']:.4f} n_tail={r['n_tail']}")
            if "p_value" in r:
                msg += f" p={r['p_value']:.3f}"
            print(msg)
    return EXIT_OK if n_ok >= 1 else EXIT_NO_FIT


# ---------------------------------------------------------------------------
# ccdf (pure plot-data emission at given parameters)


def cmd_ccdf(args):
    try:
        layers = _read_degree_csv(args.degrees)
        params = TplParams(alpha=args.alpha, x_min=args.xmin, x_max=args.xmax)
        params.require_integer_support()
    except (DomainError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    wrote = 0
    for name, degs in layers.items():
        sample = DegreeSample(degs, layer_name=name)
        try:
            rows = _ccdf_rows(sample, params)
        except DomainError as e:
            print(f"{name}: skipped ({e})")
            continue
        _write_ccdf_csv(rows, out / f"ccdf_{name}.csv")
        wrote += 1
    return EXIT_OK if wrote else EXIT_NO_FIT


# ---------------------------------------------------------------------------
# simulate


def _build_initial_state(spec, seed):
    """Initial multiplicity matrices from a config 'initial' section."""
    sizes = spec["layer_sizes"]
    init = spec["initial"]
    kind = init.get("kind", "regular")
    rng = np.random.default_rng(seed)
    mats = []
    for l in range(len(sizes) - 1):
        n_l, n_r = sizes[l], sizes[l + 1]
        if kind == "regular":
            d = int(init["degree"])
            left = np.repeat(np.arange(n_l), d)
            right = np.repeat(np.arange(n_r), max(1, d * n_l // n_r))[: left.size]
            if right.size != left.size:
                raise DomainError("regular initial state needs d*N_l divisible by N_r")
        elif kind == "tpl":
            p = TplParams(init["alpha"], init["x_min"], init["x_max"])
            ss = np.random.SeedSequence(seed).generate_state(2 * (l + 1) + 2)
            dl = sample_discrete(p, n_l, int(ss[2 * l])).degrees
            dr = sample_discrete(p, n_r, int(ss[2 * l + 1])).degrees
            # trim the heavier side's stubs so totals match
            left = np.repeat(np.arange(n_l), dl)
            right = np.repeat(np.arange(n_r), dr)
            m = min(left.size, right.size)
            rng.shuffle(left)
            rng.shuffle(right)
            left, right = left[:m], right[:m]
        else:
            raise DomainError(f"unknown initial kind {kind!r}")
        rng.shuffle(right)
        mat = np.zeros((n_l, n_r), dtype=np.int64)
        np.add.at(mat, (left, right), 1)
        mats.append(mat)
    return AttachmentState(matrices=mats)


def _refit_layer(state, l):
    sample = DegreeSample(state.degrees(l))
    try:
        return fit_tpl(sample).to_dict()
    except DomainError as e:
        return {"error": str(e)}


def cmd_simulate(args):
    try:
        spec = json.loads(Path(args.config).read_text())
        seed = args.seed if args.seed is not None else spec.get("seed", 0)
        cfg = AttachmentConfig(
            rates=tuple(spec["rates"]),
            timesteps=int(spec.get("timesteps", 1)),
            edges_per_step_mode=args.mode or spec.get("mode", "expected-value"),
            allow_multi_edges=bool(spec.get("allow_multi_edges", True)),
            seed=seed,
        )
        initial = _build_initial_state(spec, seed)
        states = simulate(initial, cfg)
    except (DomainError, TopologyError, OSError, KeyError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    with open(out / "trajectory.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["t", "layer", "node", "degree"])
        for st in states:
            for l in range(st.n_layers):
                for i, d in enumerate(st.degrees(l)):
                    w.writerow([st.time, l, i, int(d)])

    for l in range(len(states[0].matrices)):
        dh = estimate_delta(states[0], states[1], l)
        with open(out / f"delta_hat_pair{l}.csv", "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["d1", "d2", "delta_hat"])
            for (d1, d2), v in sorted(dh.items()):
                w.writerow([d1, d2, repr(v)])
    for l in range(states[0].n_layers):
        oh = estimate_omega(states[0], states[1], l)
        with open(out / f"omega_hat_layer{l}.csv", "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["d", "omega_hat"])
            for d, v in sorted(oh.items()):
                w.writerow([d, repr(v)])

    refit = {}
    for l in range(states[0].n_layers):
        refit[f"layer{l}"] = {
            "t0": _refit_layer(states[0], l),
            "tT": _refit_layer(states[-1], l),
        }
    refit["dropped_edges"] = states[-1].dropped
    _json_dump(refit, out / "refit.json")
    print(f"simulated {cfg.timesteps} steps; outputs in {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="scalefit",
                                description="Truncated power-law analysis of sparse network topologies")
    sub = p.add_subparsers(dest="cmd", required=True)

    d = sub.add_parser("degrees", help="extract per-node degrees from a topology container")
    d.add_argument("manifest")
    d.add_argument("--out", default=".")
    d.set_defaults(func=cmd_degrees)

    f = sub.add_parser("fit", help="fit a TPL per layer from a degree CSV or container")
    f.add_argument("input")
    f.add_argument("--k", type=float, default=30.0)
    f.add_argument("--alpha-max", dest="alpha_max", type=float, default=20.0)
    f.add_argument("--gof", action="store_true")
    f.add_argument("--n-boot", dest="n_boot", type=int, default=100)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--svg", action="store_true")
    f.add_argument("--out", default=".")
    f.set_defaults(func=cmd_fit)

    c = sub.add_parser("ccdf", help="emit CCDF plot data for given parameters")
    c.add_argument("degrees")
    c.add_argument("--alpha", type=float, required=True)
    c.add_argument("--xmin", type=int, required=True)
    c.add_argument("--xmax", type=int, required=True)
    c.add_argument("--out", default=".")
    c.set_defaults(func=cmd_ccdf)

    s = sub.add_parser("simulate", help="run the layered attachment simulation")
    s.add_argument("config")
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--mode", choices=["expected-value", "poisson"], default=None)
    s.add_argument("--out", default=".")
    s.set_defaults(func=cmd_simulate)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
