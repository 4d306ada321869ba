import json

import numpy as np
import pytest

from scalefit import (
    DegreeSample,
    LayerSpec,
    NetworkTopology,
    TplParams,
    ks_statistic,
    sample_discrete,
    save_topology,
    synth_masks,
)
from scalefit.cli import EXIT_INPUT, EXIT_NO_FIT, EXIT_OK, main


@pytest.fixture()
def container(tmp_path):
    net = synth_masks([400, 400], [TplParams(2.5, 4, 60)], seed=0)
    save_topology(net, tmp_path / "net")
    return tmp_path / "net"


def write_degree_csv(path, degrees, layer="fc1"):
    lines = ["layer,node,up,down,total"]
    for i, d in enumerate(degrees):
        lines.append(f"{layer},{i},{d},0,{d}")
    path.write_text("\n".join(lines) + "\n")


class TestDegrees:
    def test_writes_csv_and_summary(self, container, tmp_path, capsys):
        out = tmp_path / "deg"
        assert main(["degrees", str(container), "--out", str(out)]) == EXIT_OK
        lines = (out / "degrees.csv").read_text().strip().splitlines()
        assert lines[0] == "layer,node,up,down,total"
        assert len(lines) == 1 + 800
        stdout = capsys.readouterr().out
        assert "input:" in stdout and "fc1:" in stdout

    def test_accepts_manifest_path(self, container, tmp_path):
        out = tmp_path / "deg2"
        code = main(["degrees", str(container / "manifest.json"), "--out", str(out)])
        assert code == EXIT_OK

    def test_missing_container(self, tmp_path, capsys):
        code = main(["degrees", str(tmp_path / "nope"), "--out", str(tmp_path)])
        assert code == EXIT_INPUT
        assert "error" in capsys.readouterr().err

    def test_corrupt_mask(self, container, tmp_path, capsys):
        mask = container / "fc1.mask"
        mask.write_bytes(mask.read_bytes()[:-1])
        assert main(["degrees", str(container), "--out", str(tmp_path / "x")]) == EXIT_INPUT


class TestFit:
    def test_fit_from_csv(self, tmp_path):
        degs = sample_discrete(TplParams(2.5, 5, 200), 20_000, seed=1).degrees
        src = tmp_path / "degrees.csv"
        write_degree_csv(src, degs)
        out = tmp_path / "fit"
        assert main(["fit", str(src), "--out", str(out)]) == EXIT_OK
        report = json.loads((out / "fit.json").read_text())
        assert abs(report["fc1"]["alpha"] - 2.5) < 0.15
        assert (out / "ccdf_fc1.csv").exists()

    def test_report_round_trips_ks(self, tmp_path):
        degs = sample_discrete(TplParams(2.5, 5, 200), 10_000, seed=2).degrees
        src = tmp_path / "degrees.csv"
        write_degree_csv(src, degs)
        out = tmp_path / "fit"
        main(["fit", str(src), "--out", str(out)])
        r = json.loads((out / "fit.json").read_text())["fc1"]
        params = TplParams(r["alpha"], r["x_min"], r["x_max"])
        tail = degs[(degs >= r["x_min"]) & (degs <= r["x_max"])]
        assert ks_statistic(DegreeSample(tail), params) == pytest.approx(
            r["ks_stat"], rel=1e-9)

    def test_fit_from_container(self, container, tmp_path):
        out = tmp_path / "fit"
        assert main(["fit", str(container), "--out", str(out)]) == EXIT_OK
        report = json.loads((out / "fit.json").read_text())
        assert set(report) == {"input", "fc1"}

    def test_gof_flag_adds_p_value(self, tmp_path):
        degs = sample_discrete(TplParams(2.5, 5, 50), 600, seed=3).degrees
        src = tmp_path / "degrees.csv"
        write_degree_csv(src, degs)
        out = tmp_path / "fit"
        main(["fit", str(src), "--gof", "--n-boot", "20", "--out", str(out)])
        r = json.loads((out / "fit.json").read_text())["fc1"]
        assert 0.0 <= r["p_value"] <= 1.0

    def test_svg_flag(self, tmp_path):
        degs = sample_discrete(TplParams(2.5, 5, 100), 3000, seed=4).degrees
        src = tmp_path / "degrees.csv"
        write_degree_csv(src, degs)
        out = tmp_path / "fit"
        main(["fit", str(src), "--svg", "--out", str(out)])
        svg = (out / "ccdf_fc1.svg").read_text()
        assert svg.startswith("<svg") and "polyline" in svg

    def test_unfittable_layer_reported(self, tmp_path, capsys):
        src = tmp_path / "degrees.csv"
        write_degree_csv(src, [7] * 100)
        out = tmp_path / "fit"
        assert main(["fit", str(src), "--out", str(out)]) == EXIT_NO_FIT
        r = json.loads((out / "fit.json").read_text())["fc1"]
        assert "error" in r
        assert "unfittable" in capsys.readouterr().out

    def test_mixed_layers_exit_ok(self, tmp_path):
        degs = sample_discrete(TplParams(2.5, 5, 100), 3000, seed=5).degrees
        src = tmp_path / "degrees.csv"
        lines = ["layer,node,up,down,total"]
        for i, d in enumerate(degs):
            lines.append(f"good,{i},{d},0,{d}")
        for i in range(50):
            lines.append(f"flat,{i},7,0,7")
        src.write_text("\n".join(lines) + "\n")
        out = tmp_path / "fit"
        assert main(["fit", str(src), "--out", str(out)]) == EXIT_OK
        report = json.loads((out / "fit.json").read_text())
        assert "alpha" in report["good"] and "error" in report["flat"]

    def test_bad_input_file(self, tmp_path):
        bad = tmp_path / "junk.csv"
        bad.write_text("not,a,degree\nfile,at,all\n")
        assert main(["fit", str(bad), "--out", str(tmp_path / "o")]) == EXIT_INPUT

    def test_thread_env_respected(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SCALEFIT_THREADS", "1")
        degs = sample_discrete(TplParams(2.5, 5, 100), 2000, seed=6).degrees
        src = tmp_path / "degrees.csv"
        write_degree_csv(src, degs)
        assert main(["fit", str(src), "--out", str(tmp_path / "o")]) == EXIT_OK


class TestCcdf:
    def test_emits_plot_data(self, tmp_path):
        degs = sample_discrete(TplParams(2.5, 5, 50), 2000, seed=7).degrees
        src = tmp_path / "degrees.csv"
        write_degree_csv(src, degs)
        out = tmp_path / "ccdf"
        code = main(["ccdf", str(src), "--alpha", "2.5", "--xmin", "5",
                     "--xmax", "50", "--out", str(out)])
        assert code == EXIT_OK
        lines = (out / "ccdf_fc1.csv").read_text().strip().splitlines()
        assert lines[0] == "x,empirical_ccdf,model_ccdf"
        assert len(lines) == 1 + 46
        first = lines[1].split(",")
        assert first[0] == "5" and float(first[1]) == 1.0 and float(first[2]) == 1.0

    def test_no_overlap_exit(self, tmp_path):
        src = tmp_path / "degrees.csv"
        write_degree_csv(src, [100, 110, 120])
        code = main(["ccdf", str(src), "--alpha", "2.0", "--xmin", "2",
                     "--xmax", "9", "--out", str(tmp_path / "o")])
        assert code == EXIT_NO_FIT


class TestSimulate:
    @staticmethod
    def config(tmp_path, **over):
        spec = {
            "layer_sizes": [40, 40],
            "rates": [2.0],
            "timesteps": 3,
            "initial": {"kind": "regular", "degree": 4},
        }
        spec.update(over)
        p = tmp_path / "sim.json"
        p.write_text(json.dumps(spec))
        return p

    def test_outputs(self, tmp_path):
        cfgp = self.config(tmp_path)
        out = tmp_path / "sim"
        assert main(["simulate", str(cfgp), "--seed", "1", "--out", str(out)]) == EXIT_OK
        traj = (out / "trajectory.csv").read_text().strip().splitlines()
        assert traj[0] == "t,layer,node,degree"
        assert len(traj) == 1 + 4 * 2 * 40  # t=0..3, 2 layers, 40 nodes
        assert (out / "delta_hat_pair0.csv").exists()
        assert (out / "omega_hat_layer0.csv").exists()
        assert (out / "omega_hat_layer1.csv").exists()
        refit = json.loads((out / "refit.json").read_text())
        assert "layer0" in refit and "dropped_edges" in refit

    def test_tpl_initial_state(self, tmp_path):
        cfgp = self.config(
            tmp_path, layer_sizes=[200, 200],
            initial={"kind": "tpl", "alpha": 2.3, "x_min": 3, "x_max": 40})
        out = tmp_path / "sim"
        assert main(["simulate", str(cfgp), "--seed", "2", "--out", str(out)]) == EXIT_OK

    def test_mode_flag(self, tmp_path):
        cfgp = self.config(tmp_path)
        out = tmp_path / "sim"
        code = main(["simulate", str(cfgp), "--seed", "0", "--mode", "poisson",
                     "--out", str(out)])
        assert code == EXIT_OK

    def test_malformed_config(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        p.write_text("{broken")
        assert main(["simulate", str(p), "--out", str(tmp_path / "o")]) == EXIT_INPUT
        assert "error" in capsys.readouterr().err

    def test_missing_keys(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text(json.dumps({"layer_sizes": [10, 10]}))
        assert main(["simulate", str(p), "--out", str(tmp_path / "o")]) == EXIT_INPUT


class TestDeterminism:
    @staticmethod
    def tree_bytes(root):
        return {p.name: p.read_bytes() for p in sorted(root.iterdir())}

    def test_fit_byte_identical(self, tmp_path):
        degs = sample_discrete(TplParams(2.5, 5, 100), 5000, seed=8).degrees
        src = tmp_path / "degrees.csv"
        write_degree_csv(src, degs)
        outs = []
        for d in ("a", "b"):
            out = tmp_path / d
            main(["fit", str(src), "--gof", "--n-boot", "10", "--seed", "4",
                  "--svg", "--out", str(out)])
            outs.append(self.tree_bytes(out))
        assert outs[0] == outs[1]

    def test_simulate_byte_identical(self, tmp_path):
        cfgp = TestSimulate.config(tmp_path)
        outs = []
        for d in ("a", "b"):
            out = tmp_path / d
            main(["simulate", str(cfgp), "--seed", "3", "--out", str(out)])
            outs.append(self.tree_bytes(out))
        assert outs[0] == outs[1]

    def test_degrees_byte_identical(self, tmp_path, container):
        outs = []
        for d in ("a", "b"):
            out = tmp_path / d
            main(["degrees", str(container), "--out", str(out)])
            outs.append(self.tree_bytes(out))
        assert outs[0] == outs[1]
