import copy
import json
import pathlib

import numpy as np
import pytest

from specmeasure.cli import (
    apply_overrides,
    convergence_study,
    main,
    parse_epsilons,
    read_csv,
    run,
)
from specmeasure.config import ConfigError, RunConfig, validate_config
from specmeasure.kernels import RationalKernel, kernel_scaled

CONFIGS = pathlib.Path(__file__).resolve().parent.parent / "configs"
SHIPPED = sorted(p.name for p in CONFIGS.glob("*.json"))


def load(name):
    return json.loads((CONFIGS / name).read_text())


def write_config(tmp_path, doc, name="cfg.json"):
    out = tmp_path / name
    doc = copy.deepcopy(doc)
    doc["output"]["path"] = str(tmp_path / "out.csv")
    out.write_text(json.dumps(doc))
    return out


def small_rank_one():
    doc = load("rank_one_plus.json")
    doc["grid"] = {"min": -1, "max": 1, "n": 9}
    doc["solver"] = {"tol": 1e-8, "init_dofs": 64, "max_dofs": 4096}
    return doc


class TestRun:
    def test_constant_config_reproduces_kernel(self, tmp_path):
        cfg = write_config(tmp_path, load("constant.json"))
        assert main(["run", "--config", str(cfg)]) == 0
        data = read_csv(tmp_path / "out.csv")
        k = RationalKernel.equispaced(4)
        np.testing.assert_array_equal(data["x"], np.linspace(-1, 5, 601))
        np.testing.assert_allclose(data["mu"], kernel_scaled(k, data["x"] - 2, 0.1), rtol=0, atol=1e-10)
        assert np.all(data["dofs_max"] == 128)

    def test_csv_format(self, tmp_path):
        cfg = write_config(tmp_path, small_rank_one())
        assert main(["run", "--config", str(cfg)]) == 0
        raw = (tmp_path / "out.csv").read_bytes()
        assert raw.startswith(b"x,mu,err_est,dofs_max\n")
        assert b"\r" not in raw
        assert raw.count(b"\n") == 10

    def test_csv_round_trip_is_bit_exact(self, tmp_path):
        doc = small_rank_one()
        doc["output"]["path"] = str(tmp_path / "out.csv")
        status, result = run(doc)
        assert status == 0
        data = read_csv(tmp_path / "out.csv")
        np.testing.assert_array_equal(data["x"], result.points)
        np.testing.assert_array_equal(data["mu"], result.values)
        np.testing.assert_array_equal(data["err_est"], result.err_est)
        np.testing.assert_array_equal(data["dofs_max"], result.dofs_max)

    def test_sidecar(self, tmp_path):
        cfg = write_config(tmp_path, small_rank_one())
        main(["run", "--config", str(cfg)])
        meta = json.loads((tmp_path / "out.csv.meta.json").read_text())
        for key in ("kernel", "normalization_constant", "warnings", "wall_time_s", "epsilon"):
            assert key in meta
        assert meta["kernel"]["order"] == 4
        assert len(meta["kernel"]["poles"]) == len(meta["kernel"]["residues"]) == 4
        assert meta["normalization_constant"] == pytest.approx(1.0, abs=1e-12)
        assert meta["warnings"] == []

    def test_json_output(self, tmp_path):
        doc = small_rank_one()
        doc["output"]["format"] = "json"
        cfg = write_config(tmp_path, doc)
        assert main(["run", "--config", str(cfg)]) == 0
        out = json.loads((tmp_path / "out.csv").read_text())
        assert len(out["mu"]) == 9 and len(out["dofs"][0]) == 4

    def test_identical_bytes_across_threads_and_runs(self, tmp_path):
        cfg = write_config(tmp_path, small_rank_one())
        outputs = []
        for workers in (1, 4, 1):
            path = tmp_path / f"w{workers}_{len(outputs)}.csv"
            assert main(["run", "--config", str(cfg), "--workers", str(workers), "--output", str(path)]) == 0
            outputs.append(path.read_bytes())
        assert outputs[0] == outputs[1] == outputs[2]

    def test_overrides(self, tmp_path):
        cfg = write_config(tmp_path, load("constant.json"))
        out = tmp_path / "override.csv"
        argv = ["run", "--config", str(cfg), "--epsilon", "0.2", "--order", "2", "--grid", "0:4:5",
                "--output", str(out)]
        assert main(argv) == 0
        data = read_csv(out)
        np.testing.assert_array_equal(data["x"], [0, 1, 2, 3, 4])
        k = RationalKernel.equispaced(2)
        np.testing.assert_allclose(data["mu"], kernel_scaled(k, data["x"] - 2, 0.2), atol=1e-10)
        meta = json.loads((tmp_path / "override.csv.meta.json").read_text())
        assert meta["epsilon"] == 0.2 and meta["kernel"]["order"] == 2

    def test_bad_grid_override(self, tmp_path, capsys):
        cfg = write_config(tmp_path, load("constant.json"))
        assert main(["run", "--config", str(cfg), "--grid", "0:4"]) == 1
        assert "--grid" in capsys.readouterr().err
        assert not (tmp_path / "out.csv").exists()

    def test_warnings_give_exit_two_with_output(self, tmp_path, capsys):
        doc = load("laplacian.json")
        doc["epsilon"] = 1e-8
        doc["problem"]["scale"] = 1
        doc["grid"] = {"min": 1, "max": 1, "n": 1}
        doc["solver"] = {"init_dofs": 64, "max_dofs": 4096}
        cfg = write_config(tmp_path, doc)
        assert main(["run", "--config", str(cfg)]) == 2
        assert (tmp_path / "out.csv").exists()
        meta = json.loads((tmp_path / "out.csv.meta.json").read_text())
        assert any(w.startswith("NoConvergence") for w in meta["warnings"])
        assert "NoConvergence" in capsys.readouterr().err

    @pytest.mark.parametrize("name", SHIPPED)
    def test_shipped_configs_run_cleanly(self, tmp_path, name):
        doc = load(name)
        doc["grid"]["n"] = min(doc["grid"]["n"], 5)
        doc["output"]["path"] = str(tmp_path / "out.csv")
        status, result = run(doc)
        assert status == 0, result.warnings
        assert np.all(result.imag_residual <= 1e-10)


class TestConfigErrors:
    def test_malformed_json(self, tmp_path, capsys):
        cfg = tmp_path / "bad.json"
        cfg.write_text('{"problem": ')
        assert main(["run", "--config", str(cfg), "--output", str(tmp_path / "o.csv")]) == 1
        assert "malformed JSON" in capsys.readouterr().err
        assert list(tmp_path.iterdir()) == [cfg]

    def test_not_utf8(self, tmp_path):
        cfg = tmp_path / "bad.json"
        cfg.write_bytes(b'{"x": "\xff"}')
        assert main(["run", "--config", str(cfg)]) == 1

    def test_missing_file(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "nope.json")]) == 1

    @pytest.mark.parametrize("mutate, path", [
        (lambda d: d.update(epsilon=0), "epsilon"),
        (lambda d: d["grid"].update(min=3, max=1), "grid"),
        (lambda d: d["kernel"].update(poles=[[0, 1], [0, 1], [1, 1], [2, 1]]), "kernel.poles"),
        (lambda d: d["kernel"].update(poles=[[0, -1], [1, 1], [2, 1], [3, 1]]), "kernel.poles"),
        (lambda d: d["problem"]["terms"][0].update(coefficient="2/(1+z^2)"), "problem.terms[0].coefficient"),
        (lambda d: d["f"].update(expr="sqrt(2/pi)/(1+x^"), "f.expr"),
        (lambda d: d["problem"].update(backend="fourier1d"), "problem"),
        (lambda d: d["problem"].update(mode="pencil"), "problem"),
        (lambda d: d["problem"]["terms"].append({"kind": "derivative", "order": 3}), "problem.terms[2]"),
        (lambda d: d["problem"]["terms"].append({"kind": "symbol", "symbol": "k^2"}), "problem.terms[2]"),
        (lambda d: d.update(solver={"init_dofs": 48}), "solver.init_dofs"),
    ])
    def test_semantic_errors_name_the_field(self, mutate, path):
        doc = small_rank_one()
        mutate(doc)
        with pytest.raises(ConfigError) as info:
            RunConfig.from_dict(doc)
        assert info.value.path.startswith(path)


def leaf_paths(node, prefix=()):
    if isinstance(node, dict):
        for k, v in node.items():
            yield from leaf_paths(v, prefix + (k,))
    elif isinstance(node, list):
        for i, v in enumerate(node):
            yield from leaf_paths(v, prefix + (i,))
    else:
        yield prefix


def object_paths(node, prefix=()):
    if isinstance(node, dict):
        yield prefix
        for k, v in node.items():
            yield from object_paths(v, prefix + (k,))
    elif isinstance(node, list):
        for i, v in enumerate(node):
            yield from object_paths(v, prefix + (i,))


def dotted(parts):
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else p)
    return out or "<root>"


def get(doc, parts):
    for p in parts:
        doc = doc[p]
    return doc


def corruptions():
    """Every single-field corruption of a full-featured valid config."""
    base = load("laplacian_hilbert.json")
    base["problem"]["terms"][1]["factors"] = ["exp(-x^2)"]
    base["kernel"]["poles"] = [[-0.6, 1], [-0.2, 1], [0.2, 1], [0.6, 1]]
    base["solver"]["fixed_dofs"] = 256
    base["workers"] = 2
    base["output"]["format"] = "csv"
    validate_config(base)
    cases = []
    for p in leaf_paths(base):
        doc = copy.deepcopy(base)
        get(doc, p[:-1])[p[-1]] = {"bogus": True}
        cases.append(("wrong-type " + dotted(p), doc, {dotted(p)}, None))
    for p in object_paths(base):
        obj = get(base, p)
        doc = copy.deepcopy(base)
        get(doc, p)["bogus"] = 1
        cases.append(("unknown-key " + dotted(p), doc, {dotted(p)}, "bogus"))
        for key in obj:
            doc = copy.deepcopy(base)
            del get(doc, p)[key]
            if _still_valid(doc):
                continue
            cases.append((f"missing {dotted(p + (key,))}", doc, {dotted(p), dotted(p + (key,))}, key))
    return cases


def _still_valid(doc):
    try:
        validate_config(doc)
        return True
    except ConfigError:
        return False


CORRUPTIONS = corruptions()


@pytest.mark.parametrize("label, doc, paths, needle", CORRUPTIONS, ids=[c[0] for c in CORRUPTIONS])
def test_every_single_field_corruption_exits_one(tmp_path, capsys, label, doc, paths, needle):
    cfg = tmp_path / "cfg.json"
    doc = copy.deepcopy(doc)
    out = tmp_path / "out.csv"
    if isinstance(doc.get("output"), dict) and "path" in doc["output"] and doc["output"]["path"] != {"bogus": True}:
        doc["output"]["path"] = str(out)
    cfg.write_text(json.dumps(doc))
    assert main(["run", "--config", str(cfg)]) == 1
    err = capsys.readouterr().err
    assert err.startswith("config error: ")
    reported, _, message = err[len("config error: "):].partition(": ")
    assert reported in paths
    if needle is not None:
        assert needle in message or reported.endswith(needle)
    assert not out.exists()


class TestSweep:
    def test_parse_epsilons(self):
        assert parse_epsilons("1e-1,1e-1.5, 0.01") == pytest.approx([0.1, 10 ** -1.5, 0.01], rel=1e-15)
        for bad in ("abc", "-1", "0", "1e-1,,2"):
            with pytest.raises(ConfigError):
                parse_epsilons(bad)

    def test_needs_three_epsilons(self, tmp_path, capsys):
        cfg = write_config(tmp_path, load("laplacian.json"))
        assert main(["sweep", "--config", str(cfg), "--epsilons", "1e-1,1e-2", "--point", "1"]) == 1
        assert "at least 3" in capsys.readouterr().err

    def test_laplacian_reference_requires_laplacian(self):
        with pytest.raises(ConfigError):
            convergence_study(small_rank_one(), [0.1, 0.05, 0.02], 0.5, "laplacian")

    def test_second_order_slope(self, tmp_path, capsys):
        cfg = write_config(tmp_path, load("laplacian.json"))
        argv = ["sweep", "--config", str(cfg), "--epsilons", "1e-1,1e-1.5,1e-2,1e-2.5",
                "--point", "1", "--order", "2"]
        assert main(argv) == 0
        lines = capsys.readouterr().out.strip().split("\n")
        assert lines[0] == "epsilon,mu,reference,rel_error"
        assert len(lines) == 6
        slope = float(lines[-1].split(",")[1])
        assert 1.5 <= slope <= 2.5

    def test_sweep_with_hilbert_coupling(self):
        doc = load("laplacian_hilbert.json")
        sweep = convergence_study(apply_overrides(doc, order=2), [0.1, 10 ** -1.5, 0.01], 2.0)
        assert 1.5 <= sweep.slope <= 2.5

    def test_dense_reference(self, tmp_path):
        doc = small_rank_one()
        sweep = convergence_study(doc, [0.2, 0.1, 0.05], 0.5, "dense")
        assert np.all(sweep.rel_errors <= 1e-8)
        out = tmp_path / "table.csv"
        cfg = write_config(tmp_path, doc)
        assert main(["sweep", "--config", str(cfg), "--epsilons", "0.2,0.1,0.05", "--point", "0.5",
                     "--reference", "dense", "--output", str(out)]) == 0
        assert out.read_text().startswith("epsilon,mu,reference,rel_error\n")
