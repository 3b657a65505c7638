"""
Run configs, the command handlers and the artifacts they leave behind.
"""

import json

import pytest

COMPARE = """\
mode = "compare"
label = "cmp"
seed = 7

[dataset]
kind = "haar-unitary"
n_qubits = 1
size = 4

[gs1]
label = "HT"
gates = ["H1", "T1"]

[gs2]
label = "HS"
gates = ["H1", "S1"]

[pipeline]
basis_depth = 3
recursion = 1
"""


def _write(tmp_path, text, name="run.toml"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_defaults(tmp_path):
    from src.models.run_config import Mode, parse_config

    cfg = parse_config(_write(tmp_path, COMPARE))
    assert cfg.mode == Mode.COMPARE
    assert cfg.weights == [50.0, 1.0, 1.0, 1.0, 0.0]
    assert cfg.pipeline.rd_trials == 500
    assert cfg.pipeline.basis_depth == 3
    assert cfg.search.max_evals == 500
    assert cfg.dataset.seed is None
    assert cfg.export_coords


def test_missing_mode(tmp_path):
    from src.core.errors import ConfigError
    from src.models.run_config import parse_config

    with pytest.raises(ConfigError) as exc:
        parse_config(_write(tmp_path, COMPARE.replace('mode = "compare"\n', "")))
    assert exc.value.field == "mode"
    assert "field required" in str(exc.value)


def test_unknown_key_reports_line(tmp_path):
    from src.core.errors import ConfigError
    from src.models.run_config import parse_config

    text = COMPARE.replace("size = 4", "sise = 4")
    with pytest.raises(ConfigError) as exc:
        parse_config(_write(tmp_path, text))
    assert exc.value.field == "dataset.sise"
    assert exc.value.line == 8
    assert "unknown key" in str(exc.value)


@pytest.mark.parametrize(
    "old, new",
    [
        ('mode = "compare"', 'mode = "compile"'),
        ('label = "HS"\ngates = ["H1", "S1"]', 'label = "HS"\ngates = ["H1", "S1"]\nparams = [1.0]'),
        ('kind = "haar-unitary"', 'kind = "no-such-kind"'),
        ("seed = 7", "seed = 7\nweights = [0, 0, 0, 0, 0]"),
    ],
)
def test_invalid_configs(tmp_path, old, new):
    from src.core.errors import ConfigError
    from src.models.run_config import parse_config

    with pytest.raises(ConfigError):
        parse_config(_write(tmp_path, COMPARE.replace(old, new)))


def test_overrides_replace_values(tmp_path):
    from src.models.run_config import parse_config

    cfg = parse_config(_write(tmp_path, COMPARE), {"seed": 99, "threads": 2, "mode": None})
    assert cfg.seed == 99
    assert cfg.threads == 2


def test_compare_run_artifacts(tmp_path):
    from src.main import main

    out = tmp_path / "out"
    assert main(["compare", "--config", str(_write(tmp_path, COMPARE)), "--out", str(out)]) == 0
    assert not (out / "INCOMPLETE").exists()

    lines = (out / "report.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "index,pf1,cd1,pf2,cd2"
    assert len(lines) == 5

    summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    assert summary["gs1"]["gateset"] == "HT"
    assert summary["gs2"]["gateset"] == "HS"
    assert set(summary["metrics"]) == {"c_apf", "c_npf", "c_acd", "c_ncd", "c_agf"}

    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["status"] == "complete"
    assert manifest["seed"] == 7
    assert manifest["config"]["mode"] == "compare"
    assert [g["label"] for g in manifest["gatesets"]] == ["HT", "HS"]

    assert (out / "coords.csv").read_text(encoding="utf-8").startswith("index,x,y,z")
    assert len(list((out / "circuits").glob("gs1_*.txt"))) == 4


def test_same_gate_set_gives_identical_columns(tmp_path):
    from src.main import main

    text = COMPARE.replace('label = "HS"\ngates = ["H1", "S1"]', 'label = "HT2"\ngates = ["H1", "T1"]')
    out = tmp_path / "out"
    assert main(["compare", "--config", str(_write(tmp_path, text)), "--out", str(out)]) == 0
    for line in (out / "report.csv").read_text(encoding="utf-8").splitlines()[1:]:
        _, pf1, cd1, pf2, cd2 = line.split(",")
        assert (pf1, cd1) == (pf2, cd2)


def test_rerun_from_manifest_is_reproducible(tmp_path):
    """Same seed, any thread count: byte-identical per-point report."""
    from src.main import main

    first, second = tmp_path / "a", tmp_path / "b"
    assert main(["compare", "--config", str(_write(tmp_path, COMPARE)), "--out", str(first), "--threads", "1"]) == 0
    manifest = first / "manifest.json"
    assert main(["compare", "--config", str(manifest), "--out", str(second), "--threads", "3"]) == 0
    assert (first / "report.csv").read_bytes() == (second / "report.csv").read_bytes()


def test_compile_run(tmp_path):
    from src.main import main

    text = COMPARE.replace('mode = "compare"', 'mode = "compile"').split("[gs2]")[0]
    out = tmp_path / "out"
    assert main(["compile", "--config", str(_write(tmp_path, text)), "--out", str(out)]) == 0
    assert (out / "report.csv").read_text(encoding="utf-8").splitlines()[0] == "index,pf,cd"
    assert len(list((out / "circuits").glob("HT_*.txt"))) == 4


def test_config_error_exit_code(tmp_path):
    from src.main import main

    bad = _write(tmp_path, COMPARE.replace("[gs2]", "[gs3]"))
    assert main(["compare", "--config", str(bad), "--out", str(tmp_path / "out")]) == 2
    assert main(["compare", "--config", str(tmp_path / "missing.toml")]) == 2


def test_runtime_error_keeps_marker(tmp_path):
    """A missing gate file fails the run after the output directory exists."""
    from src.main import main

    text = COMPARE.replace(
        'gates = ["H1", "S1"]',
        f'gates = [{{id = "F1", file = "{tmp_path / "nope.txt"}"}}]',
    )
    out = tmp_path / "out"
    assert main(["compare", "--config", str(_write(tmp_path, text)), "--out", str(out)]) == 3
    assert (out / "INCOMPLETE").exists()
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["status"] == "failed"
    assert "nope.txt" in manifest["error"]
    assert manifest["config"]["gs2"]["gates"][0]["id"] == "F1"


def test_discover_run_exports_gates(tmp_path):
    from src.main import main
    from src.services.matcore import unitarity_error
    from src.services.matrix_io import load_unitary

    text = COMPARE.replace('mode = "compare"', 'mode = "discover"').replace(
        '[gs2]\nlabel = "HS"\ngates = ["H1", "S1"]',
        '[ansatz]\nlabel = "P"\ngates = ["P1"]\n\n[search]\nmethod = "random-search"\nmax_evals = 2',
    )
    out = tmp_path / "out"
    assert main(["discover", "--config", str(_write(tmp_path, text)), "--out", str(out)]) == 0

    gates = sorted((out / "gates").glob("*.umat"))
    assert [g.name for g in gates] == ["P_P1.umat"]
    assert unitarity_error(load_unitary(gates[0])) < 1e-10

    trajectory = (out / "trajectory.csv").read_text(encoding="utf-8").splitlines()
    assert trajectory[0] == "eval,score"
    assert len(trajectory) == 3

    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["discovery"]["evaluations"] == 2
    assert len(manifest["discovery"]["best_params"]) == 3


def test_validate_and_schema(tmp_path, capsys):
    from src.main import main

    assert main(["validate", "--config", str(_write(tmp_path, COMPARE))]) == 0
    effective = json.loads(capsys.readouterr().out)
    assert effective["pipeline"]["rd_max_length"] == 20
    assert effective["gs2"]["gates"][1]["id"] == "S1"

    assert main(["schema"]) == 0
    schema = json.loads(capsys.readouterr().out)
    assert "dataset" in schema["properties"]


@pytest.mark.slow
def test_two_qubit_compare_cz_against_cx(tmp_path):
    """A CZ-based set against a CX-based one over random Weyl-chamber targets."""
    from src.main import main

    text = """\
mode = "compare"
seed = 3

[dataset]
kind = "weyl-random"
n_qubits = 2
size = 8

[gs1]
label = "HTCX"
gates = ["H1", "T1", "CX2"]

[gs2]
label = "HTCZ"
gates = ["H1", "T1", "CZ2"]

[pipeline]
basis_depth = 4
recursion = 1
"""
    out = tmp_path / "out"
    assert main(["compare", "--config", str(_write(tmp_path, text)), "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    assert summary["gs1"]["failures"] == 0
    assert summary["gs2"]["failures"] == 0
    assert (out / "coords.csv").read_text(encoding="utf-8").startswith("index,tx,ty,tz")
