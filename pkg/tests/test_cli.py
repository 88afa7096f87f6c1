import csv
import json

import numpy as np
import pytest

from fe3sim import cli, experiments
from fe3sim.references import CheckResult, ReferenceRecord, compare_reference, load_references

FAST_DYNAMICS = ["dynamics.dicke_k=[0, 2]", "dynamics.b_x=[1.0]", "dynamics.samples=300"]
FAST_SENSING = ["sensing.dicke_k=[0]", "sensing.b_x=[1.0]", "sensing.n_seq_max=3"]


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_spectrum_outputs_and_check(tmp_path, capsys):
    assert cli.main(["spectrum", "--out", str(tmp_path), "--check"]) == 0
    rows = read_csv(tmp_path / "eigenvalues.csv")
    assert rows[0] == ["index", "energy_k", "s_total"]
    assert len(rows) == 217
    sectors = read_csv(tmp_path / "sectors.csv")[1:]
    census = {float(r[0]): int(r[3]) for r in sectors}
    assert census == {7.5: 1, 6.5: 2, 5.5: 3, 4.5: 4, 3.5: 5, 2.5: 6, 1.5: 4, 0.5: 2}
    manifest = json.loads((tmp_path / "spectrum_manifest.json").read_text())
    assert set(manifest["constants"]) >= {"CM_TO_K", "MU_B_OVER_KB_K_PER_T", "HBAR_OVER_KB_PS_K"}
    assert manifest["constants"]["HBAR_OVER_KB_PS_K"] == 7.63824
    assert manifest["wall_time_s"] > 0
    assert all(c["passed"] for c in manifest["check"])
    lines = capsys.readouterr().out.splitlines()
    assert lines and all(line.startswith("[PASS]") for line in lines)


def test_hamiltonian_dump(tmp_path):
    assert cli.main(["spectrum", "--out", str(tmp_path), "--set", "spectrum.dump_hamiltonian=true"]) == 0
    rows = read_csv(tmp_path / "hamiltonian.csv")[1:]
    h = np.zeros((216, 216), dtype=complex)
    for r, c, re, im in rows:
        h[int(r), int(c)] = float(re) + 1j * float(im)
    assert np.abs(h - h.conj().T).max() < 1e-9


def test_check_failure_exit_code(tmp_path, capsys):
    code = cli.main(["spectrum", "--out", str(tmp_path), "--check", "--set", "model.j_coupling=11.0"])
    assert code == cli.EXIT_CHECK
    assert "[FAIL] ground_energy_k" in capsys.readouterr().out


def test_dynamics_is_byte_reproducible(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert cli.main(["dynamics", "--out", str(out), "--check", *sum((["--set", s] for s in FAST_DYNAMICS), [])]) == 0
    names = sorted(p.name for p in a.glob("*.csv"))
    assert "dynamics_k2_bx1.csv" in names and "dynamics_correlations.csv" in names
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes()
    rows = read_csv(a / "dynamics_k0_bx1.csv")
    assert rows[0] == ["theta", "t_ps", "sz1", "sz3", "sz2"] and len(rows) == 301


def test_sensing_run(tmp_path):
    args = ["sensing", "--out", str(tmp_path), *sum((["--set", s] for s in FAST_SENSING), [])]
    assert cli.main(args) == 0
    rows = read_csv(tmp_path / "sensing_k0_bx1.csv")
    assert rows[0] == ["n_seq", "f_value", "inverse_f", "alpha", "beta", "residual", "pruning_remainder"]
    assert [r[0] for r in rows[1:]] == ["1", "2", "3"]
    manifest = json.loads((tmp_path / "sensing_manifest.json").read_text())
    assert manifest["protocols"][0]["tau_list"] == [0.2, 0.2, 0.2]


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    assert cli.main(["dynamics", *sum((["--set", s] for s in FAST_DYNAMICS), [])]) == 0
    assert (tmp_path / "env" / "dynamics_manifest.json").exists()


def test_config_file(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text('experiment = "dynamics"\n[model]\nj_coupling = 12.56\n[dynamics]\ndicke_k = [1]\nb_x = [5.0]\nsamples = 50\n')
    assert cli.main(["dynamics", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    manifest = json.loads((tmp_path / "o" / "dynamics_manifest.json").read_text())
    assert manifest["config"]["dynamics"]["samples"] == 50
    assert (tmp_path / "o" / "dynamics_k1_bx5.csv").exists()


@pytest.mark.parametrize("text", [
    '[dynamics]\nwindow = 3\n',
    '[dynamics]\ndicke_k = [3, 1]\n',
    '[dynamics]\ndicke_k = [0]\n[sensing]\nn_seq_max = 2\n',
    'experiment = "sensing"\n',
    '[model]\nspin = 2.5\n',
    '[sensing]\nn_seq_max = 7\n',
    'not toml at all',
])
def test_invalid_configs_exit_two(tmp_path, text):
    cfg = tmp_path / "bad.toml"
    cfg.write_text(text)
    exp = "sensing" if "n_seq_max = 7" in text else "dynamics"
    assert cli.main([exp, "--config", str(cfg), "--out", str(tmp_path)]) == cli.EXIT_CONFIG


def test_invalid_override_exit_two(tmp_path):
    assert cli.main(["magnetization", "--out", str(tmp_path), "--set", "magnetization.temperatures=[0.0]"]) == 2
    assert cli.main(["magnetization", "--out", str(tmp_path), "--set", "nonsense"]) == 2


def test_computation_failure_exit_three(tmp_path):
    # pruning at 1e-6 discards more than the trusted mass for this protocol
    args = ["sensing", "--out", str(tmp_path), "--set", "sensing.dicke_k=[3]", "--set", "sensing.b_x=[5.0]",
            "--set", "sensing.n_seq_max=4", "--set", "sensing.prune_threshold=1e-6"]
    assert cli.main(args) == cli.EXIT_COMPUTE


def test_unknown_subcommand():
    with pytest.raises(SystemExit):
        cli.main(["plot"])


def test_build_config_defaults():
    cfg = experiments.build_config("negativity")
    assert cfg.block["b_range"] == [0.0, 110.0, 221]
    assert cfg.as_dict()["model"] == {"j_coupling": 12.56, "g_factor": 2.0}


def test_reference_file_is_complete():
    records = load_references()
    assert all(r.tolerance > 0 for r in records if r.comparison == "within")
    assert all(r.provenance for r in records)
    assert {r.experiment for r in records} == set(experiments.EXPERIMENTS)
    names = [r.name for r in records]
    assert len(names) == len(set(names))


def test_compare_reference_lines():
    rec = ReferenceRecord("n_bip_B0_T1", 0.24, 0.02, "quoted maximum", "negativity")
    (res,) = compare_reference({"n_bip_B0_T1": 0.2365}, [rec])
    assert res.passed and res.line().startswith("[PASS] n_bip_B0_T1")
    one_sided = ReferenceRecord("min_beta", 1.0, 0.0, "fit exponent", "sensing", "greater")
    assert not CheckResult(one_sided, 0.9, one_sided.passes(0.9)).passed
    assert "> 1" in compare_reference({"min_beta": 2.1}, [one_sided])[0].line()
    with pytest.raises(KeyError):
        compare_reference({}, [rec])
    with pytest.raises(ValueError):
        ReferenceRecord("x", 1.0, 0.0, "p")


def test_csv_float_format(tmp_path):
    table = experiments.Table(["a", "b"], [(1, 1 / 3), (2, np.float64(2.5e-17))])
    experiments.write_csv(tmp_path / "t.csv", table)
    assert (tmp_path / "t.csv").read_text().splitlines() == ["a,b", "1,0.333333333333", "2,2.5e-17"]
