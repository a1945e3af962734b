import json

import pytest

from xxpulse.cli import main
from xxpulse.model import load_chain


def run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


SMALL = ["--tau-us", "100", "--na", "300"]


def test_synthesize_and_demodulate(tmp_path, capsys):
    out = tmp_path / "run"
    code, stdout, _ = run(["synthesize", *SMALL, "--out", str(out), "--samples", "101"], capsys)
    assert code == 0
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["relative_null_space_residual"] < 1e-8
    assert meta["null_dimension"] == 295
    assert abs(abs(meta["chi_quadrature"]) - 0.39269908169872414) < 1e-9
    assert (out / "amplitudes.csv").read_text().startswith("n,a_n_mhz\n")
    assert len((out / "pulse.csv").read_text().splitlines()) == 102
    code, stdout, _ = run(["demodulate", str(out)], capsys)
    assert code == 0
    header = (out / "demod.csv").read_text().splitlines()[0]
    assert header == "t_start_us,t_end_us,omega_over_2pi_mhz,mu_over_2pi_mhz,psi_start_rad"


def test_outputs_are_idempotent(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run(["synthesize", *SMALL, "--out", str(d), "--samples", "51"], capsys)[0] == 0
        assert run(["demodulate", str(d)], capsys)[0] == 0
    for name in ("amplitudes.csv", "pulse.csv", "metadata.json", "demod.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_floats_use_17_significant_digits(tmp_path, capsys):
    run(["synthesize", *SMALL, "--out", str(tmp_path), "--samples", "11"], capsys)
    row = (tmp_path / "pulse.csv").read_text().splitlines()[2].split(",")
    assert len(row[1].lstrip("-").replace(".", "").split("e")[0].lstrip("0")) >= 15


def test_parity_flag(tmp_path, capsys):
    peaks = {}
    for parity in ("negative", "positive"):
        d = tmp_path / parity
        args = ["synthesize", "--tau-us", "80", "--na", "1000", "--parity", parity,
                "--out", str(d), "--samples", "11"]
        assert run(args, capsys)[0] == 0
        peaks[parity] = json.loads((d / "metadata.json").read_text())["peak_mhz"]
    assert abs(peaks["positive"] / peaks["negative"] - 1) < 2e-3


def test_missing_chain_file_exit_code(tmp_path, capsys):
    missing = tmp_path / "absent.json"
    code, _, err = run(["synthesize", "--chain", str(missing), "--out", str(tmp_path)], capsys)
    assert code == 2
    assert str(missing) in err


def test_invalid_chain_and_args(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"mode_freqs_mhz": [2.0, 1.0], "lamb_dicke": [[0.1, 0], [0, 0.1]]}))
    code, _, err = run(["bound", "--chain", str(bad)], capsys)
    assert code == 2 and "mode_freqs_mhz" in err
    assert run(["synthesize", "--pair", "1", "1", "--out", str(tmp_path)], capsys)[0] == 2
    assert run(["no-such-command"], capsys)[0] == 2


def test_numerical_failure_exit_code(tmp_path, capsys):
    # ion 2 couples to no mode, so the pair cannot be entangled
    chain = tmp_path / "c.json"
    chain.write_text(json.dumps({"mode_freqs_mhz": [1.0, 1.1],
                                 "lamb_dicke": [[0.1, 0.0], [0.1, 0.0]]}))
    code, _, err = run(["synthesize", "--chain", str(chain), "--pair", "1", "2", "--tau-us", "100",
                        "--na", "300", "--out", str(tmp_path)], capsys)
    assert code == 1, err
    assert "numerical" in err


def test_bound_table(tmp_path, capsys):
    out = tmp_path / "b.json"
    code, stdout, _ = run(["bound", "--out", str(out)], capsys)
    assert code == 0
    data = json.loads(out.read_text())
    assert len(data["bounds"]) == 10
    assert "(3,1) 8.353 kHz" in stdout


def test_scan_widths(tmp_path, capsys):
    code, stdout, _ = run(["scan", "--tau-us", "100", "--na", "300", "--orders", "0", "1", "2",
                           "--grid-khz", "30", "--grid-step-hz", "100", "--out", str(tmp_path)], capsys)
    assert code == 0
    widths = json.loads((tmp_path / "widths.json").read_text())
    values = [w["width_hz"] for w in sorted(widths, key=lambda w: w["K"])]
    assert values == sorted(values)
    assert (tmp_path / "scan.csv").read_text().startswith("delta_f_hz,K,infidelity\n")


def test_step_command(tmp_path, capsys):
    code, stdout, _ = run(["step", "--out", str(tmp_path)], capsys)
    assert code == 0
    meta = json.loads((tmp_path / "metadata.json").read_text())
    assert meta["parity"] == "negative"
    assert len((tmp_path / "step.csv").read_text().splitlines()) == 12


def test_chain_gen_and_sk(tmp_path, capsys):
    path = tmp_path / "chain.json"
    assert run(["chain-gen", "--ions", "6", "--out", str(path)], capsys)[0] == 0
    assert load_chain(path).num_ions == 6
    code, stdout, _ = run(["sk", "0"], capsys)
    assert code == 0
    assert json.loads(stdout)["phi_sk_rad"] == pytest.approx(1.5707963267948966)
    assert run(["sk", "100"], capsys)[0] == 2
