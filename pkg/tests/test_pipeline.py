import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from radwave.cli import EXIT_BLOWUP, EXIT_CONFIG, EXIT_GATE, EXIT_IO, EXIT_OK, main
from radwave.core import ConfigError, ContractError, FieldState, RadialGrid, SimConfig
from radwave.pipeline import (
    config_from_dict,
    config_hash,
    config_to_dict,
    csv_header,
    fit_decay_rate,
    read_diagnostics_csv,
    read_snapshot,
    run_config,
    run_pipeline,
    write_snapshot,
)

SMALL = {
    "p": 5,
    "dr": 0.02,
    "n": 1024,
    "t_final": 8.0,
    "output_every": 20,
    "kappa_list": [0.0, 0.5],
    "morawetz_R_list": [[5.0, 1.0, 0.2, 0.1]],
    "diagnostics": {"q": True, "char_etas": [0.0], "energy_drift_tol": 1e-3},
}


def write_config(path, cfg):
    path.write_text(json.dumps(cfg))
    return path


# -- fit_decay_rate -------------------------------------------------------------


def test_fit_exact_power_law():
    t = np.linspace(1, 50, 20)
    exponent, r2 = fit_decay_rate(zip(t, 1 / t))
    assert exponent == pytest.approx(1.0, abs=1e-6)
    assert r2 == pytest.approx(1.0)


def test_fit_constant_series():
    exponent, r2 = fit_decay_rate([(t, 3.0) for t in range(1, 11)])
    assert exponent == pytest.approx(0.0, abs=1e-12)


def test_fit_noisy_power_law():
    t = np.linspace(20, 200, 60)
    v = t**-0.9 * (1 + 0.05 * np.sin(t))
    exponent, _ = fit_decay_rate(zip(t, v))
    assert abs(exponent - 0.9) <= 0.05


def test_fit_contract():
    with pytest.raises(ContractError):
        fit_decay_rate([(t, 1.0 - t) for t in range(1, 11)])
    with pytest.raises(ContractError):
        fit_decay_rate([(t, 1.0) for t in range(1, 5)])
    assert fit_decay_rate([(1, 1.0), (2, 0.5), (4, 0.25)], min_points=3)[0] == pytest.approx(1.0)


# -- configuration ------------------------------------------------------------------


def test_unknown_keys_are_rejected():
    for bad in (
        {**SMALL, "dx": 0.1},
        {**SMALL, "data": {"family": "gaussian", "sigma": 1.0}},
        {**SMALL, "diagnostics": {"qq": True}},
        {**SMALL, "diagnostics": {"radiation": {"window": [0, 1]}}},
    ):
        with pytest.raises(ConfigError):
            config_from_dict(bad)


def test_config_hash_ignores_key_order():
    cfg1, d1 = config_from_dict(SMALL)
    cfg2, d2 = config_from_dict(dict(reversed(list(SMALL.items()))))
    assert config_hash(cfg1, d1) == config_hash(cfg2, d2)
    cfg3, d3 = config_from_dict({**SMALL, "t_final": 9.0})
    assert config_hash(cfg3, d3) != config_hash(cfg1, d1)


def test_config_round_trip():
    cfg, diag = config_from_dict(SMALL)
    again, diag2 = config_from_dict(config_to_dict(cfg, diag))
    assert again == cfg and diag2 == diag


def test_csv_header_layout():
    assert csv_header([0.0, 0.5], [2.0]) == [
        "t", "E_total", "E_kappa_0.0", "E_kappa_0.5", "interior_weighted", "e_in", "e_out",
        "Q", "nakanishi_cum", "char_flux_2.0",
    ]


# -- persistence -----------------------------------------------------------------


@settings(max_examples=25, deadline=None)
@given(
    u=arrays(np.float64, 17, elements=st.floats(allow_nan=False, allow_infinity=False)),
    ut=arrays(np.float64, 17, elements=st.floats(allow_nan=False, allow_infinity=False)),
    t=st.floats(-1e6, 1e6),
)
def test_snapshot_round_trip_is_bit_exact(tmp_path_factory, u, ut, t):
    path = tmp_path_factory.mktemp("snap") / "s.csv"
    g = RadialGrid(0.1, 17)
    state = FieldState(t, u, ut)
    write_snapshot(path, state, g)
    back = read_snapshot(path, t)
    assert back.u.tobytes() == state.u.tobytes()
    assert back.ut.tobytes() == state.ut.tobytes()


def test_pipeline_outputs_and_manifest(tmp_path):
    cfg_path = write_config(tmp_path / "c.json", SMALL)
    m = run_pipeline(cfg_path, tmp_path / "out")
    for name in m.outputs:
        assert (tmp_path / "out" / name).exists()
    assert {"diagnostics.csv", "morawetz.json", "manifest.json", "config.json"} <= set(m.outputs)
    assert m.passed and set(m.gates) >= {"energy_drift", "morawetz_0", "inequalities"}
    cols = read_diagnostics_csv(tmp_path / "out" / "diagnostics.csv")
    assert len(cols["t"]) == m.snapshots
    assert np.isfinite(cols["Q"]).all()
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["config_hash"] == m.config_hash


def test_pipeline_t_final_zero(tmp_path):
    cfg, diag = config_from_dict({"dr": 0.05, "n": 400, "t_final": 0.0})
    m = run_config(cfg, diag, tmp_path)
    assert m.snapshots == 1 and m.steps == 0
    assert "nakanishi.json" not in m.outputs
    cols = read_diagnostics_csv(tmp_path / "diagnostics.csv")
    assert cols["t"].tolist() == [0.0]


def test_pipeline_writes_snapshots(tmp_path):
    cfg, diag = config_from_dict({"dr": 0.05, "n": 400, "t_final": 1.0, "output_every": 10,
                                  "diagnostics": {"snapshots": True}})
    m = run_config(cfg, diag, tmp_path)
    index = json.loads((tmp_path / "snapshots" / "index.json").read_text())
    assert len(index) == m.snapshots
    last = read_snapshot(tmp_path / index[-1]["file"], index[-1]["t"])
    assert last.t == pytest.approx(1.0)


def test_calibration_config_conserves_energy(tmp_path):
    cfg, diag = config_from_dict({"p": 5, "dr": 60 / 4096, "n": 4096, "cfl": 0.45, "t_final": 50.0,
                                  "diagnostics": {"pointwise": False}})
    run_config(cfg, diag, tmp_path)
    E = read_diagnostics_csv(tmp_path / "diagnostics.csv")["E_total"]
    assert np.max(np.abs(E - E[0])) / E[0] <= 1e-4


def test_rerun_reproduces_csv_bytes(tmp_path):
    cfg, diag = config_from_dict(SMALL)
    run_config(cfg, diag, tmp_path / "a")
    run_config(cfg, diag, tmp_path / "b")
    assert (tmp_path / "a" / "diagnostics.csv").read_bytes() == (tmp_path / "b" / "diagnostics.csv").read_bytes()


# -- command line -------------------------------------------------------------------


def test_cli_run_and_exit_codes(tmp_path):
    good = write_config(tmp_path / "good.json", SMALL)
    assert main(["run", "--config", str(good), "--out", str(tmp_path / "o1"), "--gate"]) == EXIT_OK
    strict = write_config(
        tmp_path / "strict.json", {**SMALL, "diagnostics": {"energy_drift_tol": 1e-15}}
    )
    assert main(["run", "--config", str(strict), "--out", str(tmp_path / "o2"), "--gate"]) == EXIT_GATE
    assert main(["run", "--config", str(strict), "--out", str(tmp_path / "o3")]) == EXIT_OK
    bad = write_config(tmp_path / "bad.json", {**SMALL, "bogus": 1})
    assert main(["run", "--config", str(bad), "--out", str(tmp_path / "o4")]) == EXIT_CONFIG
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == EXIT_IO
    boom = write_config(tmp_path / "boom.json",
                        {"dr": 0.01, "n": 1000, "t_final": 2.0, "data": {"amplitude": 30.0}})
    assert main(["run", "--config", str(boom), "--out", str(tmp_path / "o5")]) == EXIT_BLOWUP
    (tmp_path / "junk.json").write_text("{not json")
    assert main(["run", "--config", str(tmp_path / "junk.json")]) == EXIT_CONFIG


def test_cli_subcommands(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", {**SMALL, "diagnostics": {
        "radiation": {"eta_window": [-6.0, 4.0], "extraction_times": [6.0, 8.0], "exterior_eta": 2.0}}})
    out = tmp_path / "out"
    assert main(["identity", "--config", str(cfg), "--out", str(out), "--gate"]) == EXIT_OK
    assert main(["radiation", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    rad = json.loads((out / "radiation.json").read_text())
    assert rad["energy"] <= rad["twice_energy"] * 1.001
    assert main(["converge", "--config", str(cfg), "--out", str(out), "--threads", "2"]) == EXIT_OK
    conv = json.loads((out / "converge.json").read_text())
    assert all(1.5 < o < 2.5 for o in conv["energy_drift_orders"])
    assert main(["inequalities", "--out", str(out), "--gate", "--seed", "7"]) == EXIT_OK
    verdicts = json.loads((out / "verdicts.json").read_text())
    assert any(v["seed"] == 7 for v in verdicts)
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    capsys.readouterr()
    assert main(["ratefit", "--csv", str(out / "diagnostics.csv"), "--column", "e_in",
                 "--t-min", "1", "--t-max", "8"]) == EXIT_OK
    fit = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert fit["exponent"] > 0 and math.isfinite(fit["r_squared"])
    assert main(["ratefit", "--csv", str(out / "diagnostics.csv"), "--column", "nope"]) == EXIT_CONFIG


def test_identity_requires_morawetz_list(tmp_path):
    cfg = write_config(tmp_path / "c.json", {"dr": 0.05, "n": 400, "t_final": 2.0})
    assert main(["identity", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_morawetz_window_must_fit(tmp_path):
    with pytest.raises(ConfigError):
        cfg, diag = config_from_dict({**SMALL, "morawetz_R_list": [[8.0, 2.0, 0.1, 0.1]]})
        run_config(cfg, diag, tmp_path)


def test_simconfig_defaults_round_trip():
    cfg = SimConfig(t_final=0.0)
    assert config_from_dict(config_to_dict(cfg))[0] == cfg
