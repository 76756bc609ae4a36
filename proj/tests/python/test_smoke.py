import math

import pytest

import otafl


NET = {"lambda": [1.0, 0.5, 0.2], "e_s": 1.0, "n0": 0.01, "d": 100, "g_max": 10.0}

SMALL = {
    "n_devices": 4,
    "t_rounds": 4,
    "seeds": [0, 1],
    "schemes": ["ideal_fedavg", "sca", "vanilla"],
    "dataset": {"classes": 4, "features": 5, "samples_per_class": 15},
    "model": {"hidden": 4},
}


def test_closed_forms():
    gm = otafl.gamma_max(2.0, 10.0, 100, 1.0)
    assert gm == pytest.approx(math.sqrt(100 * 2.0 / 200.0))
    assert otafl.truncation_probability(gm, 2.0, 10.0, 100, 1.0) == pytest.approx(math.exp(-0.5))
    assert otafl.alpha_m(gm, 2.0, 10.0, 100, 1.0) == pytest.approx(otafl.alpha_max(2.0, 10.0, 100, 1.0))
    assert otafl.pathloss_gain(1.0, 2.2, 50.0) == pytest.approx(1e-5)


def test_bias_examples():
    assert otafl.bias_term([1.0, 0.0], 1.0, 2) == 2.0
    assert otafl.bias_term([0.25] * 4, 3.0, 4) == 0.0


def test_design_and_zeta():
    d = otafl.make_design([0.3, 0.3, 0.3], NET)
    assert sum(d["p"]) == pytest.approx(1.0)
    z = otafl.zeta([0.3, 0.3, 0.3], NET)
    assert z["zeta"] > 0
    assert len(otafl.sample_fading(NET["lambda"], 1, 2)) == 3


def test_sca_beats_lcpc_objective():
    problem = dict(NET, eta=0.1, L=10.0, kappa=0.0)
    res = otafl.sca_design(problem)
    assert res["certificate"]["accepted"]
    trace = res["objective_trace"]
    assert all(b <= a for a, b in zip(trace, trace[1:]))
    lc = otafl.lcpc(NET)
    lc_zeta = otafl.zeta(lc["gamma"], NET)["zeta"]
    assert res["p1_objective"] <= 2 * 0.1 * 10.0 * lc_zeta + 1e-9


def test_config_errors_raise():
    with pytest.raises(otafl.ConfigError):
        otafl.validate_config({"etta": 0.1})
    with pytest.raises(ValueError):
        otafl.validate_config({"schemes": ["nope"]})
    cfg = otafl.validate_config({})
    assert cfg["n_devices"] == 10
    assert otafl.config_hash({}) == otafl.config_hash({"threads": 4})


def test_run_and_report(tmp_path):
    meta = otafl.run(SMALL, tmp_path / "run")
    assert meta["common_random_numbers"]["verified"]
    assert not meta["failures"]
    table = otafl.report([tmp_path / "run" / "metrics.ndjson"], tmp_path / "report")
    assert [row["scheme"] for row in table] == SMALL["schemes"]
    assert (tmp_path / "report" / "final.csv").exists()
    with pytest.raises(RuntimeError):
        otafl.run(SMALL, tmp_path / "run")
