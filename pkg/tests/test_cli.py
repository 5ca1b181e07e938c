import csv
import json
import math

import pytest

from pinlab import BiasedRW, annealed_critical_point
from pinlab.cli import ExperimentConfig, atomic_write, load_config, main


def write_cfg(tmp_path, name="cfg.json", **kw):
    cfg = {
        "law": {"family": "biased_rw", "p": 0.7},
        "beta": 1.0,
        "sigma": 1.0,
        "u_grid": {"min": 0.2, "max": 0.8, "points": 3},
        "N_ladder": [256, 512],
        "replicas": 3,
        "master_seed": 5,
        "outputs": {"csv_path": str(tmp_path / "out.csv"),
                    "json_path": str(tmp_path / "out.json")},
    }
    cfg.update(kw)
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_annealed_trivial_law(tmp_path):
    cfg = write_cfg(tmp_path, law={"family": "finite_support", "weights": {"1": 1.0}},
                    sigma=0.0, u_grid={"min": -1, "max": 1, "points": 9})
    assert main(["annealed", "--config", str(cfg)]) == 0
    rows = read_csv(tmp_path / "out.csv")
    assert list(rows[0]) == ["u", "f", "C"]
    for row in rows:
        assert float(row["f"]) == pytest.approx(float(row["u"]), abs=1e-14)


def test_rate_table_and_sidecar(tmp_path):
    cfg = write_cfg(tmp_path, delta_grid={"min": 0.0, "max": 0.5, "points": 11})
    assert main(["rate", "--config", str(cfg)]) == 0
    rows = read_csv(tmp_path / "out.csv")
    assert list(rows[0]) == ["delta", "g", "ghat", "ghat_f", "h"]
    assert len(rows) == 11
    side = json.loads((tmp_path / "out.json").read_text())
    assert set(side) == {"b_E", "r", "m_E", "b_E_prime", "x_star", "delta0"}
    assert side["r"] == pytest.approx(-math.log(0.6))


def test_simulate_rows_and_determinism(tmp_path):
    cfg = write_cfg(tmp_path)
    assert main(["simulate", "--config", str(cfg)]) == 0
    first = (tmp_path / "out.csv").read_bytes()
    rows = read_csv(tmp_path / "out.csv")
    assert list(rows[0]) == ["seed", "N", "beta", "u", "logZ_free", "logZ_constrained",
                             "contact_fraction"]
    assert len(rows) == 2 * 3 * 3
    assert main(["simulate", "--config", str(cfg), "--workers", "3"]) == 0
    assert (tmp_path / "out.csv").read_bytes() == first
    assert main(["simulate", "--config", str(cfg), "--seed", "6"]) == 0
    assert (tmp_path / "out.csv").read_bytes() != first


def test_env_overrides(tmp_path, monkeypatch):
    cfg = write_cfg(tmp_path)
    monkeypatch.setenv("PINLAB_SEED", "11")
    monkeypatch.setenv("PINLAB_WORKERS", "2")
    c = load_config(cfg)
    assert (c.master_seed, c.workers) == (11, 2)
    assert load_config(cfg, seed=3).master_seed == 3


def test_scan_columns(tmp_path):
    cfg = write_cfg(tmp_path, betas=[0.5, 1.0])
    assert main(["scan", "--config", str(cfg)]) == 0
    rows = read_csv(tmp_path / "out.csv")
    assert list(rows[0]) == ["beta", "u", "f_annealed", "f_quenched", "stderr", "C_annealed",
                             "C_quenched", "bound_qfreeineq"]
    assert len(rows) == 6
    for row in rows:
        assert float(row["bound_qfreeineq"]) <= float(row["f_annealed"]) + 1e-12


def test_critical_deterministic(tmp_path):
    cfg = write_cfg(tmp_path, sigma=0.0, replicas=1, N_ladder=[1024, 2048, 4096])
    assert main(["critical", "--config", str(cfg)]) == 0
    out = json.loads((tmp_path / "out.json").read_text())
    assert abs(out["u_c_quenched_estimate"] - BiasedRW(0.7).r) <= 2 * out["uncertainty"]


def test_phase_report(tmp_path):
    cfg = write_cfg(tmp_path, N_ladder=[512, 1024, 2048], replicas=6,
                    budget={"loosen_N": 256, "loosen_replicas": 2, "bound_grid": 3})
    assert main(["phase-report", "--config", str(cfg)]) == 0
    rep = json.loads((tmp_path / "out.json").read_text())
    assert rep["transition_case"] == "Thm1_transient_exp"
    assert rep["gap_lower_bound"] > 0
    assert "checks" in rep and "y" in rep


def test_phase_report_recurrent_is_classification_only(tmp_path):
    cfg = write_cfg(tmp_path, law={"family": "geometric_prefactor", "b": 0.2, "c": 3,
                                   "normalize": True})
    assert main(["phase-report", "--config", str(cfg)]) == 0
    rep = json.loads((tmp_path / "out.json").read_text())
    assert rep["transition_case"] == "Thm2_iii"


def test_dp(tmp_path):
    cfg = write_cfg(tmp_path, N=400, windows=[[0.1, 0.2], [0.3, 0.4]])
    assert main(["dp", "--config", str(cfg)]) == 0
    rows = read_csv(tmp_path / "out.csv")
    assert [r["lo"] for r in rows] == ["0.1", "0.3"]
    assert all(float(r["rel_err"]) < 0.2 for r in rows)


def test_force_then_annealed(tmp_path):
    beta = 2.0
    cfg = write_cfg(tmp_path, beta=beta, sigma=0.0, force={"p": 0.7, "then": "annealed"})
    assert main(["force", "--config", str(cfg)]) == 0
    out = json.loads((tmp_path / "out.json").read_text())
    expect = annealed_critical_point(BiasedRW(0.7), beta) + math.log(2) / beta
    assert out["u_c_annealed"] == pytest.approx(expect, abs=1e-14)


def test_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["annealed", "--config", str(bad)]) == 2
    cfg = write_cfg(tmp_path, N_ladder=[512, 256])
    assert main(["simulate", "--config", str(cfg)]) == 2
    cfg = write_cfg(tmp_path, replicas=0)
    assert main(["simulate", "--config", str(cfg)]) == 2
    cfg = write_cfg(tmp_path, law={"family": "nope"})
    assert main(["rate", "--config", str(cfg)]) == 2
    cfg = write_cfg(tmp_path, u_grid={"min": 0, "max": 1, "points": 0})
    assert main(["annealed", "--config", str(cfg)]) == 2
    assert "ConfigError" in capsys.readouterr().err
    assert not (tmp_path / "out.csv").exists()


def test_numerical_failure_writes_nothing(tmp_path, capsys):
    cfg = write_cfg(tmp_path, N=9000)
    assert main(["dp", "--config", str(cfg)]) == 3
    assert "CapExceeded" in capsys.readouterr().err
    cfg = write_cfg(tmp_path, sigma=0.0, replicas=1, bracket=[2.0, 3.0])
    assert main(["critical", "--config", str(cfg)]) == 3
    assert "NoBracket" in capsys.readouterr().err
    assert not (tmp_path / "out.csv").exists()
    assert not (tmp_path / "out.json").exists()
    assert not list(tmp_path.glob(".*.tmp"))


def test_atomic_write_leaves_no_temp(tmp_path):
    target = tmp_path / "sub" / "x.txt"
    atomic_write(target, "abc")
    assert target.read_text() == "abc"
    assert [p.name for p in target.parent.iterdir()] == ["x.txt"]


def test_config_dataclass_defaults():
    c = ExperimentConfig.from_dict({"law": {"family": "biased_rw", "p": 0.6}, "beta": 1.0})
    assert c.replicas == 1 and c.sigma == 0.0 and c.u_grid is None
