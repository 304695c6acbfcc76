import json

import numpy as np
import pytest

from robustprec.cli import main as cli_main
from robustprec.harness import (ALGORITHMS, CSV_HEADER, ExperimentConfig,
                                ResultRow, emit_figures, rows_from_csv,
                                rows_to_csv, run_experiment, run_rows,
                                snr_saturation_check)


def _small_config(**kw):
    defaults = dict(m=2, k=1, n=2, eps_levels=[0.0, 0.1], gamma_db=[0.0],
                    seeds=[0, 1], algorithms=["maxmin"])
    defaults.update(kw)
    return ExperimentConfig(**defaults)


def test_config_validation():
    with pytest.raises(ValueError):
        _small_config(eps_levels=[])
    with pytest.raises(ValueError):
        _small_config(algorithms=["nope"])
    assert set(_small_config(algorithms=list(ALGORITHMS)).algorithms) == set(ALGORITHMS)


def test_config_json_roundtrip(tmp_path):
    cfg = _small_config()
    path = tmp_path / "cfg.json"
    cfg.to_json(path)
    assert ExperimentConfig.from_json(path) == cfg


def test_row_counting_and_csv_roundtrip():
    cfg = _small_config()
    rows = run_rows(cfg)
    assert len(rows) == 2 * 2 * 1 * 1  # seeds x eps x gamma x algos
    text = rows_to_csv(rows)
    assert text.splitlines()[0] == ",".join(CSV_HEADER)
    assert rows_to_csv(rows_from_csv(text)) == text


def test_experiment_is_deterministic(tmp_path):
    cfg = _small_config()
    run_experiment(cfg, tmp_path / "a.csv", tmp_path / "a.json")
    run_experiment(cfg, tmp_path / "b.csv", tmp_path / "b.json")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    summary = json.loads((tmp_path / "a.json").read_text())
    assert summary["failures"] == []
    assert all(r.wall_ms == 0 for r in run_rows(cfg))


def test_rates_nonnegative_and_finite():
    rows = run_rows(_small_config(algorithms=["maxmin", "zf-maxmin"]))
    for r in rows:
        assert np.isfinite(r.min_rate) and r.min_rate >= 0
        assert np.isfinite(r.sum_rate) and r.sum_rate >= 0
        assert all(np.isfinite(v) and v >= 0 for v in r.per_user_rates)


def test_saturation_report_shape():
    rows = [
        ResultRow(0, 0.1, g, "maxmin", rate, rate, [rate], 0, 1)
        for g, rate in [(0.0, 1.0), (5.0, 1.5), (10.0, 1.52)]
    ]
    rep = snr_saturation_check(rows)
    assert rep[0.1]["monotone_violations"] == []
    assert rep[0.1]["last_step_relative_gain"] == pytest.approx(0.02 / 1.5)
    assert rep[0.1]["saturation_asserted"]
    rows.append(ResultRow(0, 0.1, 15.0, "maxmin", 1.0, 1.0, [1.0], 0, 1))
    rep2 = snr_saturation_check(rows)
    assert rep2[0.1]["monotone_violations"] == [(10.0, 15.0)]


def test_figures_deterministic_and_handle_empty(tmp_path):
    cfg = _small_config()
    run_experiment(cfg, tmp_path / "s.csv")
    p1 = emit_figures(tmp_path / "s.csv", tmp_path / "f1")
    p2 = emit_figures(tmp_path / "s.csv", tmp_path / "f2")
    assert [p.name for p in p1] == [p.name for p in p2]
    for a, b in zip(p1, p2):
        assert a.read_bytes() == b.read_bytes()
        assert a.read_bytes().lstrip().startswith(b"<?xml")
    empty = tmp_path / "empty.csv"
    empty.write_text(",".join(CSV_HEADER) + "\n")
    paths = emit_figures(empty, tmp_path / "f3")
    assert all(p.stat().st_size > 0 for p in paths)


def test_cli_sample_validate_maxmin(tmp_path, capsys):
    inst = tmp_path / "inst.json"
    assert cli_main(["sample", "--m", "2", "--k", "1", "--n", "2",
                     "--eps", "0.1", "--seed", "0", "--out", str(inst)]) == 0
    assert cli_main(["validate", "--config", str(inst)]) == 0
    prec = tmp_path / "prec.json"
    assert cli_main(["maxmin", "--config", str(inst), "--out", str(prec)]) == 0
    out = capsys.readouterr().out
    assert "certified min worst-case SINR" in out
    assert prec.exists()
    from robustprec.cli import load_precoders
    ps = load_precoders(prec)
    assert ps.matrices.shape == (2, 2, 1)


def test_cli_baseline_and_errors(tmp_path, capsys):
    assert cli_main(["baseline", "--m", "2", "--k", "2", "--n", "2",
                     "--algo", "zf-maxmin", "--seed", "1"]) == 0
    assert "min worst-case rate" in capsys.readouterr().out
    assert cli_main(["validate"]) == 2  # missing --config
    assert cli_main(["sweep"]) == 2


def test_cli_sweep_and_plot(tmp_path, capsys):
    cfg_path = tmp_path / "exp.json"
    _small_config().to_json(cfg_path)
    csv_path = tmp_path / "sweep.csv"
    assert cli_main(["sweep", "--config", str(cfg_path), "--out", str(csv_path)]) == 0
    assert csv_path.exists()
    assert (tmp_path / "sweep.csv.summary.json").exists()
    assert cli_main(["plot", str(csv_path), "--out", str(tmp_path / "figs")]) == 0
    out = capsys.readouterr().out
    assert "figure written" in out
