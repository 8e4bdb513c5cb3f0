import json

import pytest

from srbp2d.cli import (ConfigError, _parse_overrides, build_config,
                        list_experiments, main)
from srbp2d.experiments import EXPERIMENTS


def test_experiment_table_is_complete():
    table = list_experiments()
    assert [name for name, _ in table] == sorted(EXPERIMENTS)
    assert len(table) == 9
    assert all(desc for _, desc in table)


def test_build_config_defaults():
    cfg = build_config("weak-norm")
    assert cfg["lam"] == 1e-10
    assert cfg["band"] == [0.95, 1.05]
    assert cfg["seed"] == 0


def test_build_config_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        build_config("weak-norm", {"lambda": 1e-4})
    with pytest.raises(ConfigError):
        build_config("msd", overrides={"paths": "10"})


def test_build_config_coercion():
    cfg = build_config("msd", {"n_paths": "64", "t_grid": "[0.1, 0.2]"},
                       {"eps": "0.25"})
    assert cfg["n_paths"] == 64
    assert cfg["t_grid"] == [0.1, 0.2]
    assert cfg["eps"] == 0.25
    with pytest.raises(ConfigError):
        build_config("msd", {"n_paths": "not-a-number"})
    with pytest.raises(ConfigError):
        build_config("msd", {"n_paths": "2.5"})     # non-integral
    with pytest.raises(ConfigError):
        build_config("msd", {"t_grid": "0.1"})      # not a list


def test_flag_overrides_beat_file_values():
    cfg = build_config("weak-norm", {"lam": 1e-4}, {"lam": "1e-6"})
    assert cfg["lam"] == 1e-6


def test_parse_overrides_forms():
    assert _parse_overrides(["--lam", "1e-4", "--seed=3"]) == \
        {"lam": "1e-4", "seed": "3"}
    assert _parse_overrides(["--n-paths", "10"]) == {"n_paths": "10"}
    with pytest.raises(ConfigError):
        _parse_overrides(["lam", "1e-4"])
    with pytest.raises(ConfigError):
        _parse_overrides(["--lam"])


def test_main_list(capsys):
    assert main(["list"]) == 0
    out = capsys.readouterr().out
    for name in EXPERIMENTS:
        assert name in out


def test_main_no_command_prints_help(capsys):
    assert main([]) == 2


def _strip_volatile(summary):
    summary = dict(summary)
    summary.pop("runtime_s", None)
    summary.pop("timestamp", None)
    return summary


def test_main_weak_norm_end_to_end(tmp_path, capsys):
    out = tmp_path / "o1"
    status = main(["weak-norm", "--out", str(out), "--seed", "0"])
    text = capsys.readouterr().out
    assert status == 0
    assert "[PASS]" in text and "[FAIL]" not in text
    summary = json.loads((out / "weak-norm" / "summary.json").read_text())
    assert summary["experiment"] == "weak-norm"
    assert summary["seed"] == 0
    assert "timestamp" in summary and "version" in summary
    assert all({"name", "value", "threshold", "pass"} <= set(r)
               for r in summary["results"])
    csv_text = (out / "weak-norm" / "weak_norm.csv").read_text()
    assert csv_text.splitlines()[0].startswith("lam")


def test_main_runs_are_reproducible(tmp_path, capsys):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        main(["weak-norm", "--out", str(out)])
        outs.append(out / "weak-norm")
    capsys.readouterr()
    s1 = _strip_volatile(json.loads((outs[0] / "summary.json").read_text()))
    s2 = _strip_volatile(json.loads((outs[1] / "summary.json").read_text()))
    assert s1 == s2
    assert (outs[0] / "weak_norm.csv").read_bytes() == \
        (outs[1] / "weak_norm.csv").read_bytes()


def test_main_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"lam": 1e-4}))
    out = tmp_path / "o"
    main(["weak-norm", "--config", str(cfg), "--out", str(out),
          "--lam", "1e-8"])
    capsys.readouterr()
    summary = json.loads((out / "weak-norm" / "summary.json").read_text())
    assert summary["config_echo"]["lam"] == 1e-8


def test_main_rejects_bad_configuration(tmp_path, capsys):
    out = tmp_path / "o"
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    assert main(["weak-norm", "--config", str(bad), "--out",
                 str(out)]) == 2
    assert main(["weak-norm", "--config", str(tmp_path / "missing.json"),
                 "--out", str(out)]) == 2
    assert main(["weak-norm", "--bogus-key", "1", "--out", str(out)]) == 2
    capsys.readouterr()
    assert not out.exists()   # nothing written on config errors
