import json

import pytest
import yaml

from dynrcm import cli
from dynrcm.reports import read_jsonl, strip_timestamp


def _cfg(tmp_path, data, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data))
    return str(p)


def _run(tmp_path, sub, data, out="o", extra=()):
    cfg = _cfg(tmp_path, data)
    out = tmp_path / out
    code = cli.main([sub, "--config", cfg, "--out", str(out), *extra], timestamp="2000-01-01T00:00:00Z")
    return code, out


def test_mu_three_rejected(tmp_path, capsys):
    code, _ = _run(tmp_path, "walk", {"kernel": {"mu": 3, "nu": 2.5}})
    assert code == 2
    assert "μ > 4 required" in capsys.readouterr().err


def test_every_violation_listed_with_module(tmp_path, capsys):
    bad = {"kernel": {"mu": 3}, "environment": {"model": "dyn-percolation", "params": {"p": 1.5}},
           "walk": {"t_max": -1}, "solver": {"dt": 0}, "ip": {"alpha": 2}}
    code, _ = _run(tmp_path, "walk", bad)
    err = capsys.readouterr().err
    assert code == 2
    for frag in ("kernels: μ > 4", "env: dyn-percolation needs p", "walk: t_max", "heat: dt > 0",
                 "homogenize: ip alpha"):
        assert frag in err


def test_theta_warning_recorded(tmp_path):
    code, out = _run(tmp_path, "moments", {"theta": 6, "moments": {"n_samples": 200}})
    assert code == 0
    recs = read_jsonl(out / "moments.jsonl")
    assert any(r.get("record") == "warning" and "ϑ" in r["message"] for r in recs)


def test_header_records_defaults(tmp_path):
    code, out = _run(tmp_path, "env-stats", {"env_stats": {"n_edges": 300}})
    assert code == 0
    head = read_jsonl(out / "env-stats.jsonl")[0]
    assert head["config"]["kernel"] == {"mu": 5.0, "nu": 2.5}
    assert head["config"]["diffusivity"]["n_paths"] == 10000
    assert head["timestamp"] == "2000-01-01T00:00:00Z"
    assert (out / "env-stats_weights.png").exists()


def test_hard_failure_exits_one(tmp_path):
    # Sigma of the constant environment is 2I; a deliberately tiny tolerance with few paths fails
    code, out = _run(tmp_path, "diffusivity", {"diffusivity": {"n_paths": 200, "T": 5.0, "rel_tol": 1e-6}})
    assert code == 1
    assert read_jsonl(out / "diffusivity.jsonl")[-1]["exit_status"] == 1


SMALL = {
    "walk": {"environment": {"model": "dyn-percolation", "params": {"p": 0.7}},
             "walk": {"n_paths": 200, "t_max": 10.0}},
    "corrector": {"environment": {"model": "static-layered"}, "solver": {"L": 8}},
    "diffusivity": {"diffusivity": {"n_paths": 10000, "T": 20.0}, "solver": {"L": 8}},
    "sublinearity": {"environment": {"model": "dyn-percolation", "params": {"p": 0.7}},
                     "sublinearity": {"n_list": [2, 4], "eps": 0.2, "window_factor": 2.0}},
    "ip-test": {"ip": {"n": 20, "n_paths": 400, "env_seeds": [0, 1, 2], "min_accept": 2}},
    "moments": {"environment": {"model": "static-layered"}, "moments": {"n_samples": 300}},
    "env-stats": {"environment": {"model": "dyn-percolation", "params": {"p": 0.7}},
                  "env_stats": {"n_edges": 300}},
    "check": {"check": {"suites": ["tilde", "kernels"], "n_triples": 1000, "kernel_pairs": [[5.0, 2.5]]}},
}


@pytest.mark.parametrize("sub", sorted(SMALL))
def test_subcommands_run_and_write_outputs(tmp_path, sub):
    code, out = _run(tmp_path, sub, SMALL[sub])
    assert code == 0
    recs = read_jsonl(out / f"{sub}.jsonl")
    assert recs[0]["record"] == "header" and recs[-1]["record"] == "summary"
    for f in recs[-1]["files"]:
        assert (out / f).stat().st_size > 0


def test_outputs_identical_across_threads_and_runs(tmp_path):
    data = SMALL["walk"]
    c1, o1 = _run(tmp_path, "walk", data, "a", ["--threads", "1"])
    c2, o2 = _run(tmp_path, "walk", data, "b", ["--threads", "3"])
    assert c1 == c2 == 0
    assert (o1 / "walk.jsonl").read_text() == (o2 / "walk.jsonl").read_text()
    assert (o1 / "walk_paths.csv").read_bytes() == (o2 / "walk_paths.csv").read_bytes()
    cfg = _cfg(tmp_path, data, "c2.yaml")
    cli.main(["walk", "--config", cfg, "--out", str(tmp_path / "c")])
    assert strip_timestamp((tmp_path / "c" / "walk.jsonl").read_text()) == \
        strip_timestamp((o1 / "walk.jsonl").read_text())


def test_seed_flag_overrides_config(tmp_path):
    code, out = _run(tmp_path, "moments", {"seed": 3, "moments": {"n_samples": 100}}, extra=["--seed", "9"])
    head = read_jsonl(out / "moments.jsonl")[0]
    assert head["config"]["seed"] == 9 and head["config"]["environment"]["seed"] == 9


def test_known_sigma():
    import numpy as np
    assert np.allclose(cli.known_sigma({"model": "constant", "params": {"c": 0.5}}), np.eye(2))
    s = cli.known_sigma({"model": "static-layered", "params": {"layers": [0.5, 1.0]}})
    assert np.allclose(s, np.diag([4 / 3, 1.5]))
    assert cli.known_sigma({"model": "dyn-percolation", "params": {"p": 0.5}}) is None
