import json
from pathlib import Path

import numpy as np
import pytest

import partition_bandits.selection as selection_mod
from partition_bandits.inference import OptimizerConfig
from partition_bandits.partition_model import Trajectory, simulate_agent
from partition_bandits.workbench.campaign import agent_seed, generate_campaign, load_campaign
from partition_bandits.workbench.cli import main
from partition_bandits.workbench.config import ExperimentConfig, default_c_grid
from partition_bandits.workbench.io import (
    TrajectoryParseError,
    ingest_trajectory_csv,
    parse_trajectory_csv,
    trajectory_csv_text,
    write_trajectory_csv,
)
from partition_bandits.workbench.sweeps import MismatchMatrix, run_selection_batch, sweep_holdout, sweep_penalty

FAST = OptimizerConfig(max_iterations=4)


def tree_bytes(root):
    root = Path(root)
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


# csv io


def test_csv_roundtrip_byte_exact(tmp_path, catalog, contexts, stimuli):
    traj = simulate_agent(catalog[4], 0.67, contexts, stimuli.reward, seed=9)
    p, q = tmp_path / "a.csv", tmp_path / "b.csv"
    write_trajectory_csv(traj, p)
    back = ingest_trajectory_csv(p)
    assert back == traj
    write_trajectory_csv(back, q)
    assert p.read_bytes() == q.read_bytes()


def test_fractional_rewards_roundtrip():
    traj = Trajectory(np.array([1, 5, 9]), np.array([0, 1, 1]), np.array([0.1, 1 / 3, 0.0]))
    text = trajectory_csv_text(traj)
    assert trajectory_csv_text(parse_trajectory_csv(text)) == text


@pytest.mark.parametrize(
    "body, row",
    [
        ("1,1,1,1.0\n2,2,3,1.0\n", 3),
        ("1,1,1,1.0\n3,2,1,1.0\n", 3),
        ("1,1,1,1.0\n2,2,1\n", 3),
        ("1,1,1,2.5\n", 2),
        ("1,x,1,1.0\n", 2),
    ],
)
def test_malformed_rows_named(body, row):
    with pytest.raises(TrajectoryParseError) as exc:
        parse_trajectory_csv("trial,object_id,action,reward\n" + body)
    assert exc.value.row == row
    assert f"row {row}" in str(exc.value)


def test_bad_header_and_empty():
    with pytest.raises(TrajectoryParseError) as exc:
        parse_trajectory_csv("t,o,a,r\n1,1,1,1.0\n")
    assert exc.value.row == 1
    with pytest.raises(TrajectoryParseError):
        parse_trajectory_csv("trial,object_id,action,reward\n")


# config


def test_config_validation(tmp_path):
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"n": 500, "nonsense": 1})
    with pytest.raises(ValueError):
        ExperimentConfig(models=["OneForAll", "Nope"])
    with pytest.raises(ValueError):
        ExperimentConfig(n_grid=[1])
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ValueError):
        ExperimentConfig.load(bad)
    cfg = ExperimentConfig()
    assert cfg.with_seed(7).master_seed == 7 and cfg.master_seed == 0
    assert cfg.c_grid == sorted(cfg.c_grid) and 0.012 in cfg.c_grid
    assert any(c == pytest.approx(1 / np.log(500) ** 2) for c in default_c_grid(500))


# campaign


def test_agent_seeds_distinct():
    seeds = {agent_seed(0, m, i) for m in ("A", "B") for i in range(50)}
    assert len(seeds) == 100
    assert agent_seed(0, "A", 3) == agent_seed(0, "A", 3)
    assert agent_seed(1, "A", 3) != agent_seed(0, "A", 3)


def test_campaign_reproducible(tmp_path):
    cfg = ExperimentConfig(n=60, agents_per_model=2, master_seed=5)
    generate_campaign(cfg, tmp_path / "a")
    generate_campaign(cfg, tmp_path / "b")
    a, b = tree_bytes(tmp_path / "a"), tree_bytes(tmp_path / "b")
    assert a == b
    assert len([k for k in a if k.endswith(".csv") and "/" in k]) == 12
    generate_campaign(cfg.with_seed(6), tmp_path / "c")
    assert tree_bytes(tmp_path / "c") != a
    manifest = json.loads(a["manifest.json"])
    assert {"file", "generator", "theta", "seed", "n", "K", "schedule"} <= set(manifest["trajectories"][0])


def test_load_campaign(tmp_path):
    cfg = ExperimentConfig(n=30, agents_per_model=1, models=["OneForAll", "ByShape"])
    items = generate_campaign(cfg, tmp_path)
    loaded = load_campaign(tmp_path)
    assert [t for _, t in loaded] == [t for _, t in items]
    assert loaded[1][1].generator_tag["model"] == "ByShape"
    (tmp_path / "ByShape" / "agent_000.csv").unlink()
    with pytest.raises(FileNotFoundError, match="ByShape/agent_000.csv"):
        load_campaign(tmp_path)


# sweeps


def test_mismatch_matrix():
    pairs = [("A", "A"), ("A", "B"), ("B", "B"), ("A", "A")]
    m = MismatchMatrix.from_selections(pairs, ["A", "B", "C"])
    np.testing.assert_allclose(m.frequencies.sum(axis=1), 1.0)
    assert m.mismatch_rate("A") == pytest.approx(1 / 3)
    assert m.mismatch_rate("B") == 0.0
    assert m.to_csv().splitlines()[0] == "generator,selected,frequency"


@pytest.fixture(scope="module")
def small_campaign(catalog, contexts, stimuli):
    return [simulate_agent(s, 0.67, contexts[:120], stimuli.reward, seed=i) for i, s in enumerate(catalog[:3])]


def test_sweep_penalty_fits_once(monkeypatch, catalog, small_campaign):
    calls = []
    real = selection_mod.fit_mle

    def counting(*args, **kw):
        calls.append(args[0].name)
        return real(*args, **kw)

    monkeypatch.setattr(selection_mod, "fit_mle", counting)
    grid = [0.0, 0.012, 0.05, 1.0]
    result = sweep_penalty(catalog[:3], small_campaign, grid, optimizer=FAST)
    assert len(calls) == result.n_fits == 3 * 3
    assert list(result.matrices) == grid
    for c in grid:
        np.testing.assert_allclose(result.matrices[c].frequencies.sum(axis=1), 1.0)
    # a huge penalty always picks the single-cell model
    assert all(r.selected == "OneForAll" for r in result.reports[1.0])


def test_sweep_equals_single_batch(catalog, small_campaign):
    result = sweep_penalty(catalog[:3], small_campaign, [0.012], optimizer=FAST)
    reports, matrix = run_selection_batch(catalog[:3], small_campaign, "penalized", c=0.012, optimizer=FAST)
    assert [r.to_json() for r in result.reports[0.012]] == [r.to_json() for r in reports]
    np.testing.assert_array_equal(result.matrices[0.012].counts, matrix.counts)


def test_holdout_boundary_and_single_model(catalog, small_campaign):
    result = sweep_holdout(catalog[:3], small_campaign, [120], optimizer=FAST)
    np.testing.assert_allclose(result.matrices[120].frequencies.sum(axis=1), 1.0)
    _, m = run_selection_batch(catalog[:1], small_campaign, "holdout", optimizer=FAST)
    np.testing.assert_array_equal(m.frequencies[:, 0], 1.0)


def test_sweep_holdout_shapes(catalog, small_campaign):
    result = sweep_holdout(catalog[:3], small_campaign, [40, 80], optimizer=FAST)
    assert result.values == [40, 80]
    assert result.reports[40][0].params["N"] == 40
    assert {r["N"] for r in result.csv_rows()} == {"40", "80"}


def test_parallel_matches_serial(catalog, small_campaign):
    serial, m1 = run_selection_batch(catalog[:3], small_campaign, "holdout", optimizer=FAST, workers=1)
    parallel, m2 = run_selection_batch(catalog[:3], small_campaign, "holdout", optimizer=FAST, workers=2)
    assert [r.to_json() for r in serial] == [r.to_json() for r in parallel]
    np.testing.assert_array_equal(m1.counts, m2.counts)
    with pytest.raises(ValueError):
        run_selection_batch(catalog[:3], small_campaign, "bootstrap")


# cli


def test_cli_end_to_end(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    camp = tmp_path / "camp"
    cfg.write_text(json.dumps({
        "n": 60, "agents_per_model": 1, "models": ["OneForAll", "ByShape"],
        "campaign": str(camp), "optimizer": {"max_iterations": 3}, "n_grid": [30], "c_grid": [0.0, 0.012],
        "risk": {"n_trajectories": 3}, "experts": {"runs": 2},
    }))
    assert main(["simulate", "--config", str(cfg), "--out", str(camp)]) == 0
    assert (camp / "manifest.json").exists()
    for cmd in (["fit"], ["select", "--method", "holdout"], ["select", "--method", "penalized"],
                ["sweep-n"], ["sweep-c"], ["risk"], ["experts-select"]):
        out = tmp_path / cmd[-1]
        assert main([cmd[0], *cmd[1:], "--config", str(cfg), "--out", str(out), "--seed", "3"]) == 0, cmd
        assert json.loads((out / "config.json").read_text())["master_seed"] == 3
    assert (tmp_path / "penalized" / "scores.csv").read_text().startswith("trajectory,model,D,")
    assert (tmp_path / "sweep-c" / "sweep_c.csv").exists()


def test_cli_exit_codes(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"n": -3}))
    assert main(["simulate", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert main(["simulate", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path / "o")]) == 1
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"campaign": str(tmp_path / "nowhere")}))
    assert main(["fit", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    traj_file = tmp_path / "t.csv"
    traj_file.write_text("trial,object_id,action,reward\n1,1,7,1.0\n")
    cfg.write_text(json.dumps({"trajectories": [str(traj_file)]}))
    assert main(["fit", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
