import csv

import pytest

from dronehrrm import cli, experiment

FAST = ["--set", "drone.speed=60.0", "--set", "train.replay_capacity=5000"]


def run(tmp_path, *argv):
    return cli.main(list(argv) + ["--out", str(tmp_path)] + FAST)


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))


@pytest.fixture(scope="module")
def policy(tmp_path_factory):
    out = tmp_path_factory.mktemp("train")
    assert cli.main(["train", "--episodes", "2", "--seed", "1", "--out", str(out)] + FAST) == 0
    return out / "policy.qtable"


def test_train_writes_policy_and_log(policy):
    log = rows(policy.parent / "train_log.csv")
    assert len(log) == 2 and policy.is_file()


def test_eval_is_byte_identical(tmp_path, policy):
    names = ("eval_episodes.csv", "eval_summary.csv", "eval_heatmap.csv")
    snaps = []
    for _ in range(2):
        assert run(tmp_path, "eval", "--policy", str(policy), "--episodes", "2", "--seed", "4") == 0
        snaps.append([(tmp_path / n).read_bytes() for n in names])
    assert snaps[0] == snaps[1]


def test_headers_embed_seed_and_config(tmp_path):
    assert run(tmp_path, "baseline", "--episodes", "1", "--seed", "11",
               "--set", "weights.alpha_h=0.25") == 0
    head = [l for l in (tmp_path / "baseline_summary.csv").read_text().splitlines()
            if l.startswith("#")]
    assert "# seed = 11" in head
    assert "# weights.alpha_h = 0.25" in head and "# drone.speed = 60.0" in head


def test_baseline_defaults_to_config_episode_count(tmp_path):
    assert run(tmp_path, "baseline", "--set", "episodes=3") == 0
    assert len(rows(tmp_path / "baseline_episodes.csv")) == 3


def test_sweep_emits_one_row_per_value(tmp_path):
    assert run(tmp_path, "sweep", "--sweep", "weights.alpha_h=0,0.25,0.5",
               "--train-episodes", "1", "--episodes", "1") == 0
    got = rows(tmp_path / "sweep.csv")
    assert [float(r["value"]) for r in got] == [0.0, 0.25, 0.5]
    assert max(float(r["handovers_norm"]) for r in got) in (0.0, 1.0)


def test_compare_and_heatmap(tmp_path, policy):
    assert run(tmp_path, "compare", "--policy", str(policy), "--episodes", "1") == 0
    assert [r["scheme"] for r in rows(tmp_path / "compare.csv")] == ["learned", "baseline"]
    assert run(tmp_path, "heatmap", "--scheme", "baseline", "--episodes", "1", "--cell", "100") == 0
    assert (tmp_path / "heatmap_baseline.csv").is_file()


def test_figures_rendered(tmp_path):
    pytest.importorskip("matplotlib")
    assert run(tmp_path, "baseline", "--episodes", "1", "--figures") == 0
    assert (tmp_path / "baseline_heatmap.png").read_bytes()[:4] == b"\x89PNG"


@pytest.mark.parametrize("argv", [
    ["eval", "--episodes", "1"],                          # no policy
    ["eval", "--policy", "/nonexistent.qtable"],
    ["baseline", "--set", "weights.alpha_h=-1"],
    ["baseline", "--set", "nosuch.key=1"],
    ["baseline", "--set", "oops"],
    ["sweep", "--sweep", "weights.alpha_h"],
])
def test_input_errors_exit_1(tmp_path, argv):
    assert run(tmp_path, *argv) == 1


def test_corrupt_policy_exit_1(tmp_path):
    bad = tmp_path / "bad.qtable"
    bad.write_bytes(b"junk")
    assert run(tmp_path, "eval", "--policy", str(bad)) == 1


def test_runtime_error_exit_2(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise RuntimeError("simulated failure")

    monkeypatch.setattr(experiment, "evaluate", boom)
    assert run(tmp_path, "baseline", "--episodes", "1") == 2
