"""End-to-end pipeline: rules -> labelling -> Pareto sweep -> plan."""

import csv

import pytest

from approx_nfa.cli import main
from approx_nfa.models import ConfigError, StagePlan, UsageError
from approx_nfa.recompile import compile_ruleset, read_rules
from approx_nfa.runner import (
    PipelineConfig,
    SweepPoint,
    SweepRow,
    grid_points,
    load_pipeline_config,
    pareto_front,
    run_pipeline,
)
from approx_nfa.traffic import synthetic_sample, write_raw
from approx_nfa.utils import console_logger

RULES = (
    "web-1\tGET /cgi-bin/[a-z]+\\.pl\n"
    "web-2\t/etc/passwd\n"
    "dns-1\t^\\x00\\x01\\x00\\x00\n"
    "ftp-1\tSITE EXEC [^\\n]{4,12}\n"
    "smtp-1\tpcre:\"/rcpt to:<[a-z]{3,8}@/i\"\n"
)


@pytest.fixture
def project(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("HOME", str(tmp_path / "home"))
    (tmp_path / "rules.txt").write_text(RULES)
    nfa = compile_ruleset(read_rules(str(tmp_path / "rules.txt")))
    write_raw(synthetic_sample(nfa, 400, 0.05, seed=1), str(tmp_path / "train.raw"))
    write_raw(synthetic_sample(nfa, 400, 0.05, seed=2), str(tmp_path / "test.raw"))
    (tmp_path / "pipeline.toml").write_text(
        'rules = "rules.txt"\n'
        'train = ["train.raw"]\n'
        'test = ["test.raw"]\n'
        'output_dir = "out"\n'
        'methods = ["prune", "merge-prune", "bfs"]\n'
        'thetas = [0.2, 0.5, 1.0]\n'
        'distances = [1.05]\n'
        'frequencies = [0.1]\n'
        '\n'
        '[plan]\n'
        'input_rate = 100\n'
        'engine_throughput = 6.4\n'
        'max_stages = 2\n'
        'objective = "out"\n'
        'max_luts = 1000000\n')
    return tmp_path


def test_grid_points():
    points = grid_points(["prune", "merge", "merge-prune", "bfs"], [0.5, 1], [1.5], [0.1, 0.2])
    ids = [p.candidate_id for p in points]
    assert ids[:2] == ["prune-t0.5", "prune-t1"]
    assert "merge-d1.5-f0.1" in ids
    assert "merge-prune-t0.5-d1.5-f0.2" in ids
    assert ids[-1] == "bfs-t1"
    assert len(points) == 2 + 2 + 4 + 2


def test_grid_points_need_grids():
    with pytest.raises(UsageError):
        grid_points(["merge"], [0.5], [], [0.1])


def _row(id, cost, prob, precise=False):
    return SweepRow(id, "prune", None, None, None, 1, cost, 1.0, prob, precise=precise)


def test_pareto_front_drops_dominated_rows():
    rows = [
        _row("precise", 100, 0.1, precise=True),
        _row("a", 50, 0.3),
        _row("b", 60, 0.4),   # dominated by a
        _row("c", 70, 0.2),
        _row("d", 80, 0.25),  # dominated by c
        _row("e", 50, 0.3),   # duplicate of a
    ]
    assert [r.id for r in pareto_front(rows)] == ["a", "c", "precise"]


def test_pareto_front_keeps_cheaper_row_with_precise_prob():
    rows = [_row("precise", 1000, 0.1, precise=True), _row("prune-t0.9", 100, 0.1),
            _row("prune-t0.5", 50, 0.4)]
    assert [r.id for r in pareto_front(rows)] == ["prune-t0.5", "prune-t0.9", "precise"]


def test_pareto_front_prefers_precise_on_exact_tie():
    rows = [_row("bfs-t1", 10, 0.1), _row("precise", 10, 0.1, precise=True)]
    assert [r.id for r in pareto_front(rows)] == ["precise"]


def test_pareto_front_without_precise():
    assert [r.id for r in pareto_front([_row("a", 1, 0.5), _row("b", 2, 0.4)])] == ["a", "b"]


def test_load_config_resolves_paths(project):
    config = load_pipeline_config(str(project / "pipeline.toml"))
    assert config.rules == str(project / "rules.txt")
    assert config.train == [str(project / "train.raw")]
    assert config.output_dir == str(project / "out")


def test_config_errors(project):
    (project / "bad.toml").write_text('train = ["train.raw"]\ntest = ["test.raw"]\noutput_dir = "o"\n')
    with pytest.raises(ConfigError):
        load_pipeline_config(str(project / "bad.toml"))
    (project / "typo.toml").write_text('rulez = "rules.txt"\n')
    with pytest.raises(ConfigError):
        load_pipeline_config(str(project / "typo.toml"))
    with pytest.raises(FileNotFoundError):
        PipelineConfig(train=["nope.raw"], test=["test.raw"], output_dir="o",
                       rules="rules.txt").validate()


def test_run_pipeline(project):
    config = load_pipeline_config(str(project / "pipeline.toml"))
    result = run_pipeline(config, logger=console_logger("test", 0))
    out = project / "out"
    for name in ("precise.nfa", "labeling.csv", "sweep.csv", "candidates.csv", "plan.json",
                 "plan.txt"):
        assert (out / name).exists(), name
    assert len(result.rows) == 3 + 3 + 3 + 1
    ids = [c.id for c in result.candidates]
    assert "precise" in ids
    costs = [c.lut for c in result.candidates]
    probs = [c.accpt for c in result.candidates]
    assert costs == sorted(costs)
    assert probs == sorted(probs, reverse=True)
    assert all(row.a_fn == 0 for row in result.rows)
    precise = next(row for row in result.rows if row.precise)
    assert all(row.prob >= precise.prob for row in result.rows)
    assert isinstance(result.plan, StagePlan)
    with open(out / "candidates.csv", newline="") as f:
        written = list(csv.DictReader(f))
    assert [row["id"] for row in written] == ids
    points = [(float(row["lut"]), float(row["accpt"]), row["precise"] == "true") for row in written]
    for i, (lut, accpt, is_precise) in enumerate(points):
        if is_precise:
            continue  # always kept
        for j, (other_lut, other_accpt, _) in enumerate(points):
            dominated = other_lut <= lut and other_accpt <= accpt and (other_lut, other_accpt) != (lut, accpt)
            assert i == j or not dominated, (written[i], written[j])


def test_pipeline_reuses_labeling(project):
    config = load_pipeline_config(str(project / "pipeline.toml"))
    run_pipeline(config, logger=console_logger("test", 0))
    stamp = (project / "out" / "labeling.csv").stat().st_mtime_ns
    run_pipeline(load_pipeline_config(str(project / "pipeline.toml")),
                 logger=console_logger("test", 0))
    assert (project / "out" / "labeling.csv").stat().st_mtime_ns == stamp


def test_pipeline_cli(project, capsys):
    assert main(["pipeline", "pipeline.toml", "--json", "-q"]) == 0
    assert '"candidates"' in capsys.readouterr().out


def test_sweep_point_ids():
    assert SweepPoint("merge-prune", 0.5, 1.005, 0.1).candidate_id == "merge-prune-t0.5-d1.005-f0.1"
