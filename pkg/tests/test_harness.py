import dataclasses
import textwrap

import numpy as np
import pytest

from clewa.algorithms import make_learner
from clewa.environments import (
    ConstraintModel,
    IIDBernoulli,
    generate,
    learner_stream,
    write_trace,
)
from clewa.harness.cli import EXIT_CONFIG, EXIT_INFEASIBLE, main
from clewa.harness.config import (
    ConfigError,
    EnvironmentSpec,
    ExperimentConfig,
    LearnerSpec,
    load_config,
    parse_config,
)
from clewa.metrics import evaluate
from clewa.harness.runner import (
    RUN_COLUMNS,
    InvariantViolation,
    SummaryRow,
    check_invariants,
    fit_and_report,
    play,
    run_cells,
    run_experiment,
    run_single,
    summarize,
    trace_seed,
)

CONFIG = textwrap.dedent("""\
    [experiment]
    horizons = 64, 128, 256
    replicates = 3
    master_seed = 11

    [environment]
    process = iid_bernoulli
    means = 0.9, 0.6, 0.3
    constraint_mean = 0.2, 0.5, 0.8
    c0 = 0.5

    [learner.LEWA]
    kind = LEWA

    [learner.bandit]
    kind = BanditLEWA
    gamma = 0.1

    [learner.hp]
    kind = HP-LEWA
    epsilon = 0.05

    [thresholds]
    violation = 0.95
    """)


def _config(**changes):
    cfg = parse_config(CONFIG, environ={})
    return dataclasses.replace(cfg, **changes)


# -- configuration --------------------------------------------------------------


def test_parse_config():
    cfg = parse_config(CONFIG, environ={})
    assert cfg.horizons == (64, 128, 256) and cfg.replicates == 3 and cfg.master_seed == 11
    assert [s.label for s in cfg.learners] == ["LEWA", "bandit", "hp"]
    assert cfg.learners[1].override_map == {"gamma": 0.1}
    assert cfg.threshold_map == {"violation": 0.95}


def test_seed_precedence():
    assert parse_config(CONFIG, environ={"CLEWA_SEED": "5"}).master_seed == 5
    assert parse_config(CONFIG, seed=9, environ={"CLEWA_SEED": "5"}).master_seed == 9
    assert parse_config(CONFIG, environ={}).master_seed == 11


@pytest.mark.parametrize("broken", [
    CONFIG.replace("horizons = 64, 128, 256", "horizons = 128, 64"),
    CONFIG.replace("replicates = 3", "replicates = 0"),
    CONFIG.replace("kind = LEWA", "kind = UCB"),
    CONFIG.replace("gamma = 0.1", "temperature = 2"),
    CONFIG.replace("means = 0.9, 0.6, 0.3", "means = 0.9, 0.6"),
    CONFIG.replace("process = iid_bernoulli", "process = markov"),
    "[experiment]\nhorizons = 4\n",
])
def test_invalid_configs(broken):
    with pytest.raises(ConfigError):
        parse_config(broken, environ={})


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.ini")


# -- runner ------------------------------------------------------------------------


def test_ewa_concentrates_on_rewarded_action():
    env = EnvironmentSpec("iid_bernoulli", (("means", (1.0, 0.0, 0.0)),), (0.5, 0.5, 0.5), 0.5)
    cfg = ExperimentConfig((LearnerSpec.of("EWA"),), env, (16,), 1, 3)
    _, res = run_single(cfg.learners[0], cfg, 16, 0, keep=True)
    final = res.records.distributions[-1]
    assert final[0] > final[1:].max()


def test_runs_csv_is_byte_identical(tmp_path):
    cfg = _config()
    run_experiment(cfg, output_dir=tmp_path / "a")
    run_experiment(cfg, jobs=2, output_dir=tmp_path / "b")
    for name in ("runs.csv", "summary.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    header = (tmp_path / "a" / "runs.csv").read_text().splitlines()[0]
    assert header == ",".join(RUN_COLUMNS)


def test_reordering_learners_leaves_each_run_unchanged():
    cfg = _config()
    flipped = _config(learners=tuple(reversed(cfg.learners)))
    key = lambda rows: {(r.learner, r.T, r.replicate): r.csv_values() for r in rows}
    assert key(run_cells(cfg)) == key(run_cells(flipped))


def test_seeds_depend_on_cell_only():
    assert trace_seed(1, 64, 0) == trace_seed(1, 64, 0)
    assert len({trace_seed(1, 64, 0), trace_seed(1, 64, 1), trace_seed(1, 128, 0),
                trace_seed(2, 64, 0)}) == 4


def test_wall_time_recorded_only_on_request():
    rows = run_cells(_config(horizons=(64,)))
    assert all(r.wall_ms == 0.0 for r in rows)
    rows = run_cells(_config(horizons=(64,), record_wall_time=True))
    assert all(r.wall_ms > 0.0 for r in rows)


def test_infeasible_model_is_rejected(tmp_path):
    env = EnvironmentSpec("iid_bernoulli", (("means", (0.5, 0.5)),), (0.1, 0.2), 0.5)
    cfg = ExperimentConfig((LearnerSpec.of("LEWA"),), env, (16,), 1, 0)
    with pytest.raises(ValueError):
        run_experiment(cfg, output_dir=tmp_path)


def test_invariant_checker_catches_corruption():
    tr = generate(IIDBernoulli((0.5, 0.5)), ConstraintModel((0.2, 0.8), 0.5), 50, 1)
    lr = make_learner("BanditLEWA", 2, 50, 0.5)
    rec = play(lr, tr, learner_stream(1, "x"))
    check_invariants(lr, rec, lr.lam)
    rec.distributions[3] = [1.0, 0.0]
    with pytest.raises(InvariantViolation):
        check_invariants(lr, rec, lr.lam)
    with pytest.raises(InvariantViolation):
        check_invariants(lr, play(make_learner("LEWA", 2, 50, 0.5), tr, learner_stream(1, "y")),
                         lr.dual_cap * 2)


def _summary(metric_fn, metric):
    rows = []
    for T in (1024, 2048, 4096, 8192):
        vals = dict(regret_mean=0.0, realized_regret_mean=0.0, violation_mean=0.0)
        vals[metric + "_mean"] = metric_fn(T)
        rows.append(SummaryRow("X", T, 1, regret_std=0.0, realized_regret_std=0.0,
                               violation_std=0.0, regret_bound=1.0, bound_fraction=1.0, **vals))
    return rows


def test_fit_and_report_flags_linear_violation():
    table = fit_and_report(_summary(lambda T: T, "violation"), {"violation": 0.85})
    (row,) = [r for r in table if r.metric == "violation"]
    assert row.slope == pytest.approx(1.0, abs=1e-9) and row.passed is False
    assert row.line().startswith("FAIL")


def test_fit_and_report_passes_root_regret():
    table = fit_and_report(_summary(lambda T: T ** 0.5, "regret"), {"regret": 0.75})
    (row,) = [r for r in table if r.metric == "regret"]
    assert row.slope == pytest.approx(0.5, abs=1e-9) and row.passed is True


def test_fit_and_report_needs_three_horizons():
    with pytest.raises(ValueError):
        fit_and_report(_summary(lambda T: T, "regret")[:2])


def test_summary_statistics():
    rows = run_cells(_config(horizons=(64,)))
    for s in summarize(rows, 3):
        assert s.regret_std >= 0.0 and 0.0 <= s.bound_fraction <= 1.0
        assert s.regret_bound == pytest.approx(3 * np.sqrt(64 * np.log(3)))


# -- command line --------------------------------------------------------------------


def test_cli_run(tmp_path, capsys):
    path = tmp_path / "exp.ini"
    path.write_text(CONFIG)
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "out"),
                 "--seed", "3"]) == 0
    out = capsys.readouterr().out
    assert "master_seed=3" in out and "slope=" in out and "union-bounded" in out
    assert (tmp_path / "out" / "runs.csv").is_file()


def test_cli_run_config_error(tmp_path, capsys):
    path = tmp_path / "bad.ini"
    path.write_text(CONFIG.replace("kind = LEWA", "kind = nope"))
    assert main(["run", "--config", str(path)]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_cli_run_infeasible(tmp_path):
    path = tmp_path / "inf.ini"
    path.write_text(CONFIG.replace("c0 = 0.5", "c0 = 0.95"))
    assert main(["run", "--config", str(path), "--out", str(tmp_path)]) == EXIT_INFEASIBLE


def test_cli_oracle(capsys):
    assert main(["oracle", "--rewards", "10,4", "--constraint", "0.2,0.8", "--c0", "0.5"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[1] == "value=7" and out[2] == "active=true"
    assert main(["oracle", "--rewards", "1,2", "--constraint", "0.1,0.2", "--c0", "0.5"]) \
        == EXIT_INFEASIBLE


def test_cli_replay_matches_direct_run(tmp_path, capsys):
    tr = generate(IIDBernoulli((0.8, 0.3)), ConstraintModel((0.3, 0.8), 0.5), 120, 42)
    path = write_trace(tr, tmp_path / "t.csv")
    assert main(["replay", "--trace", str(path), "--learner", "LEWA"]) == 0
    out = dict(line.split("=", 1) for line in capsys.readouterr().out.splitlines())
    lr = make_learner("LEWA", 2, 120, 0.5)
    res = evaluate(play(lr, tr, learner_stream(42, "LEWA")), tr)
    assert float(out["regret"]) == res.regret
    assert float(out["violation"]) == res.violation
