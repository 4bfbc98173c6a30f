import json
import subprocess
import sys

import numpy as np
import pytest

from rltask.cli import main
from rltask.core import Policy
from rltask.domains.chain import chain_policy, make_chain
from rltask.experiments import ExperimentConfig, ResultTable, cmd_learn, cmd_simulate
from rltask.random_tasks import random_task
from rltask.taskfile import TaskFileError, dump_task, load_task, parse_task

GOOD = """{
  "n_states": 2, "n_actions": 1,
  "transitions": [[0, 0, 0, 0.5], [0, 0, 1, 0.5], [1, 0, 0, 0.5], [1, 0, 1, 0.5]],
  "reward": 1.0,
  "discount": {"default": 0.9, "exceptions": [[1, 0, 0, 0.0]]}
}
"""


def test_parse_defaults():
    tf = parse_task(GOOD)
    assert tf.dynamics.shape == (2, 1, 2)
    gamma = tf.task.table("discount", tf.dynamics.shape)
    assert gamma[1, 0, 0] == 0 and gamma[0, 0, 0] == 0.9
    assert not tf.task.table("trace", tf.dynamics.shape).any()
    assert np.array_equal(tf.policy.probs, np.ones((2, 1)))


@pytest.mark.parametrize("text, line, fragment", [
    ('{\n "n_states": 2,\n "n_actions": 1\n "transitions": []}', 4, "delimiter"),
    ('{\n "n_states": 2,\n "n_actions": 0,\n "transitions": []}', 3, "positive integer"),
    ('{\n "n_states": 2,\n "n_actions": 1,\n "transitions": [[0, 0, 5, 1.0]]}', 4, "out of range"),
    ('{\n "n_states": 1,\n "n_actions": 1,\n "transitions": [[0, 0, 0, 0.5]]}', 4, "sum"),
    ('{"n_states": 1, "n_actions": 1, "transitions": [[0, 0, 0, 1.0]],\n "discount": {"exceptions": []}}', 2,
     "default"),
])
def test_parse_errors_carry_line(text, line, fragment):
    with pytest.raises(TaskFileError) as info:
        parse_task(text, "bad.json")
    assert info.value.line == line
    assert f"bad.json:{line}" in str(info.value)
    assert fragment in str(info.value)


def test_missing_field():
    with pytest.raises(TaskFileError, match="transitions"):
        parse_task('{"n_states": 1, "n_actions": 1}')


def test_bad_policy_shape():
    with pytest.raises(TaskFileError, match="policy"):
        parse_task(GOOD.replace('"reward": 1.0', '"reward": 1.0, "policy": [[1.0]]'))


def test_missing_file(tmp_path):
    with pytest.raises(TaskFileError):
        load_task(tmp_path / "nope.json")


@pytest.mark.parametrize("seed", range(5))
def test_round_trip(seed, tmp_path):
    rt = random_task(seed)
    path = tmp_path / "t.json"
    path.write_text(dump_task(rt.dynamics, rt.task, rt.target, rt.behavior))
    tf = load_task(path)
    shape = rt.dynamics.shape
    assert np.allclose(tf.dynamics.transition, rt.dynamics.transition)
    for key in ("reward", "discount", "trace"):
        assert np.array_equal(tf.task.table(key, shape), rt.task.table(key, shape))
    assert np.allclose(tf.task.interest_vector(shape[0]), rt.task.interest_vector(shape[0]))
    assert np.allclose(tf.policy.probs, rt.target.probs) and np.allclose(tf.behavior.probs, rt.behavior.probs)


def test_shipped_task_files():
    tf = load_task("tasks/chain.json")
    dyn, task = make_chain("transition_based")
    assert np.array_equal(tf.dynamics.transition, dyn.transition)
    assert np.allclose(tf.policy.probs, chain_policy("transition_based", 0.75).probs)
    assert load_task("tasks/counterexample.json").dynamics.n_states == 2


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_analyze_counterexample(capsys):
    code, out, _ = run(["analyze", "--domain", "counterexample"], capsys)
    assert code == 0
    rows = {(r[0], r[1]): r[2] for r in (line.split(",") for line in out.splitlines()[1:])}
    assert float(rows[("d_pi lambda=task", "xi")]) == pytest.approx(1.26876, abs=1e-5)
    assert float(rows[("emphasis lambda=task", "xi")]) < 1


def test_analyze_json_and_lambdas(capsys):
    code, out, _ = run(["analyze", "--task", "tasks/chain.json", "--lambda", "0,0.5",
                        "--weighting", "d_pi", "--format", "json"], capsys)
    doc = json.loads(out)
    assert code == 0 and len({r["label"] for r in doc["rows"]}) == 2
    assert doc["metadata"]["seed"] == 0


def test_analyze_non_terminating_cell(capsys, tmp_path):
    path = tmp_path / "loop.json"
    path.write_text('{"n_states": 1, "n_actions": 1, "transitions": [[0, 0, 0, 1.0]], "reward": 1}')
    code, out, _ = run(["analyze", "--task", str(path)], capsys)
    assert code == 0 and "termination_error" in out


def test_equivalence_command(capsys):
    code, out, _ = run(["equivalence", "--domain", "chain"], capsys)
    assert code == 0 and "passed,1" in out


def test_equivalence_non_terminating_exit_code(capsys, tmp_path):
    path = tmp_path / "loop.json"
    path.write_text('{"n_states": 1, "n_actions": 1, "transitions": [[0, 0, 0, 1.0]], "reward": 1}')
    code, _, err = run(["equivalence", "--task", str(path)], capsys)
    assert code == 1 and "error" in err


def test_input_errors_exit_2(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n "n_states": 2,\n oops}')
    code, _, err = run(["analyze", "--task", str(bad)], capsys)
    assert code == 2 and "bad.json:3" in err
    assert run(["analyze"], capsys)[0] == 2
    assert run(["analyze", "--domain", "chain", "--weighting", "nope"], capsys)[0] == 2
    assert run(["learn", "--domain", "chain", "--runs", "0"], capsys)[0] == 2
    with pytest.raises(SystemExit) as exc:
        main(["analyze", "--lambda", "x"])
    assert exc.value.code == 2


def test_learn_outputs_curve(capsys, tmp_path):
    out_file = tmp_path / "curve.csv"
    code, out, _ = run(["learn", "--domain", "chain", "--steps", "2000", "--lambda", "0.5",
                        "--algorithm", "true_online", "--out", str(out_file)], capsys)
    assert code == 0 and out == ""
    lines = out_file.read_text().splitlines()
    assert lines[0] == "label,metric,mean,stderr,config_hash" and len(lines) == 11


def test_learn_elstdq(capsys):
    code, out, _ = run(["learn", "--domain", "chain", "--steps", "500", "--algorithm", "elstdq"], capsys)
    assert code == 0 and "step=500" in out


def test_learn_zero_steps_is_empty():
    table = cmd_learn(ExperimentConfig("learn", domain="chain", steps=0))
    assert table.rows == []


def test_same_config_same_output(capsys):
    argv = ["learn", "--domain", "random", "--seed", "3", "--steps", "1000"]
    first = run(argv, capsys)[1]
    assert run(argv, capsys)[1] == first
    assert run(argv[:-3] + ["4", "--steps", "1000"], capsys)[1] != first


def test_config_digest():
    a = ExperimentConfig("learn", domain="chain")
    assert a.digest() == ExperimentConfig("learn", domain="chain").digest()
    assert a.digest() != ExperimentConfig("learn", domain="chain", seed=1).digest()


def test_result_table_formats():
    t = ResultTable(metadata={"config_hash": "abc"})
    t.add("x", "m", 1 / 3, 0.01)
    t.add("y", "m", float("nan"))
    assert "x,m,0.333333,0.01,abc" in t.to_csv()
    doc = json.loads(t.to_json())
    assert doc["rows"][1]["mean"] is None
    assert t.value("x", "m") == pytest.approx(1 / 3)


def test_simulate_command_small(capsys):
    code, out, _ = run(["simulate", "--variant", "trans_hard", "--runs", "20", "--steps", "30"], capsys)
    assert code == 0 and "trans_hard,deliveries" in out


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "rltask", "equivalence", "--domain", "counterexample"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "passed,1" in res.stdout
