"""JSON task files.

A file lists the nonzero transition probabilities as ``[s, a, s', p]``
triples. Rewards, discounts and traces have a default plus a list of
``[s, a, s', value]`` exceptions, so an episodic task only lists its
terminating transitions::

    {
      "n_states": 2, "n_actions": 1,
      "transitions": [[0, 0, 0, 0.5], [0, 0, 1, 0.5], [1, 0, 0, 0.5], [1, 0, 1, 0.5]],
      "reward": {"default": 0.0},
      "discount": {"default": 0.99, "exceptions": []},
      "trace": {"default": 0.0, "exceptions": [[0, 0, 0, 0.9], [1, 0, 0, 0.9]]},
      "interest": 1.0,
      "policy": [[1.0], [1.0]]
    }

A plain number is accepted wherever a ``{"default": ...}`` block is.
``policy`` and ``behavior`` are optional ``n x A`` tables and default to
uniform.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import EnvironmentDynamics, Policy, RLTask


class TaskFileError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str = "<task>"):
        self.line = line
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class TaskFile:
    dynamics: EnvironmentDynamics
    task: RLTask
    policy: Policy
    behavior: Policy


def _line_of(text: str, key: str) -> int | None:
    pos = text.find(f'"{key}"')
    return None if pos < 0 else text.count("\n", 0, pos) + 1


def _triples(raw, n, n_a, key, fail):
    if not isinstance(raw, list):
        fail(f"{key} must be a list of [s, a, s', value] entries", key)
    out = []
    for k, item in enumerate(raw):
        if not (isinstance(item, list) and len(item) == 4):
            fail(f"{key}[{k}] must have the form [s, a, s', value]", key)
        s, a, sp, val = item
        for name, idx, hi in (("s", s, n), ("a", a, n_a), ("s'", sp, n)):
            if not isinstance(idx, int) or isinstance(idx, bool) or not 0 <= idx < hi:
                fail(f"{key}[{k}]: {name} = {idx!r} out of range", key)
        if not isinstance(val, (int, float)) or isinstance(val, bool):
            fail(f"{key}[{k}]: value {val!r} is not a number", key)
        out.append((s, a, sp, float(val)))
    return out


def _table(spec, n, n_a, key, fail, default):
    if spec is None:
        return np.float64(default)
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return np.float64(spec)
    if not isinstance(spec, dict) or "default" not in spec:
        fail(f"{key} must be a number or an object with a 'default'", key)
    entries = spec.get("exceptions", spec.get("entries", []))
    table = np.full((n, n_a, n), float(spec["default"]))
    for s, a, sp, val in _triples(entries, n, n_a, key, fail):
        table[s, a, sp] = val
    return table


def _policy(raw, n, n_a, key, fail):
    if raw is None:
        return Policy.uniform(n, n_a)
    arr = np.asarray(raw, dtype=float)
    if arr.shape != (n, n_a):
        fail(f"{key} must be a {n} x {n_a} table", key)
    try:
        return Policy(arr)
    except ValueError as exc:
        fail(f"{key}: {exc}", key)


def parse_task(text: str, source: str = "<task>") -> TaskFile:
    """Parse task-file text; errors carry the line number where known."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TaskFileError(exc.msg, exc.lineno, source) from None

    def fail(msg, key=None):
        raise TaskFileError(msg, _line_of(text, key) if key else None, source)

    if not isinstance(doc, dict):
        fail("top level must be an object")
    for key in ("n_states", "n_actions", "transitions"):
        if key not in doc:
            fail(f"missing required field {key!r}")
    n, n_a = doc["n_states"], doc["n_actions"]
    for key, val in (("n_states", n), ("n_actions", n_a)):
        if not isinstance(val, int) or isinstance(val, bool) or val < 1:
            fail(f"{key} must be a positive integer", key)

    P = np.zeros((n, n_a, n))
    for s, a, sp, p in _triples(doc["transitions"], n, n_a, "transitions", fail):
        P[s, a, sp] += p
    try:
        dyn = EnvironmentDynamics(P)
    except ValueError as exc:
        fail(str(exc), "transitions")

    reward = _table(doc.get("reward", doc.get("rewards")), n, n_a, "reward", fail, 0.0)
    discount = _table(doc.get("discount"), n, n_a, "discount", fail, 1.0)
    trace = _table(doc.get("trace"), n, n_a, "trace", fail, 0.0)
    interest = doc.get("interest", 1.0)
    try:
        interest = np.asarray(interest, dtype=float)
        task = RLTask(reward=reward, discount=discount, trace=trace, interest=interest)
        task.check(dyn)
    except (ValueError, TypeError) as exc:
        fail(str(exc))
    return TaskFile(
        dynamics=dyn,
        task=task,
        policy=_policy(doc.get("policy"), n, n_a, "policy", fail),
        behavior=_policy(doc.get("behavior", doc.get("policy")), n, n_a, "behavior", fail),
    )


def load_task(path) -> TaskFile:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise TaskFileError(str(exc), None, str(path)) from None
    return parse_task(text, str(path))


def _exceptions(table, default):
    t = np.asarray(table)
    idx = np.argwhere(t != default)
    return [[int(s), int(a), int(sp), float(t[s, a, sp])] for s, a, sp in idx]


def dump_task(dyn: EnvironmentDynamics, task: RLTask, policy: Policy | None = None,
              behavior: Policy | None = None) -> str:
    """Serialize a task; each table's most common value becomes its default."""
    doc = {"n_states": dyn.n_states, "n_actions": dyn.n_actions,
           "transitions": [[int(s), int(a), int(sp), float(dyn.transition[s, a, sp])]
                           for s, a, sp in np.argwhere(dyn.transition > 0)]}
    for key in ("reward", "discount", "trace"):
        table = task.table(key, dyn.shape)
        vals, counts = np.unique(table, return_counts=True)
        default = float(vals[np.argmax(counts)])
        doc[key] = {"default": default, "exceptions": _exceptions(table, default)}
    interest = np.asarray(task.interest)
    doc["interest"] = interest.tolist()
    if policy is not None:
        doc["policy"] = policy.probs.tolist()
    if behavior is not None:
        doc["behavior"] = behavior.probs.tolist()
    text = json.dumps(doc, indent=1)
    # one line per innermost list
    return re.sub(r"\[\s+([^\[\]]*?)\s+\]", lambda m: "[" + ", ".join(x.strip() for x in m.group(1).split(",")) + "]",
                  text)
