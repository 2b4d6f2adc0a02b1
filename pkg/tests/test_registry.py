import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trustengine.errors import AlreadyTerminal, ParentNotRunning, UnknownParent, UnknownPid
from trustengine.registry import (
    ProcessEntry,
    StateRegistry,
    StateViolationReason,
    Status,
    ViolationKind,
    audit,
)


def walker_oracle(entries, root_pid):
    """Independent audit: for every entry, walk parent pointers up to decide
    reachability from the root, then apply the reason rules per node."""
    reasons = []
    for pid in sorted(entries):
        node = entries[pid]
        cur, reachable = node, False
        while cur is not None:
            if cur.pid == root_pid:
                reachable = True
                break
            cur = entries.get(cur.parent_pid) if cur.parent_pid is not None else None
        if not reachable:
            continue
        if pid == root_pid:
            if node.status is not Status.COMPLETED:
                reasons.append(StateViolationReason(pid, ViolationKind.INCOMPLETE_ROOT))
            continue
        if node.status is Status.STARTED and entries[node.parent_pid].status is Status.ABORTED:
            reasons.append(StateViolationReason(pid, ViolationKind.ORPHAN_CHILD))
        if node.status is not Status.COMPLETED:
            reasons.append(StateViolationReason(pid, ViolationKind.DANGLING_CHILD))
    return reasons


def random_tree(rnd, size):
    entries = {}
    for pid in range(1, size + 1):
        parent = None if pid == 1 else rnd.randint(1, pid - 1)
        entries[pid] = ProcessEntry(pid, f"c{pid}", parent,
                                    rnd.choice([Status.STARTED, Status.COMPLETED, Status.COMPLETED,
                                                Status.ABORTED]))
        if parent is not None:
            entries[parent].children.append(pid)
    return entries


def test_begin_examples():
    reg = StateRegistry()
    assert reg.begin_process("a") == 1
    assert reg.entries[1].status is Status.STARTED
    assert reg.begin_process("b", 1) == 2
    assert reg.entries[1].children == [2]
    with pytest.raises(UnknownParent):
        reg.begin_process("c", 99)


def test_cannot_fork_from_terminal_parent():
    reg = StateRegistry()
    reg.begin_process("a")
    reg.complete_process(1)
    with pytest.raises(ParentNotRunning):
        reg.begin_process("b", 1)


def test_complete_examples():
    reg = StateRegistry()
    reg.begin_process("a")
    assert reg.complete_process(1, "success").status is Status.COMPLETED
    with pytest.raises(AlreadyTerminal):
        reg.complete_process(1)
    with pytest.raises(AlreadyTerminal):
        reg.abort_process(1, "x")
    with pytest.raises(UnknownPid):
        reg.complete_process(5)


def test_audit_examples():
    reg = StateRegistry()
    reg.begin_process("a")
    reg.complete_process(1)
    assert reg.audit(1) == []

    reg = StateRegistry()
    reg.begin_process("a")
    reg.begin_process("b", 1)
    reg.complete_process(1)
    assert [str(r) for r in reg.audit(1)] == ["DanglingChild(2)"]

    reg = StateRegistry()
    reg.begin_process("a")
    reg.abort_process(1, "crash")
    assert [str(r) for r in reg.audit(1)] == ["IncompleteRoot"]

    with pytest.raises(UnknownPid):
        reg.audit(42)


def test_aborted_root_with_running_child_reports_all_reasons():
    reg = StateRegistry()
    reg.begin_process("a")
    reg.begin_process("b", 1)
    reg.begin_process("c", 1)
    reg.complete_process(3)
    reg.abort_process(1, "crash")
    assert [str(r) for r in reg.audit(1)] == ["IncompleteRoot", "OrphanChild(2)", "DanglingChild(2)"]


def test_audit_of_subtree_ignores_outside_nodes():
    reg = StateRegistry()
    reg.begin_process("a")
    reg.begin_process("b", 1)
    reg.begin_process("c", 2)
    reg.complete_process(3)
    reg.complete_process(2)
    assert reg.audit(2) == []
    assert [str(r) for r in reg.audit(1)] == ["IncompleteRoot"]


def test_trace_lines():
    reg = StateRegistry()
    reg.begin_process("app")
    reg.begin_process("kid", 1)
    reg.complete_process(2, "failure")
    reg.abort_process(1, "AccessViolation")
    assert reg.trace_lines() == [
        "EVT 1 BEGIN pid=1 parent=- code=app",
        "EVT 2 BEGIN pid=2 parent=1 code=kid",
        "EVT 3 COMPLETE pid=2 parent=1 code=kid status=failure",
        "EVT 4 ABORT pid=1 parent=- code=app status=AccessViolation",
    ]


def test_parents_precede_children():
    reg = StateRegistry()
    rnd = random.Random(1)
    reg.begin_process("root")
    for _ in range(40):
        live = [p for p, e in reg.entries.items() if not e.terminal]
        if rnd.random() < 0.3 and len(live) > 1:
            reg.complete_process(rnd.choice(live[1:]))
        else:
            reg.begin_process("x", rnd.choice(live))
    for entry in reg.entries.values():
        if entry.parent_pid is not None:
            assert entry.parent_pid < entry.pid


@settings(max_examples=200)
@given(st.integers(1, 50), st.randoms(use_true_random=False))
def test_audit_matches_walker_oracle(size, rnd):
    entries = random_tree(rnd, size)
    root = rnd.randint(1, size)
    got = audit(entries, root)
    assert got == walker_oracle(entries, root)
    all_complete = all(e.status is Status.COMPLETED for e in entries.values()
                       if any(p == root for p in _chain(entries, e.pid)))
    assert (got == []) == all_complete


def _chain(entries, pid):
    while pid is not None:
        yield pid
        pid = entries[pid].parent_pid
