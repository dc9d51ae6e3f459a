"""Smoke test for the compiled extension.

Build with `cargo build --release -p hiermark-py` and copy
target/release/libhiermark.so to python/hiermark.so before running.
"""

import json
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import hiermark  # noqa: E402


def test_geographic_store():
    h = hiermark.Hierarchy.geographic()
    assert h.max_level() == 7
    store = hiermark.TleStore(h)
    for node in [2, 4, 6, 9, 10, 19, 20]:
        store.update(1, node, True)
    assert store.cell(1, 1) == "21"
    assert store.lookup(1, 9)
    store.update(1, 2, False)
    assert store.cell(1, 1) == "20"

    back = hiermark.TleStore.from_snapshot(store.snapshot())
    assert back.selection(1) == store.selection(1)


def test_oracle_agrees():
    h = hiermark.Hierarchy.perfect(3, 4)
    store = hiermark.TleStore(h)
    oracle = hiermark.BaselineOracle(h, 3)
    level3 = [n for c in h.children(1) for n in h.children(c)]
    for node in level3[:4]:
        store.update(7, node, True)
        oracle.select(7, node)
    assert store.selection(7) == oracle.selection(7)
    assert oracle.live_rows() == 4


def test_pbfd_run_and_verify():
    h = hiermark.Hierarchy.geographic()
    r = hiermark.run("pbfd", h)
    assert r.success and r.final_state == "T"
    assert r.rules[-1] == "PB8"
    verdicts = hiermark.verify(r.trace, "pbfd", 3, h.max_level())
    assert all(passed for _, passed, _ in verdicts), verdicts


def test_exhaustion():
    h = hiermark.Hierarchy.geographic()
    r = hiermark.run("pdfd", h, json.dumps({"failure_rate": 1.0, "r_max": 1}))
    assert not r.success
    assert r.reason.startswith("refinement_exhausted")
    assert r.final_state == "S5"


if __name__ == "__main__":
    for name, fn in list(globals().items()):
        if name.startswith("test_"):
            fn()
            print(f"ok {name}")
