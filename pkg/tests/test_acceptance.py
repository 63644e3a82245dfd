"""Full verification gate: every criterion at its stated tolerance.

Each test prints one ``[PASS|FAIL]`` line (run pytest with ``-s`` or check
the captured output on failure) and asserts the criterion passed.
"""
import pytest

from viscowave import acceptance


@pytest.fixture(scope="module")
def suite():
    return acceptance.Suite(quick=False)


@pytest.mark.parametrize(
    "number,title,fn",
    acceptance.CRITERIA,
    ids=[f"{n:02d}_{t.replace(' ', '_')}" for n, t, _ in acceptance.CRITERIA])
def test_criterion(suite, number, title, fn):
    ok, detail = fn(suite)
    print(f"[{'PASS' if ok else 'FAIL'}] {number:2d} {title}: {detail}")
    assert ok, f"criterion {number} ({title}): {detail}"
