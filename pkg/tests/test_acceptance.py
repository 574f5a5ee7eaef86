"""End-to-end acceptance checks, one test per criterion.

These execute the same criteria as ``atcnet verify`` (fixed seeds, pinned
tolerances) and print one line per criterion; Monte-Carlo criteria share
cached ensembles so the module stays within a few minutes end to end.
"""
import pytest

from atcnet import acceptance


@pytest.mark.parametrize(
    "cid,name",
    [(num, name) for num, name, _, _, _ in acceptance.CRITERIA],
    ids=[f"{num}-{name}" for num, name, _, _, _ in acceptance.CRITERIA],
)
def test_criterion(cid, name):
    result = acceptance.run_criterion(cid)
    status = "PASS" if result.passed else "FAIL"
    print(f"[{status}] criterion {cid} ({name}, {result.seconds:.2f} s): {result.detail}")
    assert result.passed, f"criterion {cid} ({name}): {result.detail}"
