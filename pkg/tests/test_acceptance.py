import pytest

from dnp2d.acceptance import CRITERIA, run_check

from conftest import ACCEPTANCE_LINES


@pytest.mark.parametrize("cid", sorted(CRITERIA), ids=lambda c: f"{c:02d}-{CRITERIA[c][0].split()[0]}")
def test_criterion(cid, capsys):
    res = run_check(cid)
    ACCEPTANCE_LINES[cid] = res.line()
    with capsys.disabled():
        print("\n" + res.line())
    assert res.passed, res.line()
