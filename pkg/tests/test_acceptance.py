"""Every acceptance criterion at its fixed tolerance, one line each.

The lines are printed at the end of the pytest run and also by
``python tests/test_acceptance.py`` or ``pairtunnel verify``.
"""
import json

import pytest

from pairtunnel.acceptance import CHECKS, check_wannier

from conftest import ACCEPTANCE_LINES


@pytest.mark.parametrize("number", sorted(CHECKS))
def test_criterion(number):
    result = CHECKS[number]()
    line = result.line()
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    print(json.dumps(result.as_dict()["details"], default=str))
    assert result.passed, json.dumps(result.as_dict(), default=str)


def test_wannier_check_is_sensitive():
    assert not check_wannier(J=1.1).passed


if __name__ == "__main__":
    from pairtunnel.acceptance import run_all

    for r in run_all():
        print(r.line())
