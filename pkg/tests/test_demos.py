import glob
import os
import py_compile

import pytest

DEMOS = sorted(glob.glob(os.path.join(os.path.dirname(__file__), "..", "demos", "*.py")))


def test_demos_exist():
    assert len(DEMOS) >= 3


@pytest.mark.parametrize("path", DEMOS, ids=os.path.basename)
def test_demo_compiles(path):
    py_compile.compile(path, doraise=True)
