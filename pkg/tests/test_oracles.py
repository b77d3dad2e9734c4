import math

import pytest

from oracles import FROZEN, LUX_EXP_TWO_VALUED, live


@pytest.mark.parametrize("key", sorted(FROZEN))
def test_frozen_matches_closed_form(key):
    assert FROZEN[key] == pytest.approx(live()[key], rel=1e-14)


def test_root_finder_agrees_with_closed_form():
    assert LUX_EXP_TWO_VALUED == pytest.approx(2.0 / (1.0 + math.log(2.0)), rel=1e-14)
