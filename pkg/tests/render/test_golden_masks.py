"""
Golden-file checks for embodiment masks.

Rendered masks must reproduce the committed PBM files in tests/data/golden
bit for bit. After an intended rendering change, regenerate them with
scripts/refresh_golden_files.py, which sets MASKWORLD_REFRESH_GOLDEN=1 so
that this test writes fresh copies instead of comparing.
"""

import os

import numpy as np
import pytest

from src.render.frames import read_pbm, write_pbm
from src.render.scene import render_embodiment_mask

pytestmark = pytest.mark.golden

REFRESH = os.getenv('MASKWORLD_REFRESH_GOLDEN', '0') == '1'


def _cases(context):
    return {
        "planar2_bent": (context.planar, [0.3, -0.6], context.overhead),
        "franka_toy_home": (context.franka, context.franka.home_configuration(), context.desk),
        "dualarm_toy_home": (context.dualarm, context.dualarm.home_configuration(), context.desk),
    }


@pytest.mark.parametrize("name", ["planar2_bent", "franka_toy_home", "dualarm_toy_home"])
def test_mask_matches_golden_file(deskcontext, test_data_dir, name):
    """Rendered masks equal their committed golden copies."""
    chain, q, cam = _cases(deskcontext)[name]
    mask = render_embodiment_mask(chain, q, cam)
    path = test_data_dir / "golden" / f"{name}.pbm"
    if REFRESH:
        path.parent.mkdir(parents=True, exist_ok=True)
        write_pbm(path, mask)
        return
    if not path.exists():
        pytest.fail(f"golden file {path.name} is missing; run scripts/refresh_golden_files.py")
    golden = read_pbm(path)
    assert golden.any()
    np.testing.assert_array_equal(mask, golden)
