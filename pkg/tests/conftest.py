import numpy as np
import pytest

from sfwg.mesh import PolytopalMesh, generate


def random_element_meshes(family, count, seed, scale_range=(-0.3, 0.3)):
    """Single-element meshes: generator cells under random orientation-preserving affine maps.

    The map is scaled by ``10**U(scale_range)``; the default keeps diameters of order one.
    """
    rng = np.random.default_rng(seed)
    base = generate(family, 1)
    out = []
    while len(out) < count:
        el = base.elements[int(rng.integers(len(base.elements)))]
        A = np.eye(2) + 0.4 * rng.standard_normal((2, 2))
        if np.linalg.det(A) < 0.2:
            continue
        scale = 10.0 ** rng.uniform(*scale_range)
        pts = scale * el.points @ A.T + rng.uniform(-1, 1, 2)
        out.append(PolytopalMesh.from_polygons(pts, [tuple(range(len(pts)))]))
    return out


@pytest.fixture(params=["tri", "pent"])
def family(request):
    return request.param


# one summary line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
