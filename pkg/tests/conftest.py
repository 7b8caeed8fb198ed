"""Session-wide fixtures: the desk-scale scene meshed at three resolutions.

Assembly dominates the runtime of the verification tests, so the meshes and
operator sets are built once per session and shared between test modules.
"""

import pytest

from multiscat import bem, geometry, verify


def _bundle(scene, ppw):
    mesh = geometry.mesh_scene(scene, ppw=ppw)
    ops = bem.assemble_operators(mesh, scene.k)
    ops["mass"] = bem.assemble_mass(mesh)
    return mesh, ops


@pytest.fixture(scope="session")
def desk():
    return verify.desk_scene(0)


@pytest.fixture(scope="session")
def desk10(desk):
    return _bundle(desk, 10)


@pytest.fixture(scope="session")
def desk15(desk):
    return _bundle(desk, 15)


@pytest.fixture(scope="session")
def desk30(desk):
    return _bundle(desk, 30)
