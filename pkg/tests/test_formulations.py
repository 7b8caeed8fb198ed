"""The four boundary integral systems, block preconditioning, and the disk gate."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from multiscat import analytic, bem, formulations, geometry, linalg

DISK_K = 5.0
BETA = (0.0, 1.0)


def disk_scene() -> geometry.Scene:
    return geometry.Scene(
        k=DISK_K,
        beta=BETA,
        obstacles=(geometry.Shape(kind="ellipse", a=1.0, b=1.0),),
        box=(-5.0, -5.0, 5.0, 5.0),
    )


def two_disk_scene(distance: float) -> geometry.Scene:
    return geometry.Scene(
        k=DISK_K,
        beta=BETA,
        obstacles=(
            geometry.Shape(kind="ellipse", center=(0.0, 0.0)),
            geometry.Shape(kind="ellipse", center=(distance, 0.0)),
        ),
        box=(-3.0, -3.0, distance + 3.0, 3.0),
        min_center_distance=3.0,
    )


@pytest.fixture(scope="module")
def disk():
    """Unit disk at the working resolution, with every operator pre-assembled."""
    scene = disk_scene()
    mesh = geometry.mesh_scene(scene, ppw=15)
    ops = bem.assemble_operators(mesh, scene.k)
    ops["mass"] = bem.assemble_mass(mesh)
    return scene, mesh, ops


@pytest.fixture(scope="module")
def coarse_pair():
    """Two unit disks, coarse mesh; enough for structural checks."""
    scene = two_disk_scene(5.0)
    mesh = geometry.mesh_scene(scene, ppw=6)
    ops = bem.assemble_operators(mesh, scene.k)
    ops["mass"] = bem.assemble_mass(mesh)
    return scene, mesh, ops


@pytest.fixture(scope="module")
def mie_reference():
    theta = np.linspace(0.0, 2.0 * np.pi, 200, endpoint=False)
    points = 3.0 * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    cfg = analytic.MieConfig(k=DISK_K, radius=1.0, beta=BETA)
    return points, analytic.mie_scattered(cfg, points)


def build_all(scene, mesh, ops):
    return {
        kind: formulations.build_system(
            formulations.Formulation(kind=kind), scene, mesh, operators=ops
        )
        for kind in formulations.FORMULATION_KINDS
    }


def diamond_scene_mesh() -> geometry.SceneMesh:
    """Four-segment diamond whose node 0 sits at the origin with node normal (0, 1)."""
    nodes = np.array([[0.0, 0.0], [-1.0, -1.0], [0.0, -2.0], [1.0, -1.0]])
    segments = np.array([[0, 1], [1, 2], [2, 3], [3, 0]])
    edges = nodes[segments[:, 1]] - nodes[segments[:, 0]]
    lengths = np.linalg.norm(edges, axis=1)
    normals = np.stack([edges[:, 1], -edges[:, 0]], axis=1) / lengths[:, None]
    mesh = geometry.ObstacleMesh(
        nodes=nodes,
        segments=segments,
        normals=normals,
        lengths=lengths,
        perimeter=float(lengths.sum()),
    )
    return geometry.SceneMesh(meshes=(mesh,), block_offsets=(0, 4))


class TestIncidentTraces:
    def test_trace_has_unit_modulus_and_value_one_at_origin(self):
        mesh = diamond_scene_mesh()
        wave = formulations.IncidentWave(k=20.0, beta=(0.0, 1.0))
        trace, _ = formulations.incident_traces(wave, mesh)
        assert_allclose(np.abs(trace), 1.0, atol=1e-14)
        assert trace[0] == 1.0 + 0.0j

    def test_normal_trace_at_origin_node_with_vertical_normal(self):
        mesh = diamond_scene_mesh()
        wave = formulations.IncidentWave(k=20.0, beta=(0.0, 1.0))
        _, normal_trace = formulations.incident_traces(wave, mesh)
        assert_allclose(normal_trace[0], 20.0j, atol=1e-13)

    def test_normal_trace_matches_directional_difference(self, disk):
        _, mesh, _ = disk
        wave = formulations.IncidentWave(k=DISK_K, beta=(0.6, 0.8))
        trace, normal_trace = formulations.incident_traces(wave, mesh)
        nodes = mesh.all_nodes
        normals = mesh.node_normals()
        beta = np.array([0.6, 0.8])
        h = 1e-6
        up = np.exp(1j * DISK_K * ((nodes + h * normals) @ beta))
        dn = np.exp(1j * DISK_K * ((nodes - h * normals) @ beta))
        assert_allclose(normal_trace, (up - dn) / (2.0 * h), rtol=1e-7, atol=1e-8)
        assert_allclose(trace, np.exp(1j * DISK_K * (nodes @ beta)), rtol=1e-14)

    def test_rejects_non_unit_direction_and_bad_wavenumber(self):
        mesh = diamond_scene_mesh()
        with pytest.raises(ValueError):
            formulations.incident_traces(
                formulations.IncidentWave(k=1.0, beta=(1.0, 1.0)), mesh
            )
        with pytest.raises(ValueError):
            formulations.incident_traces(
                formulations.IncidentWave(k=0.0, beta=(0.0, 1.0)), mesh
            )


class TestParameterValidation:
    @pytest.mark.parametrize("alpha", [0.0, 1.0, -0.2, 1.3])
    def test_cfie_alpha_must_lie_inside_open_interval(self, alpha):
        form = formulations.Formulation(kind="CFIE", alpha=alpha)
        with pytest.raises(ValueError, match="alpha"):
            form.resolved(DISK_K)

    def test_cfie_coupling_needs_imaginary_part(self):
        form = formulations.Formulation(kind="CFIE", eta=2.0)
        with pytest.raises(ValueError, match="eta"):
            form.resolved(DISK_K)

    def test_bw_coupling_needs_imaginary_part(self):
        form = formulations.Formulation(kind="BW", eta_bw=-3.0)
        with pytest.raises(ValueError, match="eta_bw"):
            form.resolved(DISK_K)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError, match="kind"):
            formulations.Formulation(kind="HYPER").resolved(DISK_K)

    def test_defaults_resolve_to_wavenumber_scaled_couplings(self):
        cfie = formulations.Formulation(kind="CFIE").resolved(DISK_K)
        bw = formulations.Formulation(kind="BW").resolved(DISK_K)
        assert cfie.alpha == 0.2
        assert cfie.eta == -1j * DISK_K
        assert bw.eta_bw == 0.5j * DISK_K


class TestSystemAssembly:
    def test_efie_matrix_is_the_single_layer_matrix(self, disk):
        scene, mesh, ops = disk
        sys_ = formulations.build_system(
            formulations.Formulation(kind="EFIE"), scene, mesh, operators=ops
        )
        assert np.array_equal(sys_.matrix, ops["single_layer"].matrix)

    def test_cfie_is_the_exact_linear_combination(self, disk):
        scene, mesh, ops = disk
        built = build_all(scene, mesh, ops)
        alpha, eta = 0.2, -1j * DISK_K
        combined = (1.0 - alpha) * built["MFIE"].matrix + (alpha * eta) * built[
            "EFIE"
        ].matrix
        assert np.array_equal(built["CFIE"].matrix, combined)

    def test_right_hand_sides_are_mass_projected_traces(self, disk):
        scene, mesh, ops = disk
        built = build_all(scene, mesh, ops)
        mass = ops["mass"].matrix
        wave = formulations.IncidentWave(k=scene.k, beta=scene.beta)
        trace, normal_trace = formulations.incident_traces(wave, mesh)
        alpha, eta = 0.2, -1j * DISK_K
        assert np.array_equal(built["EFIE"].rhs, -(mass @ trace))
        assert np.array_equal(built["MFIE"].rhs, -(mass @ normal_trace))
        assert np.array_equal(built["BW"].rhs, -(mass @ trace))
        assert np.array_equal(
            built["CFIE"].rhs,
            -(mass @ ((1.0 - alpha) * normal_trace + (alpha * eta) * trace)),
        )

    def test_bw_matrix_combines_the_three_operators(self, disk):
        scene, mesh, ops = disk
        sys_ = formulations.build_system(
            formulations.Formulation(kind="BW"), scene, mesh, operators=ops
        )
        eta_bw = 0.5j * DISK_K
        expected = (
            -eta_bw * ops["single_layer"].matrix
            - ops["double_layer"].matrix
            + 0.5 * ops["mass"].matrix
        )
        assert np.array_equal(sys_.matrix, expected)

    def test_block_offsets_follow_the_mesh(self, coarse_pair):
        scene, mesh, ops = coarse_pair
        sys_ = formulations.build_system(
            formulations.Formulation(kind="EFIE"), scene, mesh, operators=ops
        )
        assert sys_.block_offsets == tuple(mesh.block_offsets)
        assert sys_.n == mesh.n_nodes
        assert sys_.n_blocks == 2

    def test_mismatched_preassembled_operators_rejected(self, disk):
        scene, mesh, ops = disk
        other_mesh = geometry.mesh_scene(disk_scene(), ppw=6)
        wrong_shape = bem.assemble_operators(other_mesh, scene.k, kinds=("single_layer",))
        with pytest.raises(ValueError, match="mesh"):
            formulations.build_system(
                formulations.Formulation(kind="EFIE"), scene, mesh,
                operators=wrong_shape,
            )
        wrong_k = bem.assemble_operators(mesh, 4.0, kinds=("single_layer",))
        with pytest.raises(ValueError, match="different k"):
            formulations.build_system(
                formulations.Formulation(kind="EFIE"), scene, mesh, operators=wrong_k
            )

    def test_matrix_and_rhs_are_read_only(self, disk):
        scene, mesh, ops = disk
        sys_ = formulations.build_system(
            formulations.Formulation(kind="MFIE"), scene, mesh, operators=ops
        )
        with pytest.raises(ValueError):
            sys_.matrix[0, 0] = 0.0
        with pytest.raises(ValueError):
            sys_.rhs[0] = 0.0


class TestPreconditioner:
    def test_single_obstacle_preconditioner_inverts_the_whole_system(self, disk):
        scene, mesh, ops = disk
        sys_ = formulations.build_system(
            formulations.Formulation(kind="EFIE"), scene, mesh, operators=ops
        )
        pre = formulations.single_scattering_preconditioner(sys_)
        assert len(pre.factors) == 1
        rng = np.random.default_rng(7)
        v = rng.standard_normal(sys_.n) + 1j * rng.standard_normal(sys_.n)
        out = formulations.apply_preconditioned(sys_, pre, v)
        assert_allclose(out, v, rtol=1e-8)
        explicit = formulations.preconditioned_matrix(sys_, pre)
        assert linalg.inf_norm(explicit - np.eye(sys_.n)) <= 1e-10

    @pytest.mark.parametrize("kind", formulations.FORMULATION_KINDS)
    def test_diagonal_blocks_become_identities(self, coarse_pair, kind):
        scene, mesh, ops = coarse_pair
        sys_ = formulations.build_system(
            formulations.Formulation(kind=kind), scene, mesh, operators=ops
        )
        pre = formulations.single_scattering_preconditioner(sys_)
        explicit = formulations.preconditioned_matrix(sys_, pre)
        for p in range(sys_.n_blocks):
            lo, hi = sys_.block_range(p)
            block = explicit[lo:hi, lo:hi]
            assert linalg.inf_norm(block - np.eye(hi - lo)) <= 1e-10

    def test_apply_matches_the_explicit_matrix(self, coarse_pair):
        scene, mesh, ops = coarse_pair
        sys_ = formulations.build_system(
            formulations.Formulation(kind="CFIE"), scene, mesh, operators=ops
        )
        pre = formulations.single_scattering_preconditioner(sys_)
        explicit = formulations.preconditioned_matrix(sys_, pre)
        rng = np.random.default_rng(3)
        v = rng.standard_normal(sys_.n) + 1j * rng.standard_normal(sys_.n)
        assert_allclose(
            formulations.apply_preconditioned(sys_, pre, v),
            explicit @ v,
            rtol=1e-10,
            atol=1e-12,
        )

    def test_zero_vector_maps_to_zero(self, coarse_pair):
        scene, mesh, ops = coarse_pair
        sys_ = formulations.build_system(
            formulations.Formulation(kind="EFIE"), scene, mesh, operators=ops
        )
        pre = formulations.single_scattering_preconditioner(sys_)
        out = formulations.apply_preconditioned(sys_, pre, np.zeros(sys_.n))
        assert np.all(out == 0.0)

    def test_block_sizes_match_per_obstacle_node_counts(self, coarse_pair):
        scene, mesh, ops = coarse_pair
        sys_ = formulations.build_system(
            formulations.Formulation(kind="BW"), scene, mesh, operators=ops
        )
        pre = formulations.single_scattering_preconditioner(sys_)
        for p, factor in enumerate(pre.factors):
            lo, hi = sys_.block_range(p)
            assert factor.n == hi - lo

    def test_singular_diagonal_block_error_names_the_obstacle(self):
        sys_ = formulations.BlockSystem(
            matrix=np.zeros((4, 4), dtype=complex),
            rhs=np.zeros(4, dtype=complex),
            block_offsets=(0, 2, 4),
            formulation=formulations.Formulation(kind="EFIE"),
            mesh=None,
            k=1.0,
        )
        with pytest.raises(linalg.SingularMatrixError, match="obstacle 0"):
            formulations.single_scattering_preconditioner(sys_)

    def test_coupling_weakens_with_separation(self):
        norms = {}
        for distance in (5.0, 50.0):
            scene = two_disk_scene(distance)
            mesh = geometry.mesh_scene(scene, ppw=6)
            sys_ = formulations.build_system(
                formulations.Formulation(kind="EFIE"), scene, mesh
            )
            pre = formulations.single_scattering_preconditioner(sys_)
            explicit = formulations.preconditioned_matrix(sys_, pre)
            lo0, hi0 = sys_.block_range(0)
            lo1, hi1 = sys_.block_range(1)
            norms[distance] = linalg.inf_norm(explicit[lo0:hi0, lo1:hi1])
        assert norms[50.0] < norms[5.0]

    def test_dimension_mismatch_rejected(self, coarse_pair):
        scene, mesh, ops = coarse_pair
        sys_ = formulations.build_system(
            formulations.Formulation(kind="EFIE"), scene, mesh, operators=ops
        )
        pre = formulations.single_scattering_preconditioner(sys_)
        with pytest.raises(ValueError):
            formulations.apply_preconditioned(sys_, pre, np.zeros(sys_.n + 1))


class TestSolve:
    @pytest.mark.parametrize("kind", formulations.FORMULATION_KINDS)
    def test_preconditioned_single_obstacle_needs_few_iterations(self, disk, kind):
        scene, mesh, ops = disk
        sys_ = formulations.build_system(
            formulations.Formulation(kind=kind), scene, mesh, operators=ops
        )
        pre = formulations.single_scattering_preconditioner(sys_)
        _, report = formulations.solve(sys_, pre)
        assert report.converged
        assert report.iterations <= 3

    def test_gmres_solution_matches_direct_solve(self, disk):
        scene, mesh, ops = disk
        sys_ = formulations.build_system(
            formulations.Formulation(kind="EFIE"), scene, mesh, operators=ops
        )
        density, report = formulations.solve(sys_, None, tol=1e-10, maxiter=2000)
        assert report.converged
        direct = linalg.lu_solve(linalg.lu_factor(np.array(sys_.matrix)), sys_.rhs)
        assert_allclose(density, direct, rtol=1e-6)

    def test_unpreconditioned_takes_more_iterations_than_preconditioned(self, coarse_pair):
        scene, mesh, ops = coarse_pair
        sys_ = formulations.build_system(
            formulations.Formulation(kind="BW"), scene, mesh, operators=ops
        )
        pre = formulations.single_scattering_preconditioner(sys_)
        _, plain = formulations.solve(sys_)
        _, cond = formulations.solve(sys_, pre)
        assert plain.converged and cond.converged
        assert cond.iterations <= plain.iterations


@pytest.fixture(scope="module")
def solved(disk, mie_reference):
    scene, mesh, ops = disk
    points, reference = mie_reference
    built = build_all(scene, mesh, ops)
    errors = {}
    fields = {}
    densities = {}
    for kind, sys_ in built.items():
        pre = formulations.single_scattering_preconditioner(sys_)
        density, report = formulations.solve(sys_, pre, tol=1e-10)
        assert report.converged
        field = formulations.scattered_field(sys_, density, points)
        assert not field.near_boundary.any()
        errors[kind] = np.linalg.norm(field.values - reference) / np.linalg.norm(
            reference
        )
        fields[kind] = field.values
        densities[kind] = density
    return built, densities, fields, errors


class TestDiskGate:
    """Scattering by the unit disk against the separation-of-variables reference.

    The single-layer representation of a P1 density on this polygon carries a
    floor near 8e-3 regardless of how the density was obtained, so the three
    formulations whose errors correlate with the solve sit at the floor, and
    the adjoint-equation one lands slightly above it.  The load-bearing check
    for that one is the sign of its identity term: flipping it breaks the
    field entirely rather than by a constant factor.
    """

    def test_efie_matches_the_disk_series(self, solved):
        *_, errors = solved
        assert errors["EFIE"] <= 1e-2

    def test_cfie_and_bw_match_the_disk_series(self, solved):
        *_, errors = solved
        assert errors["CFIE"] <= 1e-2
        assert errors["BW"] <= 1e-2

    def test_mfie_accuracy_and_identity_sign(self, disk, mie_reference, solved):
        *_, errors = solved
        assert errors["MFIE"] <= 1.5e-2

        scene, mesh, ops = disk
        points, reference = mie_reference
        mass = ops["mass"].matrix
        wave = formulations.IncidentWave(k=scene.k, beta=scene.beta)
        _, normal_trace = formulations.incident_traces(wave, mesh)
        flipped = -0.5 * mass + ops["adjoint_double_layer"].matrix
        density = linalg.lu_solve(linalg.lu_factor(flipped), -(mass @ normal_trace))
        field = bem.evaluate_potentials(mesh, density, scene.k, points, layer="single")
        wrong = np.linalg.norm(field.values - reference) / np.linalg.norm(reference)
        assert wrong > 0.5
        assert errors["MFIE"] < wrong / 20.0

    def test_direct_formulations_share_one_density(self, solved):
        _, densities, _, _ = solved
        scale = np.linalg.norm(densities["CFIE"])
        assert np.linalg.norm(densities["EFIE"] - densities["CFIE"]) / scale <= 5e-2
        assert np.linalg.norm(densities["MFIE"] - densities["CFIE"]) / scale <= 5e-2

    def test_bw_field_agrees_with_efie_field(self, solved):
        _, _, fields, _ = solved
        scale = np.linalg.norm(fields["EFIE"])
        assert np.linalg.norm(fields["BW"] - fields["EFIE"]) / scale <= 5e-2

    def test_total_field_shrinks_toward_the_boundary(self, disk, solved):
        scene, mesh, _ = disk
        built, densities, _, _ = solved
        sys_ = built["EFIE"]
        levels = []
        for radius in (2.0, 1.5, 1.2):
            theta = np.linspace(0.0, 2.0 * np.pi, 128, endpoint=False)
            pts = radius * np.stack([np.cos(theta), np.sin(theta)], axis=1)
            scattered = formulations.scattered_field(sys_, densities["EFIE"], pts)
            incident = np.exp(1j * scene.k * (pts @ np.array(scene.beta)))
            levels.append(
                np.linalg.norm(scattered.values + incident)
                / np.linalg.norm(incident)
            )
        assert levels[0] > levels[1] > levels[2]


class TestScatteredField:
    def test_zero_density_gives_zero_field(self, disk):
        scene, mesh, ops = disk
        sys_ = formulations.build_system(
            formulations.Formulation(kind="BW"), scene, mesh, operators=ops
        )
        pts = np.array([[3.0, 0.0], [0.0, -4.0]])
        field = formulations.scattered_field(sys_, np.zeros(sys_.n), pts)
        assert np.all(field.values == 0.0)

    def test_bw_field_is_the_combined_representation(self, disk):
        scene, mesh, ops = disk
        sys_ = formulations.build_system(
            formulations.Formulation(kind="BW"), scene, mesh, operators=ops
        )
        rng = np.random.default_rng(11)
        density = rng.standard_normal(sys_.n) + 1j * rng.standard_normal(sys_.n)
        pts = np.array([[2.5, 1.0], [-3.0, 0.5], [0.0, 4.0]])
        field = formulations.scattered_field(sys_, density, pts)
        single = bem.evaluate_potentials(mesh, density, scene.k, pts, layer="single")
        double = bem.evaluate_potentials(mesh, density, scene.k, pts, layer="double")
        eta_bw = 0.5j * DISK_K
        assert_allclose(
            field.values, -eta_bw * single.values - double.values, rtol=1e-13
        )

    def test_near_boundary_flag_passes_through(self, disk):
        scene, mesh, ops = disk
        sys_ = formulations.build_system(
            formulations.Formulation(kind="EFIE"), scene, mesh, operators=ops
        )
        pts = np.array([[1.0 + 1e-4, 0.0], [3.0, 0.0]])
        field = formulations.scattered_field(sys_, np.ones(sys_.n), pts)
        assert field.near_boundary[0]
        assert not field.near_boundary[1]

    def test_wrong_density_shape_rejected(self, disk):
        scene, mesh, ops = disk
        sys_ = formulations.build_system(
            formulations.Formulation(kind="EFIE"), scene, mesh, operators=ops
        )
        with pytest.raises(ValueError, match="density"):
            formulations.scattered_field(sys_, np.zeros(sys_.n - 1), np.array([[3.0, 0.0]]))
