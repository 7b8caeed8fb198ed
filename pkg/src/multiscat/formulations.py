"""The four discrete scattering systems and the single-scattering preconditioner.

Each formulation leads to a linear system A x = b on the nodal values of an
unknown boundary density, with all identity terms realized weakly through
the mass matrix Mh so that every system lives in the same Galerkin pairing:

    EFIE:  A = Lh                              b = -Mh u
    MFIE:  A = Mh/2 + Nh                       b = -Mh v
    CFIE:  A = (1-alpha)(Mh/2 + Nh) + alpha eta Lh
                                               b = -Mh [(1-alpha) v + alpha eta u]
    BW:    A = -eta_bw Lh - Mdlh + Mh/2        b = -Mh u

where u and v are the nodal traces of the incident wave and its normal
derivative, Lh, Mdlh, Nh the single, double and adjoint double layer
matrices, and alpha, eta, eta_bw the combination parameters.  The direct
formulations solve for a physical density whose single-layer potential is
the scattered field; BW solves for an artificial density with a combined
representation.

Obstacles own contiguous index blocks.  The single-scattering preconditioner
factorizes the diagonal block of each obstacle and applies the inverses
blockwise, which turns the diagonal of the preconditioned system into exact
identities and leaves only inter-obstacle coupling.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from . import bem, linalg

FORMULATION_KINDS = ("EFIE", "MFIE", "CFIE", "BW")


@dataclasses.dataclass(frozen=True)
class Formulation:
    """Formulation choice plus combination parameters.

    ``eta`` (CFIE) and ``eta_bw`` (BW) default to None, meaning the standard
    wavenumber-dependent choices -ik and ik/2 filled in at build time.
    """

    kind: str
    alpha: float = 0.2
    eta: complex | None = None
    eta_bw: complex | None = None

    def resolved(self, k: float) -> "Formulation":
        """Validate and substitute the k-dependent defaults."""
        if self.kind not in FORMULATION_KINDS:
            raise ValueError(f"unknown formulation kind {self.kind!r}")
        alpha, eta, eta_bw = self.alpha, self.eta, self.eta_bw
        if self.kind == "CFIE":
            if not 0.0 < alpha < 1.0:
                raise ValueError("CFIE requires alpha strictly inside (0, 1)")
            eta = complex(eta) if eta is not None else -1j * k
            if eta.imag == 0.0:
                raise ValueError("CFIE requires a coupling eta with nonzero imaginary part")
        if self.kind == "BW":
            eta_bw = complex(eta_bw) if eta_bw is not None else 0.5j * k
            if eta_bw.imag == 0.0:
                raise ValueError("BW requires eta_bw with nonzero imaginary part")
        return Formulation(kind=self.kind, alpha=alpha, eta=eta, eta_bw=eta_bw)


@dataclasses.dataclass(frozen=True)
class IncidentWave:
    """Plane wave exp(i k beta . x) with a unit direction beta."""

    k: float
    beta: tuple[float, float]

    def validate(self) -> "IncidentWave":
        if self.k <= 0.0:
            raise ValueError("IncidentWave requires k > 0")
        if abs(math.hypot(*self.beta) - 1.0) > 1e-12:
            raise ValueError("IncidentWave requires a unit direction")
        return self


@dataclasses.dataclass(frozen=True)
class BlockSystem:
    """Assembled system with its per-obstacle block structure."""

    matrix: np.ndarray
    rhs: np.ndarray
    block_offsets: tuple[int, ...]
    formulation: Formulation
    mesh: object
    k: float

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_blocks(self) -> int:
        return len(self.block_offsets) - 1

    def block_range(self, p: int) -> tuple[int, int]:
        return self.block_offsets[p], self.block_offsets[p + 1]


@dataclasses.dataclass(frozen=True)
class BlockPreconditioner:
    """LU factors of the diagonal blocks, one per obstacle."""

    factors: tuple[linalg.LuFactors, ...]
    block_offsets: tuple[int, ...]


def incident_traces(wave: IncidentWave, mesh) -> tuple[np.ndarray, np.ndarray]:
    """Nodal trace and normal-derivative trace of the incident plane wave."""
    wave.validate()
    beta = np.asarray(wave.beta)
    nodes = mesh.all_nodes
    normals = mesh.node_normals()
    trace = np.exp(1j * wave.k * (nodes @ beta))
    normal_trace = 1j * wave.k * (normals @ beta) * trace
    return trace, normal_trace


def _required_kinds(kind: str) -> tuple[str, ...]:
    if kind == "EFIE":
        return ("single_layer",)
    if kind == "MFIE":
        return ("adjoint_double_layer",)
    if kind == "CFIE":
        return ("single_layer", "adjoint_double_layer")
    return ("single_layer", "double_layer")


def build_system(form: Formulation, scene, mesh, operators=None) -> BlockSystem:
    """Assemble the system matrix and mass-projected right-hand side.

    ``operators`` may carry pre-assembled AssembledOperator objects keyed by
    kind ("mass" included) to share one assembly between formulations; any
    missing ones are assembled here.
    """
    form = form.resolved(scene.k)
    ops = dict(operators) if operators is not None else {}
    for op in ops.values():
        if op.matrix.shape != (mesh.n_nodes, mesh.n_nodes):
            raise ValueError("pre-assembled operator does not match the mesh")
        if op.kind != "mass" and op.k != scene.k:
            raise ValueError("pre-assembled operator was built for a different k")
    missing = [kind for kind in _required_kinds(form.kind) if kind not in ops]
    if missing:
        ops.update(bem.assemble_operators(mesh, scene.k, kinds=tuple(missing)))
    if "mass" not in ops:
        ops["mass"] = bem.assemble_mass(mesh)
    mass = ops["mass"].matrix

    trace, normal_trace = incident_traces(
        IncidentWave(k=scene.k, beta=tuple(scene.beta)), mesh
    )
    if form.kind == "EFIE":
        matrix = ops["single_layer"].matrix
        rhs = -(mass @ trace)
    elif form.kind == "MFIE":
        matrix = 0.5 * mass + ops["adjoint_double_layer"].matrix
        rhs = -(mass @ normal_trace)
    elif form.kind == "CFIE":
        mfie_matrix = 0.5 * mass + ops["adjoint_double_layer"].matrix
        matrix = (1.0 - form.alpha) * mfie_matrix + (form.alpha * form.eta) * ops[
            "single_layer"
        ].matrix
        rhs = -(mass @ ((1.0 - form.alpha) * normal_trace + (form.alpha * form.eta) * trace))
    else:
        matrix = (
            -form.eta_bw * ops["single_layer"].matrix
            - ops["double_layer"].matrix
            + 0.5 * mass
        )
        rhs = -(mass @ trace)

    matrix = np.array(matrix) if matrix.flags.writeable else matrix.copy()
    matrix = np.ascontiguousarray(matrix)
    matrix.flags.writeable = False
    rhs.flags.writeable = False
    return BlockSystem(
        matrix=matrix,
        rhs=rhs,
        block_offsets=tuple(int(o) for o in mesh.block_offsets),
        formulation=form,
        mesh=mesh,
        k=scene.k,
    )


def single_scattering_preconditioner(system: BlockSystem) -> BlockPreconditioner:
    """LU-factorize each obstacle's diagonal block of the system matrix."""
    factors = []
    for p in range(system.n_blocks):
        lo, hi = system.block_range(p)
        try:
            factors.append(linalg.lu_factor(system.matrix[lo:hi, lo:hi]))
        except linalg.SingularMatrixError as exc:
            raise linalg.SingularMatrixError(
                f"diagonal block of obstacle {p} is singular; the wavenumber may "
                f"sit on an irregular frequency of that obstacle, or the mesh is "
                f"degenerate ({exc})"
            ) from exc
    return BlockPreconditioner(
        factors=tuple(factors), block_offsets=system.block_offsets
    )


def _block_solve(pre: BlockPreconditioner, vector: np.ndarray) -> np.ndarray:
    out = np.empty_like(vector, dtype=complex)
    for factor, lo, hi in zip(pre.factors, pre.block_offsets, pre.block_offsets[1:]):
        out[lo:hi] = linalg.lu_solve(factor, vector[lo:hi])
    return out


def apply_preconditioned(system: BlockSystem, pre: BlockPreconditioner, v) -> np.ndarray:
    """Blockwise inverse of the diagonal applied to A v."""
    v = np.asarray(v)
    if v.shape != (system.n,):
        raise ValueError(f"vector has shape {v.shape}, expected ({system.n},)")
    if pre.block_offsets != system.block_offsets:
        raise ValueError("preconditioner blocks do not match the system")
    return _block_solve(pre, system.matrix @ v)


def preconditioned_matrix(system: BlockSystem, pre: BlockPreconditioner) -> np.ndarray:
    """The preconditioned operator as an explicit dense matrix.

    Row block p is the solve of the p-th diagonal LU factor against the
    corresponding rows of A, so diagonal blocks are identities up to LU
    roundoff and off-diagonal blocks carry the inter-obstacle coupling.
    """
    if pre.block_offsets != system.block_offsets:
        raise ValueError("preconditioner blocks do not match the system")
    out = np.empty_like(system.matrix)
    for factor, lo, hi in zip(pre.factors, pre.block_offsets, pre.block_offsets[1:]):
        out[lo:hi, :] = linalg.lu_solve(factor, system.matrix[lo:hi, :])
    return out


def solve(system: BlockSystem, pre: BlockPreconditioner | None = None,
          restart: int = 50, tol: float = 1e-6, maxiter: int = 1000):
    """GMRES on the system, optionally left-preconditioned blockwise.

    Returns (density, GmresReport); non-convergence shows up in the report
    flag, not as an exception.
    """
    left = None
    if pre is not None:
        if pre.block_offsets != system.block_offsets:
            raise ValueError("preconditioner blocks do not match the system")
        left = lambda w: _block_solve(pre, w)
    return linalg.gmres(
        lambda v: system.matrix @ v,
        system.rhs,
        restart=restart,
        tol=tol,
        maxiter=maxiter,
        left_precond=left,
    )


def scattered_field(system: BlockSystem, density, points) -> bem.PotentialField:
    """Scattered field of a solved density at exterior points.

    Direct formulations represent the field by the single-layer potential of
    the density; BW combines single and double layers with its coupling.
    The near-boundary flags from the potential evaluation pass through.
    """
    density = np.asarray(density)
    if density.shape != (system.n,):
        raise ValueError(f"density has shape {density.shape}, expected ({system.n},)")
    single = bem.evaluate_potentials(system.mesh, density, system.k, points, layer="single")
    if system.formulation.kind != "BW":
        return single
    double = bem.evaluate_potentials(system.mesh, density, system.k, points, layer="double")
    values = -system.formulation.eta_bw * single.values - double.values
    return bem.PotentialField(
        values=values, near_boundary=single.near_boundary | double.near_boundary
    )
