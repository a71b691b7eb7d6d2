"""Randomized pair-occupation measurements of the 2-RDM.

Each record holds one orbital rotation together with the diagonal pair
occupations of the rotated 2-RDM.  Values are exact functionals of the input
2-RDM; measurement error is modeled separately as additive Gaussian noise
with a per-element tolerance.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass

import numpy as np

from .fci import TwoRDM
from .hamiltonians import pair_indices
from .numerics import RngStream, orthogonality_defect, sample_haar_orthogonal

__all__ = [
    "ShadowRecord",
    "SpinRotationMode",
    "pair_transform_matrix",
    "rotate_2rdm",
    "generate_shadow",
    "sample_shadow_ensemble",
    "add_gaussian_noise",
    "shadow_constraint_rows",
    "ensemble_to_json",
    "ensemble_from_json",
]


class SpinRotationMode(enum.Enum):
    """How a random rotation acts on spin orbitals: one spatial rotation
    replicated onto both spin blocks, or an unrestricted rotation mixing all
    spin orbitals."""

    SPATIAL_REPLICATED = "spatial"
    FULL_SPIN_ORBITAL = "spinorb"


@dataclass
class ShadowRecord:
    """One rotation u (on spin orbitals) with measured diagonal pair
    occupations and per-element tolerances (zero when noiseless).

    ``values[t]`` corresponds to the t-th lexicographic pair (p < q).
    """

    u: np.ndarray
    values: np.ndarray
    epsilon: np.ndarray

    def __post_init__(self) -> None:
        self.u = np.asarray(self.u, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.epsilon = np.asarray(self.epsilon, dtype=float)
        r = self.u.shape[0]
        npair = r * (r - 1) // 2
        if self.values.shape != (npair,) or self.epsilon.shape != (npair,):
            raise ValueError("values/epsilon do not match the pair count")
        if orthogonality_defect(self.u) > 1e-12:
            raise ValueError("rotation is not orthogonal to 1e-12")
        if np.any(self.epsilon < 0):
            raise ValueError("tolerances must be nonnegative")

    @property
    def n_spin(self) -> int:
        return self.u.shape[0]


def pair_transform_matrix(u: np.ndarray) -> np.ndarray:
    """Action of u on the antisymmetric pair space:
    B[(p<q),(i<j)] = u_pi u_qj - u_pj u_qi.  Orthogonal whenever u is."""
    u = np.asarray(u, dtype=float)
    pairs = pair_indices(u.shape[0])
    pi = np.array([p for p, _ in pairs])
    pj = np.array([q for _, q in pairs])
    outer = np.einsum("pi,qj->pqij", u, u)
    full = outer - outer.transpose(0, 1, 3, 2)
    return np.ascontiguousarray(full[pi[:, None], pj[:, None], pi[None, :], pj[None, :]])


def rotate_2rdm(d2: TwoRDM, u: np.ndarray) -> TwoRDM:
    """2-RDM expressed in the rotated orbital basis (congruence by the pair
    transform of u); preserves trace and positivity."""
    u = np.asarray(u, dtype=float)
    if u.shape != (d2.n_spin, d2.n_spin):
        raise ValueError("rotation dimension does not match the 2-RDM")
    b = pair_transform_matrix(u)
    return TwoRDM(d2.n_spin, b @ d2.data @ b.T)


def generate_shadow(d2: TwoRDM, u: np.ndarray) -> ShadowRecord:
    """Noiseless shadow: diagonal pair occupations of the rotated 2-RDM."""
    u = np.asarray(u, dtype=float)
    if u.shape != (d2.n_spin, d2.n_spin):
        raise ValueError("rotation dimension does not match the 2-RDM")
    b = pair_transform_matrix(u)
    values = np.einsum("pi,ij,pj->p", b, d2.data, b)
    return ShadowRecord(u, values, np.zeros_like(values))


def _replicate_spatial(u_spatial: np.ndarray) -> np.ndarray:
    return np.kron(u_spatial, np.eye(2))


def sample_shadow_ensemble(d2: TwoRDM, m: int, mode: SpinRotationMode,
                           rng: RngStream) -> list[ShadowRecord]:
    """m independent Haar rotations turned into shadows; deterministic given
    the stream seed.  SPATIAL_REPLICATED draws the rotation on spatial
    orbitals and applies it to both spin blocks."""
    if m < 0:
        raise ValueError("shadow count must be nonnegative")
    gen = rng.generator()
    records = []
    for _ in range(m):
        if mode is SpinRotationMode.SPATIAL_REPLICATED:
            u = _replicate_spatial(sample_haar_orthogonal(d2.n_spin // 2, gen))
        else:
            u = sample_haar_orthogonal(d2.n_spin, gen)
        records.append(generate_shadow(d2, u))
    return records


def add_gaussian_noise(record: ShadowRecord, sigma: float,
                       rng: RngStream | np.random.Generator) -> ShadowRecord:
    """Perturb every value by i.i.d. N(0, sigma^2) and set the per-element
    tolerance to sigma.  Values are not clamped: feasibility is the solver's
    concern, not the noise model's."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if sigma == 0:
        return ShadowRecord(record.u.copy(), record.values.copy(),
                            np.zeros_like(record.values))
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    noisy = record.values + gen.normal(0.0, sigma, size=record.values.shape)
    return ShadowRecord(record.u.copy(), noisy, np.full_like(record.values, sigma))


def shadow_constraint_rows(u: np.ndarray) -> np.ndarray:
    """Linear functionals reproducing a shadow: entry [t] is the packed-space
    coefficient matrix c with <c, D> = S for the t-th pair, namely the outer
    product of the t-th row of the pair transform with itself."""
    b = pair_transform_matrix(np.asarray(u, dtype=float))
    return np.einsum("pi,pj->pij", b, b)


# ---------------------------------------------------------------------------
# JSON replay format

def ensemble_to_json(records: list[ShadowRecord], seed: int, mode: SpinRotationMode,
                     sigma: float) -> str:
    """Serialize an ensemble: {seed, mode, sigma, shadows: [{u, values, epsilon}]}
    with u flattened row-major."""
    doc = {
        "seed": seed,
        "mode": mode.value,
        "sigma": sigma,
        "shadows": [
            {
                "u": [float(x) for x in rec.u.ravel()],
                "values": [float(x) for x in rec.values],
                "epsilon": [float(x) for x in rec.epsilon],
            }
            for rec in records
        ],
    }
    return json.dumps(doc, indent=1)


def ensemble_from_json(text: str) -> tuple[list[ShadowRecord], dict]:
    doc = json.loads(text)
    records = []
    for item in doc["shadows"]:
        nu = len(item["u"])
        r = int(round(nu ** 0.5))
        if r * r != nu:
            raise ValueError("rotation payload is not square")
        records.append(ShadowRecord(
            np.array(item["u"]).reshape(r, r),
            np.array(item["values"]),
            np.array(item["epsilon"]),
        ))
    meta = {"seed": doc.get("seed"), "mode": doc.get("mode"), "sigma": doc.get("sigma")}
    return records, meta
