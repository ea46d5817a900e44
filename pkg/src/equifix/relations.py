"""Equivariant generators and relations: star polynomials, measured
representation defects, group-averaging symmetrization, and the exact
correction of approximately permuted partitions of unity (the Rokhlin-type
families), including the corner-compressed tracial variant.

Relations are formal *-polynomials in the generators, their adjoints, and
formal action images of both; a relation system carries a set action of the
group on the generators, a syntactic closure check of the relations under
that action, and a stored exact model assignment witnessing admissibility.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from .groups import FiniteGroup
from .matfun import (operator_norm, polar_unitary, round_to_projection,
                     spectral_round_unitary)
from .galgebra import GAlgebra, matrix_algebra
from .repcorrect import DefectTooLargeError

# A symbol is (g, name, star): the formal image under the action of g of the
# generator `name`, starred or not.  g is a group element index; the
# identity index means the bare generator.
Symbol = Tuple[int, str, bool]


@dataclass(frozen=True)
class StarPolynomial:
    """Formal sum of scalar-weighted words in the symbols
    { sigma_g(s), sigma_g(s)* , 1 }.  Terms are kept in a canonical sorted
    order with merged coefficients; the empty word is the unit."""

    terms: tuple   # tuple of (coefficient, word); word = tuple of Symbol

    @staticmethod
    def from_terms(terms) -> "StarPolynomial":
        acc: Dict[tuple, complex] = {}
        for coef, word in terms:
            word = tuple((int(g), str(s), bool(star)) for (g, s, star) in word)
            acc[word] = acc.get(word, 0.0) + complex(coef)
        canon = tuple(sorted(((w, c) for w, c in acc.items() if abs(c) > 0.0),
                             key=lambda t: t[0]))
        return StarPolynomial(terms=tuple((c, w) for w, c in canon))

    @staticmethod
    def unit(coef=1.0) -> "StarPolynomial":
        return StarPolynomial.from_terms([(coef, ())])

    @staticmethod
    def word(*symbols, coef=1.0) -> "StarPolynomial":
        return StarPolynomial.from_terms([(coef, tuple(symbols))])

    def __add__(self, other: "StarPolynomial") -> "StarPolynomial":
        return StarPolynomial.from_terms(list(self.terms) + list(other.terms))

    def scaled(self, c) -> "StarPolynomial":
        return StarPolynomial.from_terms([(c * coef, w) for coef, w in self.terms])

    def symbols(self):
        for _, word in self.terms:
            yield from word

    def relabel(self, g: int, group: FiniteGroup, sigma: np.ndarray,
                index: Dict[str, int], names: Sequence[str]) -> "StarPolynomial":
        """Relabel by the action of g: the symbol sigma_h(s) becomes
        sigma_{g h g^-1}(sigma_g(s)).  On action-free words this is the set
        relabeling s -> sigma_g(s); evaluating the result at an exactly
        equivariant assignment equals applying alpha_g to the evaluation."""
        ginv = group.inverse(g)
        out = []
        for coef, word in self.terms:
            new_word = tuple(
                (group.mul(group.mul(g, h), ginv), names[sigma[g, index[s]]], star)
                for (h, s, star) in word)
            out.append((coef, new_word))
        return StarPolynomial.from_terms(out)

    def close_to(self, other: "StarPolynomial", tol: float = 1e-12) -> bool:
        if len(self.terms) != len(other.terms):
            return False
        for (c1, w1), (c2, w2) in zip(self.terms, other.terms):
            if w1 != w2 or abs(c1 - c2) > tol:
                return False
        return True


def eval_poly(poly: StarPolynomial, assignment: Dict[str, np.ndarray],
              act: Callable[[int, np.ndarray], np.ndarray], dim: int) -> np.ndarray:
    """Evaluate a star polynomial: the symbol (g, s, star) becomes
    alpha_g(rho(s)), starred symbols become adjoints, the empty word is the
    identity."""
    out = np.zeros((dim, dim), dtype=complex)
    eye = np.eye(dim, dtype=complex)
    for coef, word in poly.terms:
        acc = eye
        for g, s, star in word:
            if s not in assignment:
                raise KeyError(f"unknown generator symbol {s!r}")
            m = act(g, assignment[s])
            if star:
                m = m.conj().T
            acc = acc @ m
        out = out + coef * acc
    return out


@dataclass(frozen=True, eq=False)
class Assignment:
    """Candidate matrix values for the generators, normalized ||rho(s)|| <= 2."""

    values: dict    # name -> matrix

    def __post_init__(self):
        vals = {str(k): np.asarray(v, dtype=complex) for k, v in self.values.items()}
        object.__setattr__(self, "values", vals)
        for name, v in vals.items():
            norm = operator_norm(v)
            if norm > 2 + 1e-12:
                raise ValueError(f"||rho({name})|| = {norm:.6g} exceeds the "
                                 f"normalization bound 2")

    def dim(self) -> int:
        return next(iter(self.values.values())).shape[0]


@dataclass(frozen=True, eq=False)
class RelationSystem:
    """Generators, a set action of the group on them, relations closed under
    the action, and a stored exact model witnessing admissibility."""

    generators: tuple
    group: FiniteGroup
    sigma: np.ndarray            # (|G|, |S|) permutations of the generator set
    relations: tuple             # StarPolynomials
    model: Assignment
    model_algebra: GAlgebra

    def __post_init__(self):
        sigma = np.asarray(self.sigma, dtype=np.intp)
        object.__setattr__(self, "sigma", sigma)
        names = self.generators
        S = len(names)
        G = self.group
        if sigma.shape != (G.order, S):
            raise ValueError("sigma shape mismatch")
        index = {s: i for i, s in enumerate(names)}
        for g in range(G.order):
            if sorted(sigma[g].tolist()) != list(range(S)):
                raise ValueError(f"sigma[{g}] is not a permutation of the generators")
            for h in range(G.order):
                if np.any(sigma[G.mul(g, h)] != sigma[g][sigma[h]]):
                    raise ValueError("sigma is not a group action on the generators")
        for g in range(G.order):
            for rel in self.relations:
                moved = rel.relabel(g, G, sigma, index, names)
                if not any(moved.close_to(other) for other in self.relations):
                    raise ValueError(
                        f"relations are not closed under the action (g={g})")
        d_rel, d_eq = rep_defect(self, self.model,
                                 lambda g, a: self.model_algebra.act(g, a))
        if d_rel > 1e-12 or d_eq > 1e-12:
            raise ValueError(
                f"stored model is not an exact equivariant representation "
                f"(relation defect {d_rel:.3e}, equivariance defect {d_eq:.3e})")

    def index(self) -> Dict[str, int]:
        return {s: i for i, s in enumerate(self.generators)}


def rep_defect(system: RelationSystem, assignment: Assignment,
               act: Callable[[int, np.ndarray], np.ndarray]):
    """(delta_rel, delta_eq): the largest relation evaluation norm and the
    largest equivariance mismatch max ||rho(sigma_g(s)) - alpha_g(rho(s))||."""
    dim = assignment.dim()
    d_rel = 0.0
    for rel in system.relations:
        d_rel = max(d_rel, operator_norm(eval_poly(rel, assignment.values, act, dim)))
    d_eq = 0.0
    names = system.generators
    for g in range(system.group.order):
        for i, s in enumerate(names):
            moved = assignment.values[names[system.sigma[g, i]]]
            d_eq = max(d_eq, operator_norm(moved - act(g, assignment.values[s])))
    return d_rel, d_eq


def symmetrize_assignment(system: RelationSystem, assignment: Assignment,
                          act: Callable[[int, np.ndarray], np.ndarray]) -> Assignment:
    """Group-average an assignment into an exactly equivariant one:
    rho(s) = avg_g alpha_g( rho0( sigma_g^{-1}(s) ) ).  Moves each generator
    by at most the input equivariance defect and preserves the norm bound."""
    G = system.group
    names = system.generators
    idx = system.index()
    out = {}
    for i, s in enumerate(names):
        acc = None
        for g in range(G.order):
            ginv = G.inverse(g)
            pre = assignment.values[names[system.sigma[ginv, i]]]
            term = act(g, pre)
            acc = term if acc is None else acc + term
        out[s] = acc / G.order
    return Assignment(values=out)


def partition_system(group: FiniteGroup, algebra: GAlgebra,
                     model_values: Dict[str, np.ndarray]) -> RelationSystem:
    """The partition-of-unity system: generators p_g, relations
    p_g p_h = delta_{gh} p_g, p_g* = p_g, sum_g p_g = 1, with the group
    permuting the generators by left translation."""
    names = tuple(f"p{g}" for g in range(group.order))
    e = group.identity
    rels = []
    for g in range(group.order):
        for h in range(group.order):
            prod = StarPolynomial.word((e, names[g], False), (e, names[h], False))
            if g == h:
                prod = prod + StarPolynomial.word((e, names[g], False), coef=-1.0)
            rels.append(prod)
    for g in range(group.order):
        rels.append(StarPolynomial.word((e, names[g], True)) +
                    StarPolynomial.word((e, names[g], False), coef=-1.0))
    total = StarPolynomial.unit(-1.0)
    for g in range(group.order):
        total = total + StarPolynomial.word((e, names[g], False))
    rels.append(total)
    sigma = group.mult.copy()   # sigma_g(p_h) = p_{gh}
    return RelationSystem(generators=names, group=group, sigma=sigma,
                          relations=tuple(rels), model=Assignment(model_values),
                          model_algebra=algebra)


def _matrix_to_json(m) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(x.real), float(x.imag)] for x in row] for row in m]


def _matrix_from_json(data) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in data])


def system_to_json(system: RelationSystem) -> dict:
    """Serialize a relation system: generators, group table, action
    permutation, relations as coefficient/term lists, and the model
    (algebra action data plus generator values); complex numbers are
    [re, im] pairs."""
    A = system.model_algebra
    return {
        "generators": list(system.generators),
        "group": {"order": system.group.order,
                  "mult": system.group.mult.tolist(),
                  "inv": system.group.inv.tolist(),
                  "name": system.group.name},
        "sigma": system.sigma.tolist(),
        "relations": [
            [[[float(c.real), float(c.imag)],
              [[int(g), s, bool(star)] for (g, s, star) in word]]
             for c, word in rel.terms]
            for rel in system.relations],
        "model": {
            "algebra": {
                "blocks": list(A.blocks),
                "perms": A.perms.tolist(),
                "unitaries": [[_matrix_to_json(u) for u in us]
                              for us in A.unitaries],
            },
            "values": {name: _matrix_to_json(v)
                       for name, v in system.model.values.items()},
        },
    }


def system_from_json(data: dict) -> RelationSystem:
    group = FiniteGroup(order=int(data["group"]["order"]),
                        mult=np.array(data["group"]["mult"]),
                        inv=np.array(data["group"]["inv"]),
                        name=data["group"].get("name", "group"))
    relations = tuple(
        StarPolynomial.from_terms(
            [(complex(c[0], c[1]), tuple((int(g), s, bool(star))
                                         for g, s, star in word))
             for c, word in rel])
        for rel in data["relations"])
    alg_data = data["model"]["algebra"]
    algebra = GAlgebra(
        blocks=tuple(alg_data["blocks"]), group=group,
        perms=np.array(alg_data["perms"]),
        unitaries=tuple(tuple(_matrix_from_json(u) for u in us)
                        for us in alg_data["unitaries"]))
    model = Assignment({name: _matrix_from_json(v)
                        for name, v in data["model"]["values"].items()})
    return RelationSystem(generators=tuple(data["generators"]), group=group,
                          sigma=np.array(data["sigma"]), relations=relations,
                          model=model, model_algebra=algebra)


@dataclass
class SeedDefects:
    idempotency: float
    self_adjointness: float
    orthogonality: float
    equivariance: float
    unit_sum: float

    @property
    def overall(self) -> float:
        return max(self.idempotency, self.self_adjointness, self.orthogonality,
                   self.equivariance, self.unit_sum)


def measure_partition_seeds(algebra: GAlgebra, seeds: np.ndarray) -> SeedDefects:
    G = algebra.group
    d = G.order
    seeds = np.asarray(seeds, dtype=complex)
    idem = max(operator_norm(seeds[g] @ seeds[g] - seeds[g]) for g in range(d))
    sa = max(operator_norm(seeds[g] - seeds[g].conj().T) for g in range(d))
    orth = max((operator_norm(seeds[g] @ seeds[h])
                for g in range(d) for h in range(d) if g != h), default=0.0)
    eq = max(operator_norm(algebra.act(g, seeds[h]) - seeds[G.mul(g, h)])
             for g in range(d) for h in range(d))
    unit = operator_norm(seeds.sum(axis=0) - np.eye(algebra.dim))
    return SeedDefects(idem, sa, orth, eq, unit)


def partition_admissibility_threshold(d: int) -> float:
    """Conservative seed-defect bound under which the correction pipeline is
    guaranteed: propagate a uniform seed defect delta through symmetrization
    (displacement <= delta), the near-unitarity of the encoded element
    (||w0* w0 - 1|| <= d(d-1)(delta + 2 delta M) + d delta (2M + 2) +
    (d+1) delta with M = 1 + 2 delta), the polar step (movement
    max(1 - sqrt(1-eta), sqrt(1+eta) - 1)), and the spectral-rounding margin
    (eigenvalue argument within pi/(2d) of a d-th root, the half-gap
    condition).  Solved numerically by bisection."""

    def admissible(delta):
        M = 1 + 2 * delta
        eta = d * (d - 1) * (delta + 2 * delta * M) \
            + d * delta * (2 * M + 2) + (d + 1) * delta
        if eta >= 0.75:
            return False
        tau = max(1 - math.sqrt(1 - eta), math.sqrt(1 + eta) - 1)
        # Distance from the polar unitary to the exactly encoded element of a
        # nearby true partition: symmetrization displacement (<= delta per
        # block, d blocks) plus seed distance (<= delta per block) plus tau.
        drift = tau + 2 * d * delta
        return drift < math.sin(math.pi / (2 * d))

    lo, hi = 0.0, 0.5
    for _ in range(60):
        mid = (lo + hi) / 2
        if admissible(mid):
            lo = mid
        else:
            hi = mid
    return lo


@dataclass
class PartitionCorrection:
    projections: np.ndarray
    displacement: float
    seed_defects: SeedDefects
    certificate: dict
    residuals: dict


def _require_standard_cyclic(group: FiniteGroup):
    if not group.is_cyclic_standard():
        raise ValueError("partition correction requires a cyclic group in "
                         "standard form (element i = generator**i)")


def stabilize_partition(algebra: GAlgebra, seeds: np.ndarray,
                        rounding_margin: Optional[float] = None) -> PartitionCorrection:
    """Correct an approximately permuted approximate partition of unity over
    a cyclic group action into an exact one.

    Pipeline: group-average the seeds into an exactly permuted family, encode
    it as w0 = sum_g zeta^g b_g (zeta = exp(2 pi i / d)), average to the
    exactly covariant a = (1/d) sum_lambda lambda gamma_lambda(w0), take the
    polar unitary, round its spectrum onto the d-th roots of unity, and read
    off the eigenprojections.  The output family consists of exact mutually
    orthogonal projections summing to one and exactly permuted by the
    action; each stage validates its own measured precondition.
    """
    G = algebra.group
    _require_standard_cyclic(G)
    d = G.order
    n = algebra.dim
    seeds = np.asarray(seeds, dtype=complex)
    if seeds.shape != (d, n, n):
        raise ValueError(f"seeds shape {seeds.shape}, expected {(d, n, n)}")
    defects = measure_partition_seeds(algebra, seeds)
    threshold = partition_admissibility_threshold(d)
    certificate = {"seed_defect": defects.overall,
                   "a_priori_threshold": threshold}

    sym = np.stack([
        sum(algebra.act(h, seeds[G.mul(G.inverse(h), g)]) for h in range(d)) / d
        for g in range(d)])
    sym = np.stack([(b + b.conj().T) / 2 for b in sym])

    zeta = np.exp(2j * np.pi / d)
    w0 = sum((zeta ** g) * sym[g] for g in range(d))
    # Covariance averaging (idempotent once the family is exactly permuted).
    a = sum((zeta ** g) * algebra.act(g, w0) for g in range(d)) / d
    eta = operator_norm(a.conj().T @ a - np.eye(n))
    certificate["encoded_unitarity_gap"] = eta
    if eta >= 0.75:
        raise DefectTooLargeError(
            f"seeds too rough: ||w0* w0 - 1|| = {eta:.6g} >= 0.75 "
            f"(seed defect {defects.overall:.6g}, a-priori threshold {threshold:.6g})")
    w = polar_unitary(a)
    cov = max(operator_norm(algebra.act(g, w) - (zeta ** (-g)) * w)
              for g in range(d))
    certificate["covariance_residual"] = cov

    if rounding_margin is None:
        rounding_margin = np.pi / (2 * d)
    z, spec, ks = spectral_round_unitary(w, d, midpoint_gap=1e-6,
                                         return_spectral=True)
    args = np.angle(np.linalg.eigvals(w))
    cell = 2 * np.pi / d
    margin = float(np.min(np.abs(np.mod(args, cell) - cell / 2)))
    certificate["midpoint_margin"] = margin
    certificate["required_arg_margin"] = float(rounding_margin)
    arg_dev = float(np.max(np.minimum(np.mod(args, cell), cell - np.mod(args, cell))))
    if arg_dev >= rounding_margin:
        raise DefectTooLargeError(
            f"spectrum of the encoded unitary strays {arg_dev:.6g} rad from the "
            f"d-th roots, beyond the admissible margin {rounding_margin:.6g}")

    v = spec.eigenvectors
    projections = np.empty((d, n, n), dtype=complex)
    for g in range(d):
        cols = v[:, ks == g]
        projections[g] = cols @ cols.conj().T

    residuals = _partition_residuals(algebra, projections)
    displacement = max(operator_norm(projections[g] - seeds[g]) for g in range(d))
    return PartitionCorrection(projections=projections, displacement=displacement,
                               seed_defects=defects, certificate=certificate,
                               residuals=residuals)


def _partition_residuals(algebra: GAlgebra, family: np.ndarray,
                         unit: Optional[np.ndarray] = None) -> dict:
    G = algebra.group
    d = G.order
    if unit is None:
        unit = np.eye(algebra.dim)
    return {
        "projection": max(operator_norm(family[g] @ family[g] - family[g])
                          for g in range(d)),
        "self_adjoint": max(operator_norm(family[g] - family[g].conj().T)
                            for g in range(d)),
        "orthogonality": max((operator_norm(family[g] @ family[h])
                              for g in range(d) for h in range(d) if g != h),
                             default=0.0),
        "equivariance": max(operator_norm(algebra.act(g, family[h]) -
                                          family[G.mul(g, h)])
                            for g in range(d) for h in range(d)),
        "unit_sum": operator_norm(family.sum(axis=0) - unit),
    }


@dataclass
class TracialPartitionCorrection:
    projections: np.ndarray
    corner_projection: np.ndarray
    witness_compression_norm: float
    complement_rank: int
    displacement: float
    seed_defects: SeedDefects
    certificate: dict
    residuals: dict


def stabilize_tracial_partition(algebra: GAlgebra, seeds: np.ndarray,
                                witness: np.ndarray) -> TracialPartitionCorrection:
    """Tracial variant: the seeds sum to an approximately invariant
    sub-identity projection q rather than to 1.  Rounds the invariant sum to
    an exact invariant projection, compresses everything to the corner
    q M q, runs the partition correction there, and reports the witness
    compression norm ||e x e|| and the rank of 1 - e for the caller."""
    G = algebra.group
    _require_standard_cyclic(G)
    d = G.order
    n = algebra.dim
    seeds = np.asarray(seeds, dtype=complex)
    witness = np.asarray(witness, dtype=complex)
    wnorm = operator_norm(witness)
    if operator_norm(witness - witness.conj().T) > 1e-10 or abs(wnorm - 1) > 1e-10:
        raise ValueError("witness must be positive with norm 1")
    defects = measure_partition_seeds(algebra, seeds)   # unit_sum is vs 1 here

    sym = np.stack([
        sum(algebra.act(h, seeds[G.mul(G.inverse(h), g)]) for h in range(d)) / d
        for g in range(d)])
    sym = np.stack([(b + b.conj().T) / 2 for b in sym])
    s = sym.sum(axis=0)
    inv_gap = max(operator_norm(algebra.act(g, s) - s) for g in range(d))
    if inv_gap > 1e-10:
        raise DefectTooLargeError(
            f"summed seeds not invariant after averaging (gap {inv_gap:.3e})")
    q = round_to_projection(s)

    vals, vecs = np.linalg.eigh((q + q.conj().T) / 2)
    live = vals > 0.5
    iso = vecs[:, live]                      # n x r isometry onto the corner
    r = iso.shape[1]
    corner_unitaries = []
    for g in range(d):
        u = algebra.action_unitary(g)
        cu = iso.conj().T @ u @ iso
        corner_unitaries.append(polar_unitary(cu))
    corner = matrix_algebra(r, G, corner_unitaries, action_tol=1e-10)
    corner_defect = corner.action_defect()
    corner_seeds = np.stack([iso.conj().T @ sym[g] @ iso for g in range(d)])

    inner = stabilize_partition(corner, corner_seeds)
    projections = np.stack([iso @ inner.projections[g] @ iso.conj().T
                            for g in range(d)])

    residuals = _partition_residuals(algebra, projections, unit=q)
    exe = operator_norm(q @ witness @ q)
    displacement = max(operator_norm(projections[g] - seeds[g]) for g in range(d))
    certificate = dict(inner.certificate)
    certificate["corner_action_defect"] = corner_defect
    certificate["corner_rank"] = r
    return TracialPartitionCorrection(
        projections=projections, corner_projection=q,
        witness_compression_norm=exe, complement_rank=n - r,
        displacement=displacement, seed_defects=defects,
        certificate=certificate, residuals=residuals)
