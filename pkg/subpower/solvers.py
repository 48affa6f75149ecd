from __future__ import annotations
import itertools
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple
import numpy as np
from typeguard import typechecked
from subpower.algebra import Catalog, FiniteAlgebra, ProductContext, \
     algebra_from_subuniverse, as_rows, find_isomorphism, quotient, \
     subalgebra_closure
from subpower.circuits import CircuitBuilder, closure_circuit, tn_inputs
from subpower.congruence import AbelianGroupTable, UnionFind, \
     check_residual_smallness, check_similarity, find_difference_term, \
     hs_catalog, induced_abelian_group, meet_irreducibles, si_profile
from subpower.errors import CatalogError, IdentityError, MethodUnavailableError, \
     PreconditionError, ProvenanceError
from subpower.logger import getSubpowerLogger
from subpower.representations import ForkWitnessOracle, WitnessTrace, \
     extract_witness_circuit, is_representable, prepare_compact_rep, \
     saturation_generators, weak_transitivity_closure

__all__ = ["SmpInstance", "SmpAnswer", "METHODS", "smp_brute", "solve_compact",
           "lift_instance", "reduce_hs", "check_d_coherent", "coherent_parts",
           "reduce_to_d_coherent", "membership_criterion", "solve_smpd_rs",
           "abelian_sift", "solve"]

logger = getSubpowerLogger(name='solvers')

METHODS = ('auto', 'compact', 'reduction', 'rs', 'brute')


@dataclass
class SmpInstance:
    """
    An input of the subpower membership problem: is `target` in the
    subalgebra of the product of `factors` generated by `generators`?
    """
    factors : List[str]
    generators : np.ndarray
    target : np.ndarray

    def __post_init__(self) -> None:
        self.factors = [str(f) for f in self.factors]
        self.generators = np.asarray(self.generators, dtype=np.int64)
        if self.generators.ndim == 1:
            self.generators = self.generators.reshape(1, -1)
        self.target = np.asarray(self.target, dtype=np.int64).ravel()
        n = len(self.factors)
        if n == 0 or len(self.generators) == 0:
            raise PreconditionError('an instance needs at least one factor and one generator')
        if self.generators.shape[1] != n or self.target.shape[0] != n:
            raise PreconditionError('generators and target must have length {}'.format(n))

    @property
    def n(self) -> int:
        return len(self.factors)

    @property
    def k(self) -> int:
        return len(self.generators)

    def context(self, cat : Catalog) -> ProductContext:
        """The product of the factors; checks every coordinate is in range."""
        context = cat.context(self.factors)
        as_rows(self.generators, context)
        as_rows(self.target, context)
        return context

    @staticmethod
    def from_dict(data : Mapping[str,Any]) -> 'SmpInstance':
        try:
            return SmpInstance(list(data['factors']), data['generators'], data['target'])
        except (KeyError, TypeError) as e:
            raise CatalogError('malformed instance: missing or invalid {}'.format(e))

    def to_dict(self) -> Dict[str,Any]:
        return {'factors': self.factors, 'generators': self.generators.tolist(),
                'target': self.target.tolist()}


@dataclass
class SmpAnswer:
    verdict : bool
    method : str
    witness : Optional[WitnessTrace] = None
    micros : int = 0
    closure_size : Optional[int] = None
    details : Dict[str,Any] = field(default_factory=dict)

    @property
    def label(self) -> str:
        return 'YES' if self.verdict else 'NO'

    def to_dict(self, witness_file : Optional[str]=None) -> Dict[str,Any]:
        out : Dict[str,Any] = {'verdict': self.label, 'method': self.method, 'micros': self.micros}
        if witness_file is not None:
            out['witness_file'] = witness_file
        return out


def _micros(start : float) -> int:
    return int((time.perf_counter() - start) * 1e6)


@typechecked
def smp_brute(instance : SmpInstance, cat : Catalog, witness : bool=False) -> SmpAnswer:
    """
    Answers by generating the subalgebra until the target shows up.

    Raises
    ------
    CapExceededError
        Raised if the subalgebra outgrows settings.closureCap
    """
    start = time.perf_counter()
    context = instance.context(cat)
    closure = subalgebra_closure(instance.generators, context, target=instance.target)
    found = closure.found is not None
    trace = None
    if found and witness:
        builder = CircuitBuilder(instance.k)
        out = closure_circuit(closure, closure.found, instance.k, builder)
        circuit = builder.build([out])
        trace = WitnessTrace(circuit, 0, circuit.gate_count())
    return SmpAnswer(found, 'brute', trace, _micros(start), len(closure))


@typechecked
def solve_compact(instance : SmpInstance, cat : Catalog, witness : bool=False,
                  cap : Optional[int]=None) -> SmpAnswer:
    """
    Answers through a compact representation of the generated subalgebra.

    The polynomial preparation (local witnesses, generator checks, fork
    propagation, weak transitivity) often suffices to see the target as
    representable. Otherwise the fork-witness oracle is queried, rechecking
    the target after every round; when the oracle has nothing left the
    representation is complete and the last check is exact.

    Parameters
    ----------
    instance : SmpInstance
    cat : Catalog
        Configured with a cube term; n >= d is required
    witness : bool
        On YES, also extract a circuit over the generators computing the
        target
    cap : int, optional
        Oracle cap, defaults to settings.oracleCap

    Raises
    ------
    PreconditionError
        Raised if n < d or the catalog has no cube term
    CapExceededError
        Raised under 'oracleCap' or 'oracleWorkCap' if the oracle walk visits
        too many elements or evaluates too many argument tuples
    """
    start = time.perf_counter()
    context = instance.context(cat)
    if cat.d is None or instance.n < cat.d:
        raise PreconditionError('the compact path needs a cube term and n >= d')
    rep = prepare_compact_rep(instance.generators, context, provenance=witness)
    b = instance.target
    for I in tn_inputs(instance.n, rep.d):
        if (I, tuple(int(x) for x in b[list(I)])) not in rep.local_index:
            logger.debug('target projection on {} is not generated'.format(I))
            return SmpAnswer(False, 'compact', None, _micros(start), details={'tuples': len(rep)})
    result = is_representable(b, rep, dry_run=True, trace=witness)
    rounds = 0
    if not result.answer:
        oracle = ForkWitnessOracle(instance.generators, context, cap=cap)
        while oracle(rep):
            rounds += 1
            result = is_representable(b, rep, dry_run=True, trace=witness)
            if result.answer:
                break
        else:
            weak_transitivity_closure(rep)
            result = is_representable(b, rep, dry_run=True, trace=witness)
    trace = None
    if result.answer and witness:
        if result.node is None:
            raise ProvenanceError('the target has no recorded derivation')
        trace = extract_witness_circuit(rep, result.node, b, cat.cube_term)
    logger.debug('compact path: {} after {} oracle rounds, {} tuples'.\
                 format('YES' if result.answer else 'NO', rounds, len(rep)))
    return SmpAnswer(result.answer, 'compact', trace, _micros(start),
                     details={'tuples': len(rep), 'rounds': rounds})


def _hs_provenance(name : str, cat : Catalog, hs : Catalog) -> Tuple[str, Callable[[int],int], List[List[int]]]:
    if name in cat.base_names:
        return name, int, []
    entry = hs.hs.get(name)
    if entry is None:
        raise PreconditionError('factor {} has no subalgebra/quotient provenance in HS of the catalog'.\
                                format(name))
    blocks = [[entry.subuniverse[x] for x in block] for block in entry.congruence.blocks()]
    return entry.parent, entry.lift, blocks


@typechecked
def lift_instance(instance : SmpInstance, cat : Catalog) -> Tuple[SmpInstance, List[List[List[int]]]]:
    """
    Lifts an instance over members of HS K to the base algebras: every
    coordinate value is replaced by a preimage in the subuniverse the member
    comes from. Returns the lifted instance and, per coordinate, the blocks
    of the congruence the member is the quotient by (in base ids).
    """
    hs = hs_catalog(cat)
    parents, lifts, theta = [], [], []
    for name in instance.factors:
        parent, lift, blocks = _hs_provenance(name, cat, hs)
        parents.append(parent)
        lifts.append(lift)
        theta.append(blocks)

    def up(row : np.ndarray) -> List[int]:
        return [lifts[i](int(x)) for i, x in enumerate(row)]

    lifted = SmpInstance(parents, [up(g) for g in instance.generators], up(instance.target))
    return lifted, theta


BaseSolver = Callable[[SmpInstance, Catalog], SmpAnswer]


@typechecked
def reduce_hs(instance : SmpInstance, cat : Catalog,
              base_solver : Optional[BaseSolver]=None) -> SmpAnswer:
    """
    Answers an instance over members of HS K by one instance over K.

    The generators and target are lifted to tuples a_j of the base product
    and the generators are extended to generate the theta-saturation of
    <a_1..a_k> (theta the product of the quotient congruences); the target
    belongs to the original subalgebra iff its lift belongs to the
    saturation.

    Parameters
    ----------
    cat : Catalog
        The base catalog K (configured)
    base_solver : callable, optional
        (instance, catalog) -> SmpAnswer over K, solve_compact by default

    Raises
    ------
    PreconditionError
        Raised if a factor is neither in K nor in hs_catalog(K)
    """
    start = time.perf_counter()
    lifted, theta = lift_instance(instance, cat)
    context = lifted.context(cat)
    if cat.d is None or lifted.n < cat.d:
        answer = smp_brute(instance, hs_catalog(cat))
        answer.method = 'reduction'
        return answer
    generators = saturation_generators(lifted.generators, context, theta)
    logger.debug('HS reduction: {} generators for the saturation'.format(len(generators)))
    solver = base_solver or solve_compact
    answer = solver(SmpInstance(lifted.factors, generators, lifted.target), cat)
    return SmpAnswer(answer.verdict, 'reduction', None, _micros(start), answer.closure_size,
                     {'generators': len(generators)})


def _quotient_graph_is_isomorphism(first : Tuple[FiniteAlgebra, Sequence[int]],
                                   second : Tuple[FiniteAlgebra, Sequence[int]],
                                   pairs : np.ndarray) -> bool:
    """
    Whether the subalgebra of Q1 x Q2 generated by `pairs` (given in Q1, Q2
    ids) is the graph of a bijection, hence of an isomorphism.
    """
    q1, q2 = first[0], second[0]
    if q1.size != q2.size:
        return False
    closure = subalgebra_closure(pairs, ProductContext([q1, q2]))
    elements = closure.elements
    return len(elements) == q1.size and len(set(elements[:, 0].tolist())) == q1.size and \
        len(set(elements[:, 1].tolist())) == q2.size


def _rho_quotient(alg : FiniteAlgebra) -> Tuple[FiniteAlgebra, List[int]]:
    profile = si_profile(alg)
    return quotient(alg, profile.centralizer, name='{}/rho'.format(alg.name))


@typechecked
def check_d_coherent(instance : SmpInstance, cat : Catalog) -> Tuple[bool, Optional[int]]:
    """
    Checks d-coherence of an instance, returning the verdict and the number
    (1-5) of the first failing condition:

    1. n >= max(d, 3);
    2. the generators generate a subdirect product;
    3. the factors are similar subdirectly irreducible algebras with abelian
       monoliths;
    4. target|_I is generated for every |I| < max(d, 3);
    5. for i != j, the generated subalgebra of A_i/rho_i x A_j/rho_j is the
       graph of an isomorphism (rho the centralizers of the monoliths).
    """
    d = cat.d if cat.d is not None else 2
    n = instance.n
    top = max(d, 3)
    if n < top:
        return False, 1
    context = instance.context(cat)
    gens = instance.generators
    for i in range(n):
        size = len(subalgebra_closure(gens[:, [i]], context.restrict([i])))
        if size != context.algebras[i].size:
            return False, 2
    algebras = context.algebras
    for alg in algebras:
        profile = si_profile(alg)
        if not profile.is_si or not profile.monolith_abelian:
            return False, 3
    names = sorted({alg.name for alg in algebras})
    for a, b in itertools.combinations(names, 2):
        if not check_similarity(cat[a], cat[b], cat):
            return False, 3
    for size in range(1, top):
        for I in itertools.combinations(range(n), size):
            closure = subalgebra_closure(gens[:, list(I)], context.restrict(I),
                                         target=instance.target[list(I)])
            if closure.found is None:
                return False, 4
    quotients = [_rho_quotient(alg) for alg in algebras]
    for i, j in itertools.combinations(range(n), 2):
        (qi, ni), (qj, nj) = quotients[i], quotients[j]
        pairs = np.asarray([[ni[int(g[i])], nj[int(g[j])]] for g in gens], dtype=np.int64)
        if not _quotient_graph_is_isomorphism(quotients[i], quotients[j], pairs):
            return False, 5
    return True, None


def _hs_member(hs : Catalog, alg : FiniteAlgebra, found : Dict[str,Tuple[str,List[int]]]) -> Tuple[str, List[int]]:
    """The member of hs isomorphic to alg and the isomorphism alg -> member."""
    if alg.name in found:
        return found[alg.name]
    for name, member in hs.algebras.items():
        if member.size != alg.size:
            continue
        phi = find_isomorphism(alg, member)
        if phi is not None:
            found[alg.name] = (name, phi)
            return found[alg.name]
    raise PreconditionError('{} is not isomorphic to a member of HS of the catalog'.format(alg.name))


@dataclass
class CoherentSplit:
    """
    Outcome of splitting an instance into d-coherent pieces: either a
    verdict reached on the way, or the instances over HS K whose answers
    decide membership together (YES iff all are YES).
    """
    verdict : Optional[bool]
    pieces : List[SmpInstance] = field(default_factory=list)
    reason : str = ''


@typechecked
def coherent_parts(instance : SmpInstance, cat : Catalog) -> CoherentSplit:
    """
    The reduction of an instance to d-coherent instances over HS K.

    The target is first tested on every set of max(d-1, 2) coordinates;
    trivial coordinates are dropped; every remaining coordinate j is split
    into the subdirectly irreducible quotients B_j/sigma, sigma meet
    irreducible in Con(B_j), B_j the projection of the generated
    subalgebra. Two such quotients v, w are related when both have abelian
    monoliths, they are similar, and the generated subalgebra of
    B_v/rho_v x B_w/rho_w is the graph of an isomorphism; each class with
    more than max(d-1, 2) members gives one piece.
    """
    context = instance.context(cat)
    hs = hs_catalog(cat)
    d = cat.d if cat.d is not None else 2
    dm = max(d - 1, 2)
    n = instance.n
    gens, b = instance.generators, instance.target
    if n <= dm:
        found = subalgebra_closure(gens, context, target=b).found is not None
        return CoherentSplit(found, reason='small arity')
    for I in itertools.combinations(range(n), dm):
        if subalgebra_closure(gens[:, list(I)], context.restrict(I), target=b[list(I)]).found is None:
            return CoherentSplit(False, reason='projection onto {}'.format(I))
    keep = []
    projections : Dict[int,Tuple[FiniteAlgebra,Dict[int,int]]] = {}
    for j in range(n):
        values = sorted(int(v) for v in subalgebra_closure(gens[:, [j]], context.restrict([j])).elements[:, 0])
        if len(values) == 1:
            continue
        keep.append(j)
        name = '{}[{}]'.format(context.names[j], ','.join(str(v) for v in values))
        Bj = algebra_from_subuniverse(name, [(v,) for v in values], context.restrict([j]))
        projections[j] = (Bj, {v: i for i, v in enumerate(values)})
    if len(keep) <= dm:
        return CoherentSplit(True, reason='at most {} nontrivial coordinates'.format(dm))

    W : List[Tuple[int,Any]] = []
    hatted : List[Tuple[FiniteAlgebra, List[int]]] = []
    for j in keep:
        Bj, _ = projections[j]
        for sigma, _cover in meet_irreducibles(Bj):
            W.append((j, sigma))
            hatted.append(quotient(Bj, sigma, name='{}/{}'.format(Bj.name, sigma)))

    def hat(row : np.ndarray, w : int) -> int:
        j = W[w][0]
        return int(hatted[w][1][projections[j][1][int(row[j])]])

    hat_gens = np.asarray([[hat(g, w) for w in range(len(W))] for g in gens], dtype=np.int64)
    hat_target = np.asarray([hat(b, w) for w in range(len(W))], dtype=np.int64)
    profiles = [si_profile(q) for q, _ in hatted]
    rho = [_rho_quotient(q) for q, _ in hatted]
    related = UnionFind(len(W))
    for v, w in itertools.combinations(range(len(W)), 2):
        if not (profiles[v].monolith_abelian and profiles[w].monolith_abelian):
            continue
        if not check_similarity(hatted[v][0], hatted[w][0], hs):
            continue
        pairs = np.stack([np.asarray(rho[v][1])[hat_gens[:, v]],
                          np.asarray(rho[w][1])[hat_gens[:, w]]], axis=1)
        if _quotient_graph_is_isomorphism(rho[v], rho[w], pairs):
            related.union(v, w)
    classes : Dict[int,List[int]] = {}
    for w in range(len(W)):
        classes.setdefault(related.find(w), []).append(w)
    found : Dict[str,Tuple[str,List[int]]] = {}
    pieces = []
    for members in classes.values():
        if len(members) <= dm:
            continue
        factors, maps = [], []
        for w in members:
            name, phi = _hs_member(hs, hatted[w][0], found)
            factors.append(name)
            maps.append(phi)
        piece_gens = [[maps[i][int(g[w])] for i, w in enumerate(members)] for g in hat_gens]
        piece_target = [maps[i][int(hat_target[w])] for i, w in enumerate(members)]
        pieces.append(SmpInstance(factors, piece_gens, piece_target))
    logger.debug('{} irreducible quotients, {} classes, {} pieces'.\
                 format(len(W), len(classes), len(pieces)))
    return CoherentSplit(None if pieces else True, pieces, 'split')


PieceSolver = Callable[[SmpInstance, Catalog], bool]


def _brute_piece(piece : SmpInstance, hs : Catalog) -> bool:
    return smp_brute(piece, hs).verdict


def _compact_piece(piece : SmpInstance, hs : Catalog) -> bool:
    if hs.d is None or piece.n < hs.d:
        return _brute_piece(piece, hs)
    return solve_compact(piece, hs).verdict


@typechecked
def reduce_to_d_coherent(instance : SmpInstance, cat : Catalog,
                         piece_solver : Optional[PieceSolver]=None) -> SmpAnswer:
    """
    Answers an instance by splitting it into d-coherent pieces over HS K
    (see coherent_parts) and solving each; NO as soon as one piece says NO.

    Parameters
    ----------
    cat : Catalog
        The base catalog K
    piece_solver : callable, optional
        (piece, hs catalog) -> bool; the compact path by default
    """
    start = time.perf_counter()
    split = coherent_parts(instance, cat)
    if split.verdict is not None:
        return SmpAnswer(split.verdict, 'reduction', None, _micros(start), details={'reason': split.reason})
    hs = hs_catalog(cat)
    solver = piece_solver or _compact_piece
    for piece in split.pieces:
        if not solver(piece, hs):
            return SmpAnswer(False, 'reduction', None, _micros(start), details={'pieces': len(split.pieces)})
    return SmpAnswer(True, 'reduction', None, _micros(start), details={'pieces': len(split.pieces)})


@typechecked
def membership_criterion(instance : SmpInstance, cat : Catalog) -> bool:
    """
    The structural membership criterion evaluated by brute force: the target
    is generated on every set of fewer than max(d, 3) coordinates, and its
    image is generated on every large class of related irreducible
    quotients.
    """
    split = coherent_parts(instance, cat)
    if split.verdict is not None:
        return split.verdict
    hs = hs_catalog(cat)
    return all(_brute_piece(piece, hs) for piece in split.pieces)


@typechecked
def abelian_sift(groups : Sequence[AbelianGroupTable], H : Any, b : Any) -> bool:
    """
    Membership of b in the subgroup of G_1 x ... x G_n generated by H.

    The subgroup is kept in echelon form: level j holds, for every value v
    reached in coordinate j by subgroup elements vanishing before j, one such
    element. A new element is sifted through the levels; when it stops at
    level j with a new value, the level is extended by the multiples of it
    and the first multiple landing in the old values, corrected by the
    stored element, is sifted further down.

    Parameters
    ----------
    groups : Sequence[AbelianGroupTable]
        One group per coordinate
    H : array_like
        Tuples of element ids
    b : array_like
        Tuple of element ids

    Returns
    -------
    bool
        Whether b is in <H>

    Raises
    ------
    IdentityError
        Raised if a table is not an abelian group table
    """
    n = len(groups)
    zeros = []
    for g in groups:
        k = len(g)
        z = g.position(g.zero)
        idx = np.arange(k)
        if g.add.shape != (k, k) or not (np.array_equal(g.add[z], idx) and
                                         np.array_equal(g.add, g.add.T) and
                                         np.all(g.add[idx, g.neg] == z)):
            raise IdentityError('group table on {} is not an abelian group'.format(g.elements))
        zeros.append(z)
    zero = tuple(zeros)

    def add(x : Tuple[int,...], y : Tuple[int,...]) -> Tuple[int,...]:
        return tuple(int(groups[j].add[x[j], y[j]]) for j in range(n))

    def neg(x : Tuple[int,...]) -> Tuple[int,...]:
        return tuple(int(groups[j].neg[x[j]]) for j in range(n))

    levels : List[Dict[int,Tuple[int,...]]] = [{zeros[j]: zero} for j in range(n)]

    def sift(x : Tuple[int,...]) -> Tuple[int, Tuple[int,...]]:
        for j in range(n):
            if x[j] == zeros[j]:
                continue
            stored = levels[j].get(x[j])
            if stored is None:
                return j, x
            x = add(x, neg(stored))
        return n, x

    def insert(x : Tuple[int,...]) -> None:
        pending = [x]
        while pending:
            j, x = sift(pending.pop())
            if j == n:
                continue
            old = dict(levels[j])
            multiple = x
            while multiple[j] not in old:
                for u, t in old.items():
                    value = int(groups[j].add[u, multiple[j]])
                    levels[j].setdefault(value, add(t, multiple))
                multiple = add(multiple, x)
            pending.append(add(multiple, neg(old[multiple[j]])))

    for h in np.asarray(H, dtype=np.int64).reshape(-1, n):
        insert(tuple(groups[j].position(int(h[j])) for j in range(n)))
    target = tuple(groups[j].position(int(v)) for j, v in enumerate(np.asarray(b).ravel()))
    j, _ = sift(target)
    return j == n


@typechecked
def solve_smpd_rs(instance : SmpInstance, cat : Catalog, base : Optional[Catalog]=None) -> SmpAnswer:
    """
    Answers a d-coherent instance when the variety is residually small.

    With rho = the product of the centralizers of the monoliths, a
    transversal O of B/rho is built from the generators, coordinates that
    no element of O tells apart are identified, and the unary polynomials
    generated by the identity and the constants of O are applied to the
    generators. Those images that fall into the rho-class of the target
    generate, in the abelian groups induced on the rho-classes, a subgroup
    containing the target iff the target is in B.

    Parameters
    ----------
    instance : SmpInstance
        d-coherent (see check_d_coherent)
    cat : Catalog
        The catalog the factors belong to (an HS catalog when called from the
        reduction); its difference term is used
    base : Catalog, optional
        The catalog whose variety is checked for residual smallness,
        defaults to `cat`

    Raises
    ------
    MethodUnavailableError
        Raised if the variety is not residually small or no difference term
        is known
    """
    start = time.perf_counter()
    small, offender = check_residual_smallness(base or cat)
    if not small:
        raise MethodUnavailableError('not residually small: {} has an abelian monolith with '
                                     'nonabelian centralizer'.format(offender))
    difference = find_difference_term(cat)
    context = instance.context(cat)
    n = instance.n
    gens = instance.generators
    algebras = context.algebras
    rho = []
    for alg in algebras:
        profile = si_profile(alg)
        if not profile.is_si or not profile.monolith_abelian:
            raise PreconditionError('{} is not subdirectly irreducible with abelian monolith'.\
                                    format(alg.name))
        rho.append(profile.centralizer)
    labels = [np.asarray(r.labels, dtype=np.int64) for r in rho]

    # transversal of the rho_1-classes reached from the generators
    q1, natural = quotient(algebras[0], rho[0])
    reps : Dict[int,np.ndarray] = {}
    for g in gens:
        reps.setdefault(natural[int(g[0])], g.astype(np.int64))
    grown = True
    while grown:
        grown = False
        known = list(reps.items())
        for symbol, arity in context.signature.symbols:
            for combo in itertools.product(known, repeat=arity):
                value = int(q1.apply(symbol, *[c[0] for c in combo]))
                if value not in reps:
                    reps[value] = context.apply(symbol, [c[1] for c in combo]).astype(np.int64)
                    grown = True
    O = np.asarray(list(reps.values()), dtype=np.int64)

    # coordinates identified by every element of O
    columns : Dict[Tuple[str,bytes],int] = {}
    representative = []
    for j in range(n):
        key = (context.names[j], O[:, j].tobytes())
        representative.append(columns.setdefault(key, j))
    T = sorted(set(representative))
    sizes = [algebras[t].size for t in T]
    offsets = dict(zip(T, np.cumsum([0] + sizes[:-1]).tolist()))

    # unary polynomials of A_T as elements of the function power
    function_power = ProductContext([algebras[t] for t in T for _ in range(algebras[t].size)],
                                    None)
    identity = np.concatenate([np.arange(s) for s in sizes])
    constants = [np.concatenate([np.full(algebras[t].size, o[t]) for t in T]) for o in O]
    polys = subalgebra_closure(np.asarray([identity] + constants), function_power).elements.astype(np.int64)

    b = instance.target
    home = None
    for o in O:
        if all(labels[j][int(b[j])] == labels[j][int(o[j])] for j in range(n)):
            home = o
            break
    if home is None:
        return SmpAnswer(False, 'rs', None, _micros(start), details={'reason': 'target class not reached'})

    index = np.asarray([offsets[representative[j]] for j in range(n)], dtype=np.int64)[None, :] + gens
    images = polys[:, index].reshape(-1, n)
    inside = np.ones(len(images), dtype=bool)
    for j in range(n):
        inside &= labels[j][images[:, j]] == labels[j][int(home[j])]
    H = np.unique(images[inside], axis=0)
    groups = [induced_abelian_group(algebras[j], rho[j], int(home[j]), difference) for j in range(n)]
    verdict = abelian_sift(groups, H, b)
    logger.debug('rs path: |O|={}, |T|={}, |P|={}, |H|={}'.format(len(O), len(T), len(polys), len(H)))
    return SmpAnswer(verdict, 'rs', None, _micros(start),
                     details={'transversal': len(O), 'polynomials': len(polys), 'H': len(H)})


def _rs_piece(base : Catalog) -> PieceSolver:
    def solver(piece : SmpInstance, hs : Catalog) -> bool:
        coherent, _ = check_d_coherent(piece, hs)
        if not coherent:
            return _compact_piece(piece, hs)
        return solve_smpd_rs(piece, hs, base).verdict
    return solver


@typechecked
def solve(instance : SmpInstance, cat : Catalog, method : str='auto',
          witness : bool=False) -> SmpAnswer:
    """
    Answers an SMP instance with the requested method.

    Parameters
    ----------
    instance : SmpInstance
        Factors from the catalog, or from its HS closure (answered through
        the HS reduction)
    cat : Catalog
        Configured base catalog
    method : str
        'brute' generates the subalgebra; 'compact' builds a compact
        representation; 'reduction' splits into d-coherent pieces solved by
        the compact path; 'rs' does the same but solves the pieces in the
        residually small way; 'auto' is brute for n < d and compact otherwise
    witness : bool
        Extract a circuit computing the target on YES (brute and compact)

    Raises
    ------
    PreconditionError
        Raised on an unknown method
    MethodUnavailableError
        Raised for 'rs' on a catalog that is not residually small
    """
    if method not in METHODS:
        raise PreconditionError('unknown method {}, choose from {}'.format(method, ', '.join(METHODS)))
    start = time.perf_counter()
    base_factors = all(f in cat.base_names for f in instance.factors)
    if method == 'brute':
        answer = smp_brute(instance, cat if base_factors else hs_catalog(cat), witness)
    elif not base_factors:
        lifted_method = 'compact' if method == 'auto' else method
        answer = reduce_hs(instance, cat, lambda inst, c: solve(inst, c, lifted_method))
    elif method == 'auto':
        if cat.d is None or instance.n < cat.d:
            answer = smp_brute(instance, cat, witness)
        else:
            answer = solve_compact(instance, cat, witness)
    elif method == 'compact':
        answer = solve_compact(instance, cat, witness)
    elif method == 'reduction':
        answer = reduce_to_d_coherent(instance, cat)
    else:
        small, offender = check_residual_smallness(cat)
        if not small:
            raise MethodUnavailableError('not residually small: {} has an abelian monolith with '
                                         'nonabelian centralizer'.format(offender))
        answer = reduce_to_d_coherent(instance, cat, _rs_piece(cat))
        answer.method = 'rs'
    answer.micros = _micros(start)
    logger.debug('{} answered {} in {} us'.format(answer.method, answer.label, answer.micros))
    return answer
