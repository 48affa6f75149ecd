from __future__ import annotations
import itertools
import threading
import weakref
from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple
import numpy as np
from typeguard import typechecked
from subpower import settings
from subpower.algebra import Catalog, Congruence, FiniteAlgebra, HsEntry, \
     ProductContext, algebra_from_subuniverse, all_subuniverses, \
     is_isomorphic, quotient
from subpower.circuits import Circuit, compile_derived_tables, compile_term, \
     search_term
from subpower.errors import CapExceededError, IdentityError, \
     MethodUnavailableError, PreconditionError
from subpower.logger import getSubpowerLogger

__all__ = ["UnionFind", "generated_congruence", "principal_congruence",
           "congruence_lattice", "is_modular", "cover_of", "join_all",
           "meet_all", "meet_irreducibles", "commutator", "centralizer",
           "is_abelian", "SiProfile", "si_profile", "lift_congruence",
           "check_similarity", "hs_catalog", "check_residual_smallness",
           "find_difference_term", "AbelianGroupTable",
           "induced_abelian_group", "linearity_counterexample",
           "build_analysis_report"]

logger = getSubpowerLogger(name='congruence')

_lock = threading.RLock()
_caches : 'weakref.WeakKeyDictionary[FiniteAlgebra, Dict[Any,Any]]' = weakref.WeakKeyDictionary()


def _memo(alg : FiniteAlgebra, key : Any, compute : Any) -> Any:
    with _lock:
        cache = _caches.setdefault(alg, {})
        if key not in cache:
            cache[key] = compute()
        return cache[key]


class UnionFind:
    """Disjoint sets over 0..size-1 with path compression and union by rank."""

    def __init__(self, size : int) -> None:
        self.parent = list(range(size))
        self.rank = [0] * size

    def find(self, x : int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a : int, b : int) -> bool:
        """Merges the classes of a and b; False if they were already merged."""
        a, b = self.find(a), self.find(b)
        if a == b:
            return False
        if self.rank[a] < self.rank[b]:
            a, b = b, a
        self.parent[b] = a
        if self.rank[a] == self.rank[b]:
            self.rank[a] += 1
        return True

    def labels(self) -> List[int]:
        return [self.find(x) for x in range(len(self.parent))]


@typechecked
def generated_congruence(alg : FiniteAlgebra, pairs : Iterable[Tuple[int,int]]) -> Congruence:
    """
    The least congruence of `alg` containing the given pairs.

    Every pair merged into the union-find is pushed on a worklist; popping
    (a, b) merges f(..., a, ...) with f(..., b, ...) for every operation, every
    argument slot and every assignment of the other arguments. Only merging
    pairs are propagated, which is enough since they span the classes.

    Raises
    ------
    PreconditionError
        Raised if a pair mentions an element outside the universe
    """
    uf = UnionFind(alg.size)
    work : List[Tuple[int,int]] = []
    for a, b in pairs:
        if not (0 <= a < alg.size and 0 <= b < alg.size):
            raise PreconditionError('pair ({},{}) is outside {}'.format(a, b, alg.name))
        if uf.union(a, b):
            work.append((a, b))
    ops = [(alg.cubes[s], r) for s, r in alg.signature.symbols if r > 0]
    while work:
        a, b = work.pop()
        for cube, arity in ops:
            for i in range(arity):
                left = np.take(cube, a, axis=i).ravel()
                right = np.take(cube, b, axis=i).ravel()
                moved = left != right
                if not moved.any():
                    continue
                images = np.unique(np.stack([left[moved], right[moved]], axis=1), axis=0)
                for u, v in images.tolist():
                    if uf.union(u, v):
                        work.append((u, v))
    return Congruence.from_labels(alg.name, uf.labels())


def principal_congruence(alg : FiniteAlgebra, a : int, b : int) -> Congruence:
    return generated_congruence(alg, [(a, b)])


def join_all(alg : FiniteAlgebra, congruences : Iterable[Congruence]) -> Congruence:
    acc = Congruence.identity(alg.name, alg.size)
    for theta in congruences:
        acc = acc.join(theta)
    return acc


def meet_all(alg : FiniteAlgebra, congruences : Iterable[Congruence]) -> Congruence:
    acc = Congruence.full(alg.name, alg.size)
    for theta in congruences:
        acc = acc.meet(theta)
    return acc


def is_modular(lattice : Sequence[Congruence]) -> bool:
    """Checks x v (y ^ z) = (x v y) ^ z for all x <= z in the lattice."""
    for x, z in itertools.product(lattice, repeat=2):
        if not x.leq(z):
            continue
        for y in lattice:
            if x.join(y.meet(z)) != x.join(y).meet(z):
                return False
    return True


@typechecked
def congruence_lattice(alg : FiniteAlgebra, modular : bool=False) -> List[Congruence]:
    """
    All congruences of `alg`: the principal ones closed under joins.

    Parameters
    ----------
    alg : FiniteAlgebra
    modular : bool
        Also check the modular law (set when a cube term is configured)

    Returns
    -------
    List[Congruence]
        Finest first (most blocks first), ties in label order

    Raises
    ------
    PreconditionError
        Raised if `modular` is set and the lattice is not modular
    """
    def compute() -> List[Congruence]:
        principal = {principal_congruence(alg, a, b)
                     for a in range(alg.size) for b in range(a + 1, alg.size)}
        found = {Congruence.identity(alg.name, alg.size)} | principal
        queue = list(found)
        while queue:
            current = queue.pop()
            for theta in principal:
                joined = current.join(theta)
                if joined not in found:
                    found.add(joined)
                    queue.append(joined)
        return sorted(found, key=lambda c: (-c.block_count(), c.labels))

    lattice = _memo(alg, 'lattice', compute)
    if modular and not _memo(alg, 'modular', lambda: is_modular(lattice)):
        raise PreconditionError('congruence lattice of {} is not modular; the cube term must be wrong'.\
                                format(alg.name))
    return lattice


def cover_of(lattice : Sequence[Congruence], sigma : Congruence) -> Optional[Congruence]:
    """The meet of all congruences strictly above sigma (None for the full congruence)."""
    above = [tau for tau in lattice if sigma.leq(tau) and tau != sigma]
    if not above:
        return None
    acc = above[0]
    for tau in above[1:]:
        acc = acc.meet(tau)
    return acc


@typechecked
def meet_irreducibles(alg : FiniteAlgebra) -> List[Tuple[Congruence,Congruence]]:
    """
    The completely meet irreducible congruences other than the full one,
    each with its unique upper cover.

    Examples
    --------
    >>> [(str(s), str(c)) for s, c in meet_irreducibles(z4)]
    [('0|1|2|3', '02|13'), ('02|13', '0123')]
    """
    def compute() -> List[Tuple[Congruence,Congruence]]:
        lattice = congruence_lattice(alg)
        out = []
        for sigma in lattice:
            cover = cover_of(lattice, sigma)
            if cover is not None and cover != sigma:
                out.append((sigma, cover))
        return out
    return _memo(alg, 'irreducibles', compute)


def _pair_algebra(alg : FiniteAlgebra, alpha : Congruence) -> Tuple[FiniteAlgebra, Dict[Tuple[int,int],int]]:
    """A(alpha): alpha as a subalgebra of alg x alg, pairs numbered in sorted order."""
    pairs = sorted(alpha.pairs())
    index = {p: i for i, p in enumerate(pairs)}
    lookup = np.full(alg.size * alg.size, -1, dtype=np.int64)
    for (a, b), i in index.items():
        lookup[a * alg.size + b] = i
    first = np.asarray([p[0] for p in pairs], dtype=np.int64)
    second = np.asarray([p[1] for p in pairs], dtype=np.int64)
    k = len(pairs)
    tables = {}
    for symbol, arity in alg.signature.symbols:
        if arity == 0:
            c = int(alg.cubes[symbol])
            tables[symbol] = [index[(c, c)]]
            continue
        grid = np.indices((k,) * arity).reshape(arity, -1)
        left = alg.apply(symbol, *[first[g] for g in grid])
        right = alg.apply(symbol, *[second[g] for g in grid])
        tables[symbol] = lookup[left * alg.size + right].tolist()
    name = '{}({})'.format(alg.name, alpha)
    return FiniteAlgebra(name, k, alg.signature, tables), index


@typechecked
def commutator(alg : FiniteAlgebra, alpha : Congruence, beta : Congruence) -> Congruence:
    """
    The commutator [alpha, beta] of two congruences.

    Let Delta be the congruence of A(alpha) = {(a,b) : a alpha b} generated by
    the pairs ((x,x),(y,y)) with x beta y; then (a,b) is in [alpha, beta]
    exactly when (a,a) Delta (a,b). This agrees with the term-condition
    commutator in congruence modular varieties.

    Returns
    -------
    Congruence
    """
    def compute() -> Congruence:
        if alpha.is_identity() or beta.is_identity():
            return Congruence.identity(alg.name, alg.size)
        pair_alg, index = _pair_algebra(alg, alpha)
        gens = [(index[(x, x)], index[(y, y)]) for x, y in beta.pairs() if x < y]
        delta = generated_congruence(pair_alg, gens)
        related = [(a, b) for a, b in alpha.pairs()
                   if a < b and delta.related(index[(a, a)], index[(a, b)])]
        return generated_congruence(alg, related)
    return _memo(alg, ('commutator', alpha.labels, beta.labels), compute)


def is_abelian(alg : FiniteAlgebra, alpha : Optional[Congruence]=None) -> bool:
    """[alpha, alpha] = 0; alpha defaults to the full congruence."""
    alpha = alpha if alpha is not None else Congruence.full(alg.name, alg.size)
    return commutator(alg, alpha, alpha).is_identity()


@typechecked
def centralizer(alg : FiniteAlgebra, alpha : Congruence) -> Congruence:
    """
    The centralizer (0 : alpha), the largest gamma with [alpha, gamma] = 0.

    Raises
    ------
    PreconditionError
        Raised if the join of the centralizing congruences fails to
        centralize alpha, which only happens outside modular varieties
    """
    def compute() -> Congruence:
        lattice = congruence_lattice(alg)
        central = [g for g in lattice if commutator(alg, alpha, g).is_identity()]
        rho = join_all(alg, central)
        if not commutator(alg, alpha, rho).is_identity():
            raise PreconditionError('centralizer of {} in {} is not a congruence join; '
                                    'the algebra is not congruence modular'.format(alpha, alg.name))
        return rho
    return _memo(alg, ('centralizer', alpha.labels), compute)


@dataclass(frozen=True)
class SiProfile:
    """
    Subdirect irreducibility data of one algebra: the monolith mu, whether it
    is abelian, its centralizer rho = (0 : mu) and whether rho is abelian.
    Everything but is_si is None when the algebra is not SI.
    """
    is_si : bool
    monolith : Optional[Congruence] = None
    monolith_abelian : Optional[bool] = None
    centralizer : Optional[Congruence] = None
    centralizer_abelian : Optional[bool] = None

    def to_dict(self) -> Dict[str,Any]:
        return {'is_si': self.is_si,
                'monolith': str(self.monolith) if self.monolith is not None else None,
                'monolith_abelian': self.monolith_abelian,
                'centralizer': str(self.centralizer) if self.centralizer is not None else None,
                'centralizer_abelian': self.centralizer_abelian}


@typechecked
def si_profile(alg : FiniteAlgebra) -> SiProfile:
    """
    Decides whether `alg` is subdirectly irreducible (0 is completely meet
    irreducible, so 0 has a unique cover, the monolith) and profiles the
    monolith. One-element algebras are not SI.
    """
    def compute() -> SiProfile:
        if alg.size == 1:
            return SiProfile(False)
        lattice = congruence_lattice(alg)
        mu = cover_of(lattice, lattice[0])
        if mu is None or mu.is_identity():
            return SiProfile(False)
        rho = centralizer(alg, mu)
        return SiProfile(True, mu, is_abelian(alg, mu), rho, is_abelian(alg, rho))
    return _memo(alg, 'si', compute)


def lift_congruence(alg : FiniteAlgebra, natural : Sequence[int], theta : Congruence) -> Congruence:
    """The preimage in `alg` of a congruence of a quotient, given the natural map."""
    return Congruence.from_labels(alg.name, [theta.labels[natural[x]] for x in range(alg.size)])


def _similar(B : FiniteAlgebra, C : FiniteAlgebra) -> bool:
    if is_isomorphic(B, C):
        return True
    context = ProductContext([B, C])
    for subuniverse in all_subuniverses(None, context):
        if {t[0] for t in subuniverse} != set(range(B.size)) or \
           {t[1] for t in subuniverse} != set(range(C.size)):
            continue
        E = algebra_from_subuniverse('E', sorted(subuniverse), context)
        irr = meet_irreducibles(E)

        def onto(target : FiniteAlgebra) -> List[Tuple[Congruence,Congruence]]:
            return [(s, c) for s, c in irr if s.block_count() == target.size and
                    is_isomorphic(quotient(E, s)[0], target)]

        betas, gammas = onto(B), onto(C)
        if not betas or not gammas:
            continue
        lattice = congruence_lattice(E)
        for (beta, beta_plus), (gamma, gamma_plus) in itertools.product(betas, gammas):
            for eps in lattice:
                delta = beta.meet(eps)
                if eps.meet(gamma) == delta and beta.join(eps) == beta_plus and \
                   eps.join(gamma) == gamma_plus:
                    logger.debug('{} ~ {} witnessed by a subdirect subalgebra of size {}'.\
                                 format(B.name, C.name, E.size))
                    return True
    return False


@typechecked
def check_similarity(B : FiniteAlgebra, C : FiniteAlgebra, cat : Optional[Catalog]=None) -> bool:
    """
    Decides similarity of two subdirectly irreducible algebras.

    B and C are similar when some subdirect subalgebra E of B x C has
    congruences beta, gamma, delta, epsilon with E/beta = B, E/gamma = C and
    beta ^ epsilon = delta = epsilon ^ gamma, beta v epsilon = beta+,
    epsilon v gamma = gamma+ (beta+, gamma+ the upper covers). All
    subuniverses of B x C are enumerated.

    Parameters
    ----------
    B, C : FiniteAlgebra
        Subdirectly irreducible algebras of one signature
    cat : Catalog, optional
        Memoizes the answer per unordered pair of names

    Raises
    ------
    PreconditionError
        Raised if B or C is not subdirectly irreducible
    CapExceededError
        Raised if B x C has too many subuniverses (similarity undecided)
    """
    for alg in (B, C):
        if not si_profile(alg).is_si:
            raise PreconditionError('{} is not subdirectly irreducible'.format(alg.name))
    if cat is None:
        return _similar(B, C)
    return cat.memo(('similar', frozenset((B.name, C.name))), lambda: _similar(B, C))


def _copy_catalog(cat : Catalog, algebras : Sequence[FiniteAlgebra]) -> Catalog:
    out = Catalog(cat.signature, algebras, cat.raw_terms)
    out.base_names = list(cat.base_names)
    out.d, out.e = cat.d, cat.e
    out.cube_term = cat.cube_term
    out.difference_term = cat.difference_term
    out.circuits = dict(cat.circuits)
    out.derived_tables = {k: dict(v) for k, v in cat.derived_tables.items()}
    out.hs = dict(cat.hs)
    return out


@typechecked
def hs_catalog(base : Catalog) -> Catalog:
    """
    Extends a catalog by the quotients of subalgebras of its members (HS K),
    each kept once up to isomorphism.

    New members are named 'parent[subuniverse]' or
    'parent[subuniverse]/congruence' and carry an HsEntry recording the
    subuniverse of the parent and the congruence of the subalgebra they come
    from. Base members come first and are never replaced.

    Returns
    -------
    Catalog
        A new catalog sharing the cube term configuration of `base`;
        memoized on `base`

    Raises
    ------
    CapExceededError
        Raised if a subuniverse enumeration exceeds settings.subuniverseCap
    """
    def compute() -> Catalog:
        members : List[FiniteAlgebra] = [base[name] for name in base.base_names]
        entries : Dict[str,HsEntry] = {}
        for parent in list(members):
            for sub in sorted(all_subuniverses(parent), key=lambda s: (-len(s), sorted(s))):
                elements = tuple(sorted(sub))
                sub_name = '{}[{}]'.format(parent.name, ','.join(str(x) for x in elements))
                context = ProductContext([parent])
                sub_alg = algebra_from_subuniverse(sub_name, [(x,) for x in elements], context)
                for theta in congruence_lattice(sub_alg):
                    if len(elements) == parent.size and theta.is_identity():
                        continue
                    name = sub_name if theta.is_identity() else '{}/{}'.format(sub_name, theta)
                    member, natural = quotient(sub_alg, theta, name=name)
                    if any(m.size == member.size and is_isomorphic(m, member) for m in members):
                        continue
                    members.append(member)
                    entries[name] = HsEntry(name, parent.name, elements, theta, tuple(natural))
        out = _copy_catalog(base, members)
        out.hs.update(entries)
        compile_derived_tables(out, list(entries))
        logger.debug('HS closure of {} has {} members'.format(base.base_names, len(members)))
        return out
    return base.memo('hs_catalog', compute)


@typechecked
def check_residual_smallness(cat : Catalog) -> Tuple[bool, Optional[str]]:
    """
    Checks that every subdirectly irreducible member of HS K with an abelian
    monolith mu has an abelian centralizer (0 : mu), the criterion for
    residual smallness of the variety generated by a cube-term catalog.

    Returns
    -------
    Tuple[bool, Optional[str]]
        The verdict and the name of the first offending member
    """
    def compute() -> Tuple[bool, Optional[str]]:
        hs = hs_catalog(cat)
        for name, alg in hs.algebras.items():
            profile = si_profile(alg)
            if profile.is_si and profile.monolith_abelian and not profile.centralizer_abelian:
                logger.debug('{} has abelian monolith with nonabelian centralizer'.format(name))
                return False, name
        return True, None
    return cat.memo('residually_small', compute)


def _difference_constraints(cat : Catalog) -> Tuple[List[FiniteAlgebra], np.ndarray, np.ndarray]:
    columns : Dict[Tuple[str,int,int,int],int] = {}
    for alg in cat.algebras.values():
        for x in range(alg.size):
            for y in range(alg.size):
                columns.setdefault((alg.name, x, x, y), y)
        for alpha in congruence_lattice(alg):
            if alpha.is_identity() or not is_abelian(alg, alpha):
                continue
            for x, y in alpha.pairs():
                columns.setdefault((alg.name, x, y, y), x)
    keys = list(columns)
    algebras = [cat[k[0]] for k in keys]
    generators = np.asarray([[k[1 + v] for k in keys] for v in range(3)], dtype=np.int64)
    target = np.asarray([columns[k] for k in keys], dtype=np.int64)
    return algebras, generators, target


def _is_difference_term(cat : Catalog, circuit : Circuit) -> bool:
    algebras, generators, target = _difference_constraints(cat)
    context = ProductContext(algebras)
    value = circuit.evaluate(context, list(generators))
    return bool(np.array_equal(np.broadcast_to(value, target.shape), target))


@typechecked
def find_difference_term(cat : Catalog) -> Circuit:
    """
    A ternary term d with d(x,x,y) = y on every catalog algebra and
    d(x,y,y) = x whenever (x,y) lies in an abelian congruence.

    A term recorded in the catalog is verified and used; otherwise the
    Mal'tsev candidate p is tried, then a closure search over the constraint
    columns (one coordinate per algebra and constrained triple).

    Raises
    ------
    MethodUnavailableError
        Raised if no term is found within settings.termSearchCap; supply
        "difference_term" in the algebra file in that case
    IdentityError
        Raised if the recorded term fails the identities
    """
    def compute() -> Circuit:
        if cat.difference_term is not None:
            if not _is_difference_term(cat, cat.difference_term):
                raise IdentityError('the catalog difference_term fails d(x,x,y)=y or d(x,y,y)=x')
            return cat.difference_term
        candidate = cat.circuits.get('p')
        if candidate is not None and _is_difference_term(cat, candidate):
            logger.debug('p is a difference term')
            return candidate
        algebras, generators, target = _difference_constraints(cat)
        try:
            found = search_term(ProductContext(algebras), generators, target,
                                cap=settings.termSearchCap)
        except CapExceededError as e:
            raise MethodUnavailableError('no difference term found within the search cap ({}); '
                                         'add "difference_term" to the algebra file'.format(e))
        if found is None:
            raise MethodUnavailableError('the catalog has no difference term; '
                                         'add "difference_term" to the algebra file')
        return found
    return cat.memo('difference_term', compute)


@dataclass
class AbelianGroupTable:
    """
    The abelian group (o/alpha; +_o, -_o, o) induced by a difference term on
    a block of an abelian congruence. `elements` lists the block in
    increasing order; `add` and `neg` are indexed by positions in it.
    """
    elements : Tuple[int, ...]
    zero : int
    add : np.ndarray
    neg : np.ndarray

    def position(self, x : int) -> int:
        return self.elements.index(x)

    def plus(self, x : int, y : int) -> int:
        return self.elements[int(self.add[self.position(x), self.position(y)])]

    def minus(self, x : int) -> int:
        return self.elements[int(self.neg[self.position(x)])]

    def __len__(self) -> int:
        return len(self.elements)


@typechecked
def induced_abelian_group(alg : FiniteAlgebra, alpha : Congruence, o : int,
                          difference : Circuit) -> AbelianGroupTable:
    """
    Tabulates x +_o y = d(x,o,y) and -_o x = d(o,x,o) on the block of o.

    Raises
    ------
    IdentityError
        Raised if the tables leave the block or fail a group axiom, which
        means d is not a difference term or alpha is not abelian
    """
    table = compile_term(alg, difference)
    block = tuple(alpha.block_of(o))
    pos = {x: i for i, x in enumerate(block)}
    k = len(block)
    add = np.zeros((k, k), dtype=np.int64)
    neg = np.zeros(k, dtype=np.int64)
    try:
        for x in block:
            neg[pos[x]] = pos[int(table[o, x, o])]
            for y in block:
                add[pos[x], pos[y]] = pos[int(table[x, o, y])]
    except KeyError:
        raise IdentityError('difference term leaves the block of {} in {}'.format(o, alg.name))
    z = pos[o]
    idx = np.arange(k)
    if not (np.array_equal(add[z], idx) and np.array_equal(add.T, add) and
            np.all(add[idx, neg] == z) and
            np.array_equal(add[add[:, :, None], idx[None, None, :]],
                           add[idx[:, None, None], add[None, :, :]])):
        raise IdentityError('induced operation on the block of {} in {} is not an abelian group'.\
                            format(o, alg.name))
    return AbelianGroupTable(block, o, add, neg)


def linearity_counterexample(alg : FiniteAlgebra, alpha : Congruence, difference : Circuit,
                             g : Circuit, o : Sequence[int]) -> Optional[Tuple[int,...]]:
    """
    Looks for arguments a_i in o_i/alpha violating
    g(a_1,...,a_k) = g(a_1,o_2,...) + ... + g(...,o_{k-1},a_k) - (k-1) g(o),
    the sum taken in the group induced at g(o). Returns the first violating
    argument tuple or None.
    """
    dt = compile_term(alg, difference)
    gt = compile_term(alg, g)
    k = g.input_count
    base = tuple(int(v) for v in o)
    zero = int(gt[base])
    blocks = [alpha.block_of(v) for v in base]
    for args in itertools.product(*blocks):
        acc = None
        for i in range(k):
            part = int(gt[base[:i] + (args[i],) + base[i + 1:]])
            acc = part if acc is None else int(dt[acc, zero, part])
        if acc is None:
            acc = zero
        if acc != int(gt[tuple(args)]):
            return tuple(args)
    return None


def _lattice_edges(lattice : Sequence[Congruence]) -> List[List[int]]:
    edges = []
    for i, x in enumerate(lattice):
        for j, y in enumerate(lattice):
            if i == j or not x.leq(y) or x == y:
                continue
            if not any(x.leq(z) and z.leq(y) and z != x and z != y for z in lattice):
                edges.append([i, j])
    return edges


@typechecked
def build_analysis_report(cat : Catalog, names : Optional[Sequence[str]]=None,
                          similarity : bool=True) -> Dict[str,Any]:
    """
    The `analyze` report: per algebra its congruence lattice (listed finest
    first, with covering edges as index pairs), the meet irreducibles with
    their covers and the SI profile; then the members of HS K, the pairwise
    similarity matrix of its subdirectly irreducible members and the
    residual-smallness verdict.
    """
    modular = cat.d is not None
    report : Dict[str,Any] = {'d': cat.d, 'e': cat.e, 'algebras': {}}
    for name in (names or cat.base_names):
        alg = cat[name]
        lattice = congruence_lattice(alg, modular=modular)
        report['algebras'][name] = {
            'size': alg.size,
            'congruence_count': len(lattice),
            'congruences': [str(c) for c in lattice],
            'lattice_edges': _lattice_edges(lattice),
            'irreducibles': [{'congruence': str(s), 'cover': str(c)} for s, c in meet_irreducibles(alg)],
            'si': si_profile(alg).to_dict(),
        }
    hs = hs_catalog(cat)
    report['hs_members'] = hs.names()
    sis = [name for name in hs.names() if si_profile(hs[name]).is_si]
    entry : Dict[str,Any] = {'members': sis}
    if similarity:
        entry['matrix'] = [[check_similarity(hs[a], hs[b], hs) for b in sis] for a in sis]
    report['similarity'] = entry
    small, offender = check_residual_smallness(cat)
    report['residually_small'] = small
    report['offender'] = offender
    return report
