from __future__ import annotations
import itertools
import json
from dataclasses import dataclass, field
from math import comb
from typing import Any, Callable, Dict, Iterator, List, Mapping, Optional, \
     Sequence, Set, Tuple, Union
import numpy as np
from typeguard import typechecked
from subpower import settings
from subpower.algebra import ELEMENT_DTYPE, Catalog, Closure, Congruence, \
     ProductContext, as_rows, closure_steps, subalgebra_closure
from subpower.circuits import Circuit, CircuitBuilder, build_tn, \
     expand_to_signature, tn_inputs
from subpower.errors import CatalogError, IdentityError, PreconditionError, \
     ProvenanceError
from subpower.logger import getSubpowerLogger

__all__ = ["ProvenanceDag", "PartialStandardizedRep", "Representability",
           "WitnessTrace", "ForkWitnessOracle", "cube_parameter",
           "lift_closure", "forks", "derived_forks", "derived_value",
           "weak_transitivity_witness", "transfer_witness",
           "is_representable", "check_representable", "is_completely_representable",
           "local_rep", "saturation_generators", "fork_propagation",
           "weak_transitivity_closure", "prepare_compact_rep",
           "need_fork_witnesses", "compact_rep_direct", "compact_rep_via_smp",
           "smp_via_compact_rep", "brute_force_oracle", "extract_witness_circuit",
           "validate_standardized", "compactness_bound", "rep_to_dict",
           "rep_from_dict", "save_rep", "load_rep"]

logger = getSubpowerLogger(name='representations')

# (coordinate, gamma, delta), coordinates 0-based
ForkKey = Tuple[int, int, int]
LocalKey = Tuple[Tuple[int, ...], Tuple[int, ...]]

ORACLE_BATCH = 32
# int64 entries one layered P evaluation may hold at once
EVAL_BLOCK = 1 << 23


class ProvenanceDag:
    """
    Hash-consed derivations of tuples from the generators.

    Nodes are ('gen', j), ('apply', symbol, children) with symbol a basic
    operation or one of the derived 'P', 'p', and ('tn', m, x, y, z, ws), an
    application of the circuit t_m. They are only turned into a circuit over
    the basic signature when a witness is requested.
    """

    def __init__(self, generator_count : int) -> None:
        self.generator_count = generator_count
        self.nodes : List[Tuple[Any, ...]] = []
        self._ids : Dict[Tuple[Any, ...],int] = {}

    def _intern(self, node : Tuple[Any, ...]) -> int:
        found = self._ids.get(node)
        if found is None:
            found = len(self.nodes)
            self.nodes.append(node)
            self._ids[node] = found
        return found

    def generator(self, j : int) -> int:
        return self._intern(('gen', j))

    def apply(self, symbol : str, *children : Optional[int]) -> Optional[int]:
        if any(c is None for c in children):
            return None
        return self._intern(('apply', symbol, tuple(children)))

    def tn(self, m : int, x : Optional[int], y : Optional[int], z : Optional[int],
           ws : Sequence[Optional[int]]) -> Optional[int]:
        if x is None or y is None or z is None or any(w is None for w in ws):
            return None
        return self._intern(('tn', m, x, y, z, tuple(ws)))

    def __len__(self) -> int:
        return len(self.nodes)

    @staticmethod
    def _children(node : Tuple[Any, ...]) -> Tuple[int, ...]:
        if node[0] == 'apply':
            return node[2]
        if node[0] == 'tn':
            return (node[2], node[3], node[4]) + node[5]
        return ()

    def to_circuit(self, root : int, d : int, e : int=1) -> Circuit:
        """
        The circuit of one node over the generators, using the symbol 'P' for
        the cube term (t_m applications are spliced in as P-circuits).
        """
        builder = CircuitBuilder(self.generator_count)
        gate : Dict[int,int] = {}
        stack = [root]
        while stack:
            current = stack[-1]
            if current in gate:
                stack.pop()
                continue
            node = self.nodes[current]
            pending = [c for c in self._children(node) if c not in gate]
            if pending:
                stack.extend(pending)
                continue
            stack.pop()
            if node[0] == 'gen':
                gate[current] = builder.input(node[1])
            elif node[0] == 'apply' and node[1] == 'p':
                x, u, y = (gate[c] for c in node[2])
                gate[current] = builder.apply('P', x, u, y, x, *([y] * (d - 1)))
            elif node[0] == 'apply':
                gate[current] = builder.apply(node[1], *[gate[c] for c in node[2]])
            else:
                _, m, x, y, z, ws = node
                operands = [gate[x], gate[y], gate[z]] + [gate[w] for w in ws]
                gate[current] = builder.splice(build_tn(m, d, e), operands)[0]
        return builder.build([gate[root]])


def cube_parameter(context : ProductContext) -> int:
    """d, read off the arity of the compiled cube term of the context."""
    if not context.has_symbol('P'):
        raise PreconditionError('the product has no compiled cube term; configure the catalog first')
    return context.arity('P') - 3


class PartialStandardizedRep:
    """
    A subset R of a product with designations.

    `local_index` maps (I, proj) to the tuple designated to witness proj on
    the (d-1)-set I; `fork_index` maps (m, gamma, delta) to the pair (u, u^)
    designated to witness that fork in coordinate m: u and u^ agree before m,
    u_m = gamma, u^_m = delta. Tuples are stored once, so one tuple can carry
    several designations, and every stored tuple carries at least one.

    Attributes
    ----------
    context : ProductContext
    d : int
    e : int
    generators : Optional[np.ndarray]
        The generator rows, kept when provenance is recorded
    dag : Optional[ProvenanceDag]
    provenance : List[Optional[int]]
        Per tuple, its node in `dag` (None when not derivable)
    """

    def __init__(self, context : ProductContext, d : Optional[int]=None, e : int=1,
                 generators : Optional[np.ndarray]=None) -> None:
        self.context = context
        self.n = context.n
        self.d = d if d is not None else cube_parameter(context)
        self.e = e
        self._buf = np.zeros((64, self.n), dtype=ELEMENT_DTYPE)
        self._size = 0
        self._ids : Dict[bytes,int] = {}
        self.local_index : Dict[LocalKey,int] = {}
        self.fork_index : Dict[ForkKey,Tuple[int,int]] = {}
        self.generators = generators
        self.dag = ProvenanceDag(len(generators)) if generators is not None else None
        self.provenance : List[Optional[int]] = []

    @property
    def tuples(self) -> np.ndarray:
        return self._buf[:self._size]

    def __len__(self) -> int:
        return self._size

    def row(self, i : int) -> np.ndarray:
        return self._buf[i]

    def add(self, row : Any, node : Optional[int]=None) -> int:
        row = np.ascontiguousarray(row, dtype=ELEMENT_DTYPE)
        key = row.tobytes()
        found = self._ids.get(key)
        if found is not None:
            if self.provenance[found] is None and node is not None:
                self.provenance[found] = node
            return found
        if self._size == self._buf.shape[0]:
            grown = np.zeros((2 * self._size, self.n), dtype=ELEMENT_DTYPE)
            grown[:self._size] = self._buf[:self._size]
            self._buf = grown
        self._buf[self._size] = row
        self._ids[key] = self._size
        self.provenance.append(node)
        self._size += 1
        return self._size - 1

    def local_witness(self, I : Tuple[int, ...], proj : Tuple[int, ...]) -> Optional[int]:
        return self.local_index.get((I, proj))

    def designate_local(self, I : Tuple[int, ...], proj : Tuple[int, ...], row : Any,
                        node : Optional[int]=None) -> bool:
        """Designates row for proj on I unless a witness exists already."""
        key = (tuple(I), tuple(proj))
        if key in self.local_index:
            return False
        self.local_index[key] = self.add(row, node)
        return True

    def fork_witness(self, key : ForkKey) -> Optional[Tuple[int,int]]:
        return self.fork_index.get(key)

    def designate_fork(self, key : ForkKey, u : Any, uhat : Any, u_node : Optional[int]=None,
                       uhat_node : Optional[int]=None) -> Tuple[int,int]:
        """Designates (u, u^) for the fork unless a pair exists already; returns the pair."""
        found = self.fork_index.get(key)
        if found is not None:
            return found
        pair = (self.add(u, u_node), self.add(uhat, uhat_node))
        self.fork_index[key] = pair
        return pair

    def forks_at(self, m : int) -> Dict[Tuple[int,int],Tuple[int,int]]:
        return {(g, dl): pair for (c, g, dl), pair in self.fork_index.items() if c == m}

    def __repr__(self) -> str:
        return 'PartialStandardizedRep(n={}, d={}, tuples={}, local={}, forks={})'.format(
            self.n, self.d, len(self), len(self.local_index), len(self.fork_index))


@dataclass
class Representability:
    """
    Outcome of the representability check for one tuple b.

    `derived_added` (S') and `plain_added` (S) list the fork keys whose
    witnesses were added (or, in a dry run, would be added); `answer` is
    True iff S' is empty and `node` is the provenance of b as an application
    of T_n when it was recorded.
    """
    answer : bool = True
    derived_added : List[ForkKey] = field(default_factory=list)
    plain_added : List[ForkKey] = field(default_factory=list)
    node : Optional[int] = None

    @property
    def complete(self) -> bool:
        return self.answer and not self.plain_added


@dataclass
class WitnessTrace:
    circuit : Circuit
    p_gates : int
    gates : int


class _PEvaluator:
    """
    Evaluates P-circuits on batches of tuples restricted to a coordinate
    suffix, one depth layer of gates per table gather.
    """

    def __init__(self, context : ProductContext) -> None:
        arity, table = context.table('P')
        self.arity = arity
        self.table = table.astype(np.int64)
        self.amax = context.amax
        self.alg_ids = context.alg_ids
        self.weights = [self.amax ** (arity - 1 - j) for j in range(arity)]

    def run(self, circuit : Circuit, inputs : Sequence[np.ndarray], start : int) -> np.ndarray:
        first = np.asarray(inputs[0])
        width = circuit.input_count + len(circuit.gates)
        step = max(1, EVAL_BLOCK // max(1, width * first.shape[1]))
        if first.shape[0] > step:
            return np.concatenate([self.run(circuit, [x[s:s + step] for x in inputs], start)
                                   for s in range(0, first.shape[0], step)])
        base = self.alg_ids[start:] * (self.amax ** self.arity)
        values = np.empty((width,) + first.shape, dtype=np.int64)
        for i, x in enumerate(inputs):
            values[i] = x
        w = self.weights
        for _, ids, operands in circuit.layers():
            idx = base + values[operands[:, 0]] * w[0]
            for j in range(1, self.arity):
                idx += values[operands[:, j]] * w[j]
            values[ids] = self.table[idx]
        return values[circuit.outputs[0]]


def derived_value(context : ProductContext, coord : int, delta : Any, gamma : Any, e : int=1) -> Any:
    """delta^(gamma^e) in the factor at `coord` (x -> x^gamma applied e times)."""
    coords = np.asarray([coord])
    value = np.asarray(delta, dtype=np.int64)
    for _ in range(e):
        value = context.apply('xy', [value, gamma], coords=coords).astype(np.int64)
    return value


def _derived_scalar(context : ProductContext, coord : int, delta : Any, gamma : Any) -> int:
    return int(np.ravel(derived_value(context, coord, delta, gamma))[0])


def _apply_p(context : ProductContext, x : Any, u : Any, y : Any) -> np.ndarray:
    return context.apply('p', [x, u, y]).astype(np.int64)


def _reconstruct(rep : PartialStandardizedRep, rows : Any,
                 nodes : Optional[Sequence[Optional[int]]]=None,
                 dry_run : bool=False, trace : bool=False) -> List[Representability]:
    """
    The representability check run on a batch of tuples, one coordinate level
    at a time.

    For every level m = d-1..n-1 (0-based) and every row b: beta is the
    value of the partial reconstruction b' at m and gamma = b_m; the derived
    fork (gamma, beta^gamma) needs a designated pair (u, u^), else (b, p(b',b,b))
    is designated; the plain fork (gamma, beta) needs one, else (b, b') is
    designated; then b' := t_{m+1}(b', u^, u, local witnesses of b) on the
    coordinates >= m, the prefix being b's. Rows are handled in order within
    a level and keys are level specific, so this equals running the rows one
    after the other. A dry run shares nothing between rows and never
    mutates `rep`; with `trace` it still records the provenance of rows
    whose answer is YES.
    """
    context = rep.context
    n, d, e = rep.n, rep.d, rep.e
    rows = np.asarray(rows, dtype=np.int64)
    if rows.ndim == 1:
        rows = rows.reshape(1, -1)
    k = len(rows)
    results = [Representability() for _ in range(k)]
    if k == 0:
        return results
    subsets = tn_inputs(n, d)
    position = {I: i for i, I in enumerate(subsets)}
    witnesses = np.empty((k, len(subsets)), dtype=np.int64)
    for si, I in enumerate(subsets):
        for r, proj in enumerate(rows[:, list(I)].tolist()):
            t = rep.local_index.get((I, tuple(proj)))
            if t is None:
                raise PreconditionError('no designated local witness for {} on coordinates {}'.\
                                        format(tuple(proj), I))
            witnesses[r, si] = t
    local_rows = rep.tuples.astype(np.int64)
    first = position[tuple(range(d - 1))]
    prev = local_rows[witnesses[:, first]].copy()
    record = rep.dag is not None and (trace or not dry_run)
    prev_nodes : List[Optional[int]] = [rep.provenance[t] for t in witnesses[:, first]] if record else []
    virtual : List[Dict[ForkKey,Tuple[np.ndarray,np.ndarray]]] = [dict() for _ in range(k)] if dry_run else []
    evaluator = _PEvaluator(context)

    for c in range(d - 1, n):
        gamma = rows[:, c]
        beta = prev[:, c]
        derived = derived_value(context, c, beta, gamma, e)
        U = np.empty((k, n - c), dtype=np.int64)
        UH = np.empty((k, n - c), dtype=np.int64)
        u_nodes : List[Optional[int]] = []
        uh_nodes : List[Optional[int]] = []
        for r in range(k):
            b_node = nodes[r] if (record and nodes is not None) else None
            key = (c, int(gamma[r]), int(derived[r]))
            pair = rep.fork_index.get(key)
            local = virtual[r].get(key) if dry_run else None
            if pair is None and local is None:
                results[r].answer = False
                results[r].derived_added.append(key)
                crow = _apply_p(context, prev[r], rows[r], rows[r])
                if dry_run:
                    local = (rows[r], crow)
                    virtual[r][key] = local
                else:
                    if record and b_node is None:
                        raise ProvenanceError('a witness for fork {} is needed but the tuple has no provenance'.\
                                              format(key))
                    c_node = rep.dag.apply('p', prev_nodes[r], b_node, b_node) if record else None
                    pair = rep.designate_fork(key, rows[r], crow, b_node, c_node)
            if pair is not None:
                U[r] = rep.row(pair[0])[c:]
                UH[r] = rep.row(pair[1])[c:]
                if record:
                    u_nodes.append(rep.provenance[pair[0]])
                    uh_nodes.append(rep.provenance[pair[1]])
            else:
                U[r] = local[0][c:]
                UH[r] = local[1][c:]
                if record:
                    u_nodes.append(None)
                    uh_nodes.append(None)
            key2 = (c, int(gamma[r]), int(beta[r]))
            if rep.fork_index.get(key2) is None and not (dry_run and key2 in virtual[r]):
                results[r].plain_added.append(key2)
                if dry_run:
                    virtual[r][key2] = (rows[r], prev[r])
                else:
                    rep.designate_fork(key2, rows[r], prev[r], b_node, prev_nodes[r] if record else None)
        inputs = [prev[:, c:], UH, U] + [local_rows[witnesses[:, position[I]]][:, c:]
                                        for I in tn_inputs(c + 1, d)]
        new = evaluator.run(build_tn(c + 1, d, e), inputs, c)
        if not np.array_equal(new[:, 0], gamma):
            raise IdentityError('reconstruction left coordinate {} unequal to the target; '
                                'the cube term or the designations are inconsistent'.format(c))
        if record:
            level_ws = [position[I] for I in tn_inputs(c + 1, d)]
            prev_nodes = [rep.dag.tn(c + 1, prev_nodes[r], uh_nodes[r], u_nodes[r],
                                     [rep.provenance[witnesses[r, s]] for s in level_ws])
                          for r in range(k)]
        prev = np.concatenate([rows[:, :c], new], axis=1)
    if record:
        for r in range(k):
            results[r].node = prev_nodes[r]
    return results


@typechecked
def is_representable(b : Any, rep : PartialStandardizedRep, node : Optional[int]=None,
                     dry_run : bool=False, trace : bool=False) -> Representability:
    """
    Decides whether b is representable by a partial standardized
    representation, adding the missing fork witnesses.

    Parameters
    ----------
    b : array_like
        A tuple of the product
    rep : PartialStandardizedRep
        Must hold designated local witnesses for every b|_I
    node : int, optional
        Provenance of b, required when rep records provenance and witnesses
        have to be added
    dry_run : bool
        Only report what would be added
    trace : bool
        Record the provenance of b even in a dry run (for witness circuits)

    Returns
    -------
    Representability
        answer True iff no derived-fork witness was missing; b is
        representable by R + S' and completely representable by R + S' + S

    Raises
    ------
    PreconditionError
        Raised if some b|_I has no designated local witness
    """
    return _reconstruct(rep, [b], [node], dry_run=dry_run, trace=trace)[0]


def check_representable(rows : Any, rep : PartialStandardizedRep,
                        nodes : Optional[Sequence[Optional[int]]]=None,
                        dry_run : bool=False) -> List[Representability]:
    """is_representable over a batch, rows taken in order."""
    return _reconstruct(rep, rows, nodes, dry_run=dry_run)


def is_completely_representable(rows : Any, rep : PartialStandardizedRep) -> np.ndarray:
    """Dry-run check: per row, whether no fork witness at all would be added."""
    return np.asarray([r.complete for r in _reconstruct(rep, rows, dry_run=True)], dtype=bool)


def lift_closure(closure : Closure, rows : np.ndarray, context : ProductContext) -> np.ndarray:
    """
    Replays the derivations of a closure of projected generators on the full
    generator rows, wave by wave, giving for each closure element a full
    tuple of the generated subalgebra that projects onto it.
    """
    size = len(closure)
    full = np.zeros((size, context.n), dtype=ELEMENT_DTYPE)
    bounds = [0] + list(closure.waves) + [size]
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        groups : Dict[Optional[str],List[int]] = {}
        for i in range(lo, hi):
            groups.setdefault(closure.parents[i][0], []).append(i)
        for symbol, members in groups.items():
            if symbol is None:
                full[members] = rows[[closure.parents[i][1][0] for i in members]]
                continue
            args = np.asarray([closure.parents[i][1] for i in members], dtype=np.int64)
            if args.size == 0:
                full[members] = context.apply(symbol, [])
                continue
            full[members] = context.apply(symbol, [full[args[:, j]] for j in range(args.shape[1])])
    return full


def _closure_nodes(closure : Closure, dag : ProvenanceDag) -> List[Optional[int]]:
    nodes : List[Optional[int]] = []
    for symbol, args in closure.parents:
        if symbol is None:
            nodes.append(dag.generator(args[0]))
        else:
            nodes.append(dag.apply(symbol, *[nodes[a] for a in args]))
    return nodes


def _theta_classes(theta : Optional[Sequence[Any]], n : int) -> Optional[List[Dict[int,Tuple[int,...]]]]:
    """Per coordinate: element -> its class, from Congruences or lists of blocks (None = identity)."""
    if theta is None:
        return None
    if len(theta) != n:
        raise PreconditionError('need one congruence per coordinate, got {} for {}'.format(len(theta), n))
    out : List[Dict[int,Tuple[int,...]]] = []
    for t in theta:
        classes : Dict[int,Tuple[int,...]] = {}
        blocks = t.blocks() if isinstance(t, Congruence) else (t or [])
        for block in blocks:
            block = tuple(sorted(int(x) for x in block))
            for x in block:
                classes[x] = block
        out.append(classes)
    return out


@typechecked
def local_rep(gens : Any, context : ProductContext, theta : Optional[Sequence[Any]]=None,
              provenance : bool=False) -> PartialStandardizedRep:
    """
    A full set of designated local witnesses for B = <gens>, or for its
    theta-saturation B[theta].

    For every (d-1)-set I (lexicographic order) the projection B|_I is
    generated from the projected generators; each new element gets as
    witness the full tuple obtained by replaying its derivation on the
    generators. With theta, every tuple d that is theta-related to a newly
    designated projection on I gets the witness equal to d on I and to that
    witness elsewhere.

    Parameters
    ----------
    gens : array_like
        Generators a_1..a_k
    context : ProductContext
        n >= d factors with a compiled cube term
    theta : Sequence, optional
        Per coordinate a Congruence, a list of blocks, or None for equality
    provenance : bool
        Record derivations so witness circuits can be extracted later

    Raises
    ------
    PreconditionError
        Raised if n < d
    """
    d = cube_parameter(context)
    rows = as_rows(gens, context)
    n = context.n
    if n < d:
        raise PreconditionError('representations need n >= d, got n={}, d={}'.format(n, d))
    rep = PartialStandardizedRep(context, d, generators=rows if provenance else None)
    classes = _theta_classes(theta, n)
    for I in tn_inputs(n, d):
        closure = subalgebra_closure(rows[:, list(I)], context.restrict(I))
        full = lift_closure(closure, rows, context)
        nodes = _closure_nodes(closure, rep.dag) if rep.dag is not None else [None] * len(closure)
        for idx, proj in enumerate(closure.elements.tolist()):
            proj = tuple(proj)
            if not rep.designate_local(I, proj, full[idx], nodes[idx]) or classes is None:
                continue
            for dbar in itertools.product(*[classes[i].get(v, (v,)) for i, v in zip(I, proj)]):
                if dbar == proj:
                    continue
                shifted = full[idx].copy()
                shifted[list(I)] = dbar
                rep.designate_local(I, dbar, shifted)
    logger.debug('local witnesses: {} designations on {} tuples'.format(len(rep.local_index), len(rep)))
    return rep


@typechecked
def saturation_generators(gens : Any, context : ProductContext, theta : Sequence[Any]) -> np.ndarray:
    """
    G + Lambda + Phi, a generating set of the theta-saturation B[theta] of
    B = <G>.

    Lambda is the tuple set of the theta-shifted local witnesses; Phi holds,
    for every coordinate i and every beta in B|_i with its witness b_(i,beta),
    the copies of b_(i,beta) with coordinate i replaced by each gamma
    theta_i-related to beta.

    Raises
    ------
    PreconditionError
        Raised if n < d (generate B[theta] directly in that case)
    """
    rows = as_rows(gens, context)
    n = context.n
    lam = local_rep(rows, context, theta).tuples
    classes = _theta_classes(theta, n)
    phi = []
    for i in range(n):
        closure = subalgebra_closure(rows[:, [i]], context.restrict([i]))
        full = lift_closure(closure, rows, context)
        for idx, (beta,) in enumerate(closure.elements.tolist()):
            for gamma in classes[i].get(beta, (beta,)):
                t = full[idx].copy()
                t[i] = gamma
                phi.append(t)
    stacked = np.concatenate([rows, lam, np.asarray(phi, dtype=ELEMENT_DTYPE).reshape(-1, n)])
    _, first = np.unique(stacked.view(np.dtype((np.void, n))).ravel(), return_index=True)
    return stacked[np.sort(first)]


def forks(tuples : Any, i : int) -> Dict[Tuple[int,int],Tuple[int,int]]:
    """
    fork_i of a tuple set: the pairs (u_i, v_i) over u, v agreeing before
    coordinate i, each with its lexicographically least witnessing index pair.
    """
    rows = np.asarray(tuples, dtype=np.int64)
    if rows.ndim == 1:
        rows = rows.reshape(1, -1)
    groups : Dict[bytes,List[int]] = {}
    for idx in range(len(rows)):
        groups.setdefault(rows[idx, :i].tobytes(), []).append(idx)
    out : Dict[Tuple[int,int],Tuple[int,int]] = {}
    for a in range(len(rows)):
        for b in groups[rows[a, :i].tobytes()]:
            out.setdefault((int(rows[a, i]), int(rows[b, i])), (a, b))
    return out


def derived_forks(tuples : Any, i : int, context : ProductContext, e : int=1) -> Set[Tuple[int,int]]:
    """The e-derived forks {(gamma, delta^(gamma^e))} in coordinate i."""
    pairs = list(forks(tuples, i))
    if not pairs:
        return set()
    gam = np.asarray([p[0] for p in pairs])
    dl = np.asarray([p[1] for p in pairs])
    values = derived_value(context, i, dl, gam, e)
    return {(int(g), int(v)) for g, v in zip(gam, values)}


@typechecked
def weak_transitivity_witness(v : Any, vhat : Any, u : Any, uhat : Any, context : ProductContext,
                              i : Optional[int]=None) -> Tuple[np.ndarray, np.ndarray]:
    """
    From witnesses (v, v^) of (gamma, delta) and (u, u^) of (beta, delta) in
    coordinate i, builds (p(p(v,v^,u^), p(v,v^,v^), v), p(u,v,v)), a witness of
    (gamma, beta^gamma).

    Raises
    ------
    PreconditionError
        Raised (when i is given) if the inputs do not witness such forks
    IdentityError
        Raised if the output does not witness (gamma, beta^gamma)
    """
    v, vhat, u, uhat = (np.asarray(t, dtype=np.int64) for t in (v, vhat, u, uhat))
    if i is not None:
        if not (np.array_equal(v[:i], vhat[:i]) and np.array_equal(u[:i], uhat[:i]) and vhat[i] == uhat[i]):
            raise PreconditionError('(v, v^) and (u, u^) must witness forks (gamma, delta), (beta, delta) '
                                    'in coordinate {}'.format(i))
    first = _apply_p(context, _apply_p(context, v, vhat, uhat), _apply_p(context, v, vhat, vhat), v)
    second = _apply_p(context, u, v, v)
    if i is not None:
        expected = _derived_scalar(context, i, u[i], v[i])
        if not (np.array_equal(first[:i], second[:i]) and first[i] == v[i] and second[i] == expected):
            raise IdentityError('weak transitivity output does not witness the fork; p is not a valid term')
    return first, second


def transfer_witness(c : Any, chat : Any, b : Any, context : ProductContext) -> np.ndarray:
    """
    Transfers a derived-fork witness (c, c^) to any b with b_i = c_i:
    b^ = p(c^, c, b) agrees with b before i and carries c^_i at i.
    """
    return _apply_p(context, chat, c, b)


def fork_propagation(rep : PartialStandardizedRep) -> int:
    """
    Grows the fork witnesses of a representation without leaving <R>.

    In every coordinate m >= d-1 the witnessed pairs (the designated fork
    pairs plus (r_m, r_m) for every stored r) are closed under the basic
    operations applied to witness pairs; each fork (gamma, delta) reached,
    witnessed by (u, u^), yields the derived fork (gamma, delta^gamma) witnessed
    by (u, p(u^, u, u)), designated when missing.

    Returns
    -------
    int
        Number of fork keys designated
    """
    context = rep.context
    dag = rep.dag
    added = 0
    ops = [(s, a) for s, a in context.signature.symbols if a > 0]
    for c in range(rep.d - 1, rep.n):
        alg = context.algebras[c]
        pairs : Dict[Tuple[int,int],Tuple[np.ndarray,np.ndarray,Optional[int],Optional[int]]] = {}
        for (g, dl), (iu, iuh) in rep.forks_at(c).items():
            pairs[(g, dl)] = (rep.row(iu).astype(np.int64), rep.row(iuh).astype(np.int64),
                              rep.provenance[iu], rep.provenance[iuh])
        for t in range(len(rep)):
            row = rep.row(t).astype(np.int64)
            pairs.setdefault((int(row[c]), int(row[c])), (row, row, rep.provenance[t], rep.provenance[t]))
        grown = True
        while grown:
            grown = False
            keys = list(pairs)
            gam = np.asarray([key[0] for key in keys], dtype=np.int64)
            dl = np.asarray([key[1] for key in keys], dtype=np.int64)
            for symbol, arity in ops:
                grid = np.indices((len(keys),) * arity).reshape(arity, -1)
                fg = alg.apply(symbol, *[gam[g] for g in grid])
                fd = alg.apply(symbol, *[dl[g] for g in grid])
                codes = fg * alg.size + fd
                _, first = np.unique(codes, return_index=True)
                for pos in np.sort(first):
                    key = (int(fg[pos]), int(fd[pos]))
                    if key in pairs:
                        continue
                    combo = [keys[int(grid[j, pos])] for j in range(arity)]
                    args = [pairs[kk] for kk in combo]
                    u = context.apply(symbol, [a[0] for a in args]).astype(np.int64)
                    uh = context.apply(symbol, [a[1] for a in args]).astype(np.int64)
                    u_node = dag.apply(symbol, *[a[2] for a in args]) if dag is not None else None
                    uh_node = dag.apply(symbol, *[a[3] for a in args]) if dag is not None else None
                    pairs[key] = (u, uh, u_node, uh_node)
                    grown = True
        for (g, dl), (u, uh, u_node, uh_node) in pairs.items():
            target = uh
            target_node = uh_node
            for _ in range(rep.e):
                target = _apply_p(context, target, u, u)
                target_node = dag.apply('p', target_node, u_node, u_node) if dag is not None else None
            key = (c, g, int(target[c]))
            if key not in rep.fork_index:
                rep.designate_fork(key, u, target, u_node, target_node)
                added += 1
    logger.debug('fork propagation designated {} forks'.format(added))
    return added


def weak_transitivity_closure(rep : PartialStandardizedRep) -> int:
    """
    For every coordinate m >= d-1 and every two designated forks
    (gamma, delta), (beta, delta) in the current designations, designates
    the weak transitivity witness of (gamma, beta^gamma) when missing.
    """
    context = rep.context
    dag = rep.dag
    added = 0
    for c in range(rep.d - 1, rep.n):
        snapshot = rep.forks_at(c)
        by_delta : Dict[int,List[Tuple[int,Tuple[int,int]]]] = {}
        for (g, dl), pair in snapshot.items():
            by_delta.setdefault(dl, []).append((g, pair))
        for dl, entries in by_delta.items():
            for (gamma, (iv, ivh)), (beta, (iu, iuh)) in itertools.product(entries, repeat=2):
                key = (c, gamma, _derived_scalar(context, c, beta, gamma))
                if key in rep.fork_index:
                    continue
                v, vh, u, uh = (rep.row(t).astype(np.int64) for t in (iv, ivh, iu, iuh))
                first, second = weak_transitivity_witness(v, vh, u, uh, context, c)
                if dag is not None:
                    pv, pvh, pu, puh = (rep.provenance[t] for t in (iv, ivh, iu, iuh))
                    first_node = dag.apply('p', dag.apply('p', pv, pvh, puh), dag.apply('p', pv, pvh, pvh), pv)
                    second_node = dag.apply('p', pu, pv, pv)
                else:
                    first_node = second_node = None
                rep.designate_fork(key, first, second, first_node, second_node)
                added += 1
    return added


@typechecked
def prepare_compact_rep(gens : Any, context : ProductContext, provenance : bool=False) -> PartialStandardizedRep:
    """
    The polynomial part of the direct construction: local witnesses, the
    representability check on every generator (adding S' and S), fork
    propagation and weak transitivity. Everything added lies in <gens>.
    """
    rep = local_rep(gens, context, provenance=provenance)
    rows = as_rows(gens, context)
    nodes = [rep.dag.generator(j) for j in range(len(rows))] if rep.dag is not None else None
    results = _reconstruct(rep, rows, nodes)
    logger.debug('generators added {} fork witnesses'.format(
        sum(len(r.derived_added) + len(r.plain_added) for r in results)))
    fork_propagation(rep)
    weak_transitivity_closure(rep)
    return rep


class ForkWitnessOracle:
    """
    need_fork_witnesses realized by walking the generated subalgebra B in
    generation order, lazily and from a cursor.

    Elements before the cursor are completely representable by the current
    representation, and stay so as designations are only ever added. Without
    provenance a round runs the representability check on the next batch of
    elements in place, so every element of the batch is completely
    representable afterwards; the round answers YES iff something was
    designated. With provenance the first element of the batch that is not
    completely representable is handled alone: it is f(r_1, ..., r_k) with
    every r_j earlier, hence completely representable, which gives its
    derivation.

    Raises
    ------
    CapExceededError
        Raised when more than settings.oracleCap elements have to be visited
        or the walk evaluates more than settings.oracleWorkCap argument tuples
    """

    def __init__(self, gens : Any, context : ProductContext, cap : Optional[int]=None) -> None:
        self.context = context
        self.rows = as_rows(gens, context)
        cap = settings.oracleCap if cap is None else cap
        self._steps : Iterator[Closure] = closure_steps(self.rows, context, cap=cap, cap_name='oracleCap',
                                                        work_cap=settings.oracleWorkCap,
                                                        work_cap_name='oracleWorkCap')
        self.closure : Closure = next(self._steps)
        self.cursor = 0
        self.rounds = 0

    def _fill(self, index : int) -> bool:
        while len(self.closure) <= index:
            try:
                next(self._steps)
            except StopIteration:
                return False
        return True

    def _node(self, rep : PartialStandardizedRep, index : int) -> int:
        symbol, args = self.closure.parents[index]
        if symbol is None:
            return rep.dag.generator(args[0])
        children : Dict[int,Optional[int]] = {}
        derived = []
        for a in args:
            parent = self.closure.parents[a]
            if parent[0] is None:
                children[a] = rep.dag.generator(parent[1][0])
            elif a not in children:
                children[a] = None
                derived.append(a)
        if derived:
            results = _reconstruct(rep, self.closure.elements[derived])
            for a, result in zip(derived, results):
                children[a] = result.node
        return rep.dag.apply(symbol, *[children[a] for a in args])

    def __call__(self, rep : PartialStandardizedRep) -> bool:
        while self._fill(self.cursor):
            end = min(len(self.closure), self.cursor + ORACLE_BATCH)
            batch = self.closure.elements[self.cursor:end]
            if rep.dag is None:
                results = _reconstruct(rep, batch)
                start, self.cursor = self.cursor, end
                added = sum(len(r.derived_added) + len(r.plain_added) for r in results)
                if added == 0:
                    continue
                self.rounds += 1
                logger.debug('oracle round {}: elements {}..{} needed {} fork witnesses'.\
                             format(self.rounds, start, end - 1, added))
                return True
            failing = np.nonzero(~is_completely_representable(batch, rep))[0]
            if failing.size == 0:
                self.cursor = end
                continue
            self.cursor += int(failing[0])
            node = self._node(rep, self.cursor)
            _reconstruct(rep, self.closure.elements[self.cursor:self.cursor + 1], [node])
            self.cursor += 1
            self.rounds += 1
            logger.debug('oracle round {}: element {} needed fork witnesses'.format(self.rounds, self.cursor - 1))
            return True
        return False


def need_fork_witnesses(rep : PartialStandardizedRep, oracle : ForkWitnessOracle) -> bool:
    """YES (True, rep augmented) or NO (False) from the fork-witness oracle."""
    return oracle(rep)


@typechecked
def compact_rep_direct(gens : Any, context : ProductContext, provenance : bool=False,
                       cap : Optional[int]=None) -> PartialStandardizedRep:
    """
    A standardized representation of B = <gens> built directly.

    Local witnesses and the generator checks come first; the fork-witness
    oracle is then asked until it answers NO, and the designated forks are
    finally closed under weak transitivity.

    Parameters
    ----------
    gens : array_like
    context : ProductContext
        n >= d factors with a compiled cube term
    provenance : bool
        Record a derivation for every tuple (needed for witness circuits)
    cap : int, optional
        Oracle cap, defaults to settings.oracleCap

    Raises
    ------
    PreconditionError
        Raised if n < d
    CapExceededError
        Raised if the oracle exceeds its cap
    """
    rep = prepare_compact_rep(gens, context, provenance=provenance)
    oracle = ForkWitnessOracle(gens, context, cap=cap)
    while need_fork_witnesses(rep, oracle):
        pass
    weak_transitivity_closure(rep)
    logger.debug('compact representation: {}'.format(rep))
    return rep


def brute_force_oracle(gens : Any, context : ProductContext, target : Any) -> bool:
    return subalgebra_closure(gens, context, target=target).found is not None


SmpOracle = Callable[[Any, ProductContext, Any], bool]


@typechecked
def compact_rep_via_smp(gens : Any, context : ProductContext,
                        smp_oracle : Optional[SmpOracle]=None) -> PartialStandardizedRep:
    """
    A standardized representation of B = <gens> from membership queries.

    For each coordinate i >= d-1 and gamma in B|_i a local witness b with
    b_i = gamma is fixed; for every beta in B|_i the tuple (b|_[i], beta^gamma)
    is tested on the first i+1 coordinates and, when it belongs, extended one
    coordinate at a time (smallest admissible value first) to c in B; then
    (b, c) witnesses the fork (gamma, beta^gamma).

    Parameters
    ----------
    smp_oracle : callable, optional
        (generators, context, target) -> bool, brute force by default

    Raises
    ------
    PreconditionError
        Raised if n < d, or if the oracle admits a prefix it cannot extend
    """
    oracle = smp_oracle or brute_force_oracle
    rows = as_rows(gens, context)
    rep = local_rep(rows, context)
    base = rep.tuples.copy()
    n, d = rep.n, rep.d
    for i in range(d - 1, n):
        values = sorted(int(v) for v in subalgebra_closure(rows[:, [i]], context.restrict([i])).elements[:, 0])
        for gamma in values:
            b = base[np.nonzero(base[:, i] == gamma)[0][0]].astype(np.int64)
            for beta in values:
                derived = _derived_scalar(context, i, beta, gamma)
                key = (i, gamma, derived)
                if key in rep.fork_index:
                    continue
                c = list(b[:i]) + [derived]
                if not oracle(rows[:, :i + 1], context.restrict(range(i + 1)), c):
                    continue
                for j in range(i + 1, n):
                    sub = context.restrict(range(j + 1))
                    for cj in range(int(context.sizes[j])):
                        if oracle(rows[:, :j + 1], sub, c + [cj]):
                            c.append(cj)
                            break
                    else:
                        raise PreconditionError('membership oracle admits {} but no extension to coordinate {}'.\
                                                format(c, j))
                rep.designate_fork(key, b, c)
    logger.debug('compact representation via membership queries: {}'.format(rep))
    return rep


@typechecked
def smp_via_compact_rep(gens : Any, context : ProductContext, target : Any,
                        rep : Optional[PartialStandardizedRep]=None,
                        rep_provider : Optional[Callable[..., PartialStandardizedRep]]=None) -> bool:
    """
    Membership from a standardized representation: NO if some target|_I has
    no designated local witness, otherwise the answer of the
    representability check.
    """
    if rep is None:
        rep = (rep_provider or compact_rep_direct)(gens, context)
    b = as_rows(target, context)[0]
    for I in tn_inputs(rep.n, rep.d):
        if (I, tuple(int(x) for x in b[list(I)])) not in rep.local_index:
            return False
    return is_representable(b, rep, dry_run=True).answer


@typechecked
def extract_witness_circuit(rep : PartialStandardizedRep, node : int, target : Any,
                            P : Circuit) -> WitnessTrace:
    """
    The circuit over the generators computing `target`, from the provenance
    node of a YES answer: derivations of the stored tuples are spliced into
    the chain of t_m applications and the P-gates are replaced by P.

    Raises
    ------
    ProvenanceError
        Raised if the representation recorded no provenance or the circuit
        does not evaluate to the target
    """
    if rep.dag is None or rep.generators is None:
        raise ProvenanceError('the representation was built without provenance')
    p_level = rep.dag.to_circuit(node, rep.d, rep.e)
    circuit = expand_to_signature(p_level, {'P': P})
    value = circuit.evaluate(rep.context, list(rep.generators.astype(np.int64)))
    if not np.array_equal(np.asarray(value), as_rows(target, rep.context)[0]):
        raise ProvenanceError('witness circuit evaluates to {} instead of the target'.format(value))
    return WitnessTrace(circuit, p_level.gate_count(), circuit.gate_count())


def validate_standardized(rep : PartialStandardizedRep, subalgebra : Any) -> List[str]:
    """
    Brute-force check that rep is a standardized representation of the given
    subalgebra (all its tuples): R inside B, a designated local witness for
    every element of every B|_I, and a valid designated pair for every
    derived fork of B in coordinates d-1..n-1. Returns the problems found.
    """
    B = np.asarray(subalgebra, dtype=np.int64)
    members = {row.tobytes() for row in B.astype(ELEMENT_DTYPE)}
    problems = []
    for t in range(len(rep)):
        if rep.row(t).tobytes() not in members:
            problems.append('tuple {} is not in the subalgebra'.format(rep.row(t).tolist()))
    for I in tn_inputs(rep.n, rep.d):
        for proj in {tuple(r) for r in B[:, list(I)].tolist()}:
            t = rep.local_index.get((I, proj))
            if t is None or tuple(rep.row(t)[list(I)].tolist()) != proj:
                problems.append('no local witness for {} on {}'.format(proj, I))
    for c in range(rep.d - 1, rep.n):
        for gamma, delta in sorted(derived_forks(B, c, rep.context, rep.e)):
            pair = rep.fork_index.get((c, gamma, delta))
            if pair is None:
                problems.append('no witness for derived fork ({},{}) at {}'.format(gamma, delta, c))
                continue
            u, uh = rep.row(pair[0]), rep.row(pair[1])
            if not (np.array_equal(u[:c], uh[:c]) and u[c] == gamma and uh[c] == delta):
                problems.append('bad witness pair for ({},{}) at {}'.format(gamma, delta, c))
    return problems


def compactness_bound(n : int, d : int, a : int) -> int:
    return comb(n, d - 1) * a ** (d - 1) + 2 * n * a * a


def rep_to_dict(rep : PartialStandardizedRep, factors : Sequence[str]) -> Dict[str,Any]:
    return {'factors': list(factors), 'd': rep.d, 'e': rep.e,
            'tuples': rep.tuples.tolist(),
            'local': [{'I': list(I), 'proj': list(proj), 'tuple': t}
                      for (I, proj), t in sorted(rep.local_index.items())],
            'forks': [{'m': m, 'gamma': g, 'delta': dl, 'pair': list(pair)}
                      for (m, g, dl), pair in sorted(rep.fork_index.items())]}


@typechecked
def rep_from_dict(data : Mapping[str,Any], cat : Catalog) -> PartialStandardizedRep:
    """
    Rebuilds a representation from the rep-file schema.

    Raises
    ------
    CatalogError
        Raised on missing keys or tuple ids out of range
    """
    try:
        context = cat.context(data['factors'])
        rep = PartialStandardizedRep(context, int(data['d']), int(data.get('e', 1)))
        for row in as_rows(data['tuples'], context):
            rep.add(row)
        size = len(rep)
        for entry in data['local']:
            t = int(entry['tuple'])
            if not 0 <= t < size:
                raise CatalogError('local witness refers to tuple {} of {}'.format(t, size))
            rep.local_index[(tuple(entry['I']), tuple(entry['proj']))] = t
        for entry in data['forks']:
            pair = (int(entry['pair'][0]), int(entry['pair'][1]))
            if not all(0 <= t < size for t in pair):
                raise CatalogError('fork witness refers to tuples {} of {}'.format(pair, size))
            rep.fork_index[(int(entry['m']), int(entry['gamma']), int(entry['delta']))] = pair
    except (KeyError, TypeError, IndexError) as e:
        raise CatalogError('malformed representation: missing or invalid {}'.format(e))
    return rep


def save_rep(path : str, rep : PartialStandardizedRep, factors : Sequence[str]) -> None:
    with open(path, 'w') as f:
        json.dump(rep_to_dict(rep, factors), f)


def load_rep(path : str, cat : Catalog) -> PartialStandardizedRep:
    try:
        with open(path, 'r') as f:
            return rep_from_dict(json.load(f), cat)
    except json.JSONDecodeError as e:
        raise CatalogError('malformed JSON in {}: {}'.format(path, e))
