from __future__ import annotations
import functools
import itertools
import json
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple
import numpy as np
from typeguard import typechecked
from subpower.algebra import Catalog, FiniteAlgebra, ProductContext, Closure, \
     eval_circuit, identity_counterexample, subalgebra_closure
from subpower import settings
from subpower.errors import CapExceededError, CatalogError, IdentityError, \
     PreconditionError
from subpower.logger import getSubpowerLogger

__all__ = ["Circuit", "CircuitBuilder", "circuit_from_dict", "load_term",
           "save_term", "closure_circuit", "expand_to_signature",
           "parallelogram_rows", "parallelogram_counterexample",
           "verify_parallelogram", "derive_auxiliary", "find_fork_exponent",
           "configure_cube_term", "compile_term", "compile_derived_tables",
           "check_symbols", "s_power", "tn_inputs", "build_tn",
           "build_Tn", "build_Tn_plus", "search_term",
           "search_parallelogram_term", "configure_catalog"]

logger = getSubpowerLogger(name='circuits')

Gate = Tuple[str, Tuple[int, ...]]


class Circuit:
    """
    An immutable term DAG.

    Ids 0..input_count-1 denote the inputs; gate g (0-based) has id
    input_count + g and its operands always have smaller ids. No two gates
    share (symbol, operands) when built through CircuitBuilder.

    Attributes
    ----------
    input_count : int
    gates : Tuple[Tuple[str, Tuple[int, ...]], ...]
    outputs : Tuple[int, ...]
    """

    def __init__(self, input_count : int, gates : Sequence[Gate],
                 outputs : Sequence[int]) -> None:
        self.input_count = input_count
        self.gates : Tuple[Gate, ...] = tuple((s, tuple(ops)) for s, ops in gates)
        self.outputs : Tuple[int, ...] = tuple(outputs)
        for g, (symbol, operands) in enumerate(self.gates):
            if any(o < 0 or o >= input_count + g for o in operands):
                raise CatalogError('gate {} ({}) uses an operand that is not defined before it'.\
                                   format(input_count + g, symbol))
        if any(o < 0 or o >= input_count + len(self.gates) for o in self.outputs):
            raise CatalogError('circuit output out of range')
        self._layers : Optional[List[Tuple[str,np.ndarray,np.ndarray]]] = None

    def gate_count(self, symbol : Optional[str]=None) -> int:
        if symbol is None:
            return len(self.gates)
        return sum(1 for s, _ in self.gates if s == symbol)

    def __len__(self) -> int:
        return len(self.gates)

    def evaluate(self, target : Any, args : Any, **kwargs : Any) -> Any:
        return eval_circuit(self, target, args, **kwargs)

    def depth(self) -> int:
        level = [0] * (self.input_count + len(self.gates))
        for g, (_, operands) in enumerate(self.gates):
            level[self.input_count + g] = 1 + max((level[o] for o in operands), default=0)
        return max((level[o] for o in self.outputs), default=0)

    def layers(self) -> List[Tuple[str,np.ndarray,np.ndarray]]:
        """
        Gates grouped by depth and symbol, shallowest first: per group the
        symbol, the gate ids and their operand ids (one row per gate). A
        group only reads inputs and gates of earlier groups.
        """
        if self._layers is None:
            level = [0] * (self.input_count + len(self.gates))
            groups : Dict[Tuple[int,str],List[int]] = {}
            for g, (symbol, operands) in enumerate(self.gates):
                gid = self.input_count + g
                level[gid] = 1 + max((level[o] for o in operands), default=0)
                groups.setdefault((level[gid], symbol), []).append(g)
            self._layers = []
            for (_, symbol), members in sorted(groups.items()):
                arity = len(self.gates[members[0]][1])
                operands = np.asarray([self.gates[g][1] for g in members], dtype=np.int64)
                ids = np.asarray(members, dtype=np.int64) + self.input_count
                self._layers.append((symbol, ids, operands.reshape(len(members), arity)))
        return self._layers

    def to_dict(self) -> Dict[str,Any]:
        data : Dict[str,Any] = {'inputs': self.input_count,
                                'gates': [{'op': s, 'args': list(ops)} for s, ops in self.gates]}
        if len(self.outputs) == 1:
            data['output'] = self.outputs[0]
        else:
            data['outputs'] = list(self.outputs)
        return data

    def to_term_string(self, names : Optional[Sequence[str]]=None, limit : int=2000) -> str:
        """Prints the (unshared) term of the first output, truncated to `limit` chars."""
        names = names or ['x{}'.format(i) for i in range(self.input_count)]
        text : Dict[int,str] = {i: names[i] for i in range(self.input_count)}
        for g, (symbol, operands) in enumerate(self.gates):
            body = '{}({})'.format(symbol, ','.join(text[o] for o in operands))
            text[self.input_count + g] = body if len(body) <= limit else body[:limit] + '...'
        return text[self.outputs[0]]

    def __eq__(self, other : Any) -> bool:
        return isinstance(other, Circuit) and self.input_count == other.input_count and \
            self.gates == other.gates and self.outputs == other.outputs

    def __hash__(self) -> int:
        return hash((self.input_count, self.gates, self.outputs))

    def __repr__(self) -> str:
        return 'Circuit(inputs={}, gates={}, outputs={})'.format(
            self.input_count, len(self.gates), list(self.outputs))


class CircuitBuilder:
    """
    Hash-consing arena for building circuits: applying the same symbol to the
    same operand ids twice returns the same gate id.
    """

    def __init__(self, input_count : int) -> None:
        self.input_count = input_count
        self.gates : List[Gate] = []
        self._ids : Dict[Gate,int] = {}

    def input(self, i : int) -> int:
        if not 0 <= i < self.input_count:
            raise IndexError('input {} out of range'.format(i))
        return i

    def apply(self, symbol : str, *operands : int) -> int:
        key = (symbol, tuple(int(o) for o in operands))
        found = self._ids.get(key)
        if found is not None:
            return found
        gid = self.input_count + len(self.gates)
        self.gates.append(key)
        self._ids[key] = gid
        return gid

    def splice(self, circuit : Circuit, operands : Sequence[int]) -> List[int]:
        """Inlines `circuit` with its inputs bound to `operands`; returns its output ids."""
        if len(operands) != circuit.input_count:
            raise TypeError('splice needs {} operands, got {}'.format(circuit.input_count, len(operands)))
        local = list(operands)
        for symbol, ops in circuit.gates:
            local.append(self.apply(symbol, *[local[o] for o in ops]))
        return [local[o] for o in circuit.outputs]

    def __len__(self) -> int:
        return len(self.gates)

    def build(self, outputs : Sequence[int], prune : bool=True) -> Circuit:
        """Freezes the arena into a Circuit, keeping only gates the outputs depend on."""
        if not prune:
            return Circuit(self.input_count, self.gates, outputs)
        needed = set(outputs)
        for g in range(len(self.gates) - 1, -1, -1):
            if self.input_count + g in needed:
                needed.update(self.gates[g][1])
        renumber = {i: i for i in range(self.input_count)}
        kept : List[Gate] = []
        for g, (symbol, operands) in enumerate(self.gates):
            gid = self.input_count + g
            if gid in needed:
                renumber[gid] = self.input_count + len(kept)
                kept.append((symbol, tuple(renumber[o] for o in operands)))
        return Circuit(self.input_count, kept, [renumber[o] for o in outputs])


def circuit_from_dict(data : Mapping[str,Any]) -> Circuit:
    """
    Parses the term-file schema
    {"inputs":5,"gates":[{"op":"m","args":[0,1,2]}],"output":5}.
    """
    try:
        outputs = data['outputs'] if 'outputs' in data else [data['output']]
        return Circuit(int(data['inputs']),
                       [(str(g['op']), tuple(int(a) for a in g['args'])) for g in data['gates']],
                       [int(o) for o in outputs])
    except (KeyError, TypeError) as e:
        raise CatalogError('malformed term: missing or invalid {}'.format(e))


def load_term(path : str) -> Circuit:
    try:
        with open(path, 'r') as f:
            return circuit_from_dict(json.load(f))
    except json.JSONDecodeError as e:
        raise CatalogError('malformed JSON in {}: {}'.format(path, e))


def save_term(path : str, circuit : Circuit) -> None:
    with open(path, 'w') as f:
        json.dump(circuit.to_dict(), f)


def check_symbols(circuit : Circuit, context_symbols : Mapping[str,int]) -> None:
    """Raises CatalogError if a gate uses an unknown symbol or a wrong arity."""
    for symbol, operands in circuit.gates:
        if symbol not in context_symbols:
            raise CatalogError('term uses unknown symbol {}'.format(symbol))
        if context_symbols[symbol] != len(operands):
            raise CatalogError('symbol {} has arity {}, used with {} arguments'.\
                               format(symbol, context_symbols[symbol], len(operands)))


def closure_circuit(closure : Closure, element : int, input_count : int,
                    builder : Optional[CircuitBuilder]=None,
                    memo : Optional[Dict[int,int]]=None) -> int:
    """
    Adds to `builder` the derivation of a closure element from the
    generators (generator g is input g) and returns its gate id.
    """
    builder = builder if builder is not None else CircuitBuilder(input_count)
    memo = memo if memo is not None else {}
    stack = [element]
    while stack:
        current = stack[-1]
        if current in memo:
            stack.pop()
            continue
        symbol, args = closure.parents[current]
        if symbol is None:
            memo[current] = builder.input(args[0])
            stack.pop()
            continue
        pending = [a for a in args if a not in memo]
        if pending:
            stack.extend(pending)
            continue
        memo[current] = builder.apply(symbol, *[memo[a] for a in args])
        stack.pop()
    return memo[element]


def expand_to_signature(circuit : Circuit, terms : Mapping[str,Circuit]) -> Circuit:
    """
    Replaces every gate whose symbol is a key of `terms` (e.g. 'P') by the
    circuit realizing it over the basic signature.
    """
    builder = CircuitBuilder(circuit.input_count)
    local = list(range(circuit.input_count))
    for symbol, operands in circuit.gates:
        ops = [local[o] for o in operands]
        if symbol in terms:
            local.append(builder.splice(terms[symbol], ops)[0])
        else:
            local.append(builder.apply(symbol, *ops))
    return builder.build([local[o] for o in circuit.outputs])


def parallelogram_rows(m : int, n : int) -> List[List[str]]:
    """
    Argument patterns of the (m,n)-parallelogram identities: m rows
    (x,x,y | ...) then n rows (y,x,x | ...), with z on the diagonal of the
    right block and y elsewhere; each row must evaluate to y.
    """
    d = m + n
    rows = []
    for j in range(d):
        left = ['x', 'x', 'y'] if j < m else ['y', 'x', 'x']
        right = ['z' if c == j else 'y' for c in range(d)]
        rows.append(left + right)
    return rows


def _variables(size : int) -> Dict[str,np.ndarray]:
    grid = np.indices((size, size, size)).reshape(3, -1)
    return {'x': grid[0], 'y': grid[1], 'z': grid[2]}


def parallelogram_counterexample(cat : Catalog, P : Circuit, m : int, n : int) \
        -> Optional[Tuple[str,int,Dict[str,int]]]:
    """
    Returns (algebra name, row index, {x,y,z}) for the first failing
    parallelogram identity, or None when all hold.
    """
    if m < 1 or n < 1:
        raise PreconditionError('parallelogram parameters must be positive, got ({},{})'.format(m, n))
    if P.input_count != m + n + 3:
        raise PreconditionError('an ({},{})-parallelogram term has {} inputs, got {}'.\
                                format(m, n, m + n + 3, P.input_count))
    for alg in cat.algebras.values():
        values = _variables(alg.size)
        for r, pattern in enumerate(parallelogram_rows(m, n)):
            out = np.broadcast_to(eval_circuit(P, alg, [values[v] for v in pattern]),
                                  values['y'].shape)
            bad = np.nonzero(out != values['y'])[0]
            if bad.size:
                k = int(bad[0])
                return alg.name, r, {v: int(values[v][k]) for v in 'xyz'}
    return None


@typechecked
def verify_parallelogram(cat : Catalog, P : Circuit, m : int, n : int) -> bool:
    """
    Checks the (m,n)-parallelogram identities of P exhaustively in every
    algebra of the catalog.

    Parameters
    ----------
    cat : Catalog
    P : Circuit
        A term with m+n+3 inputs over the catalog signature
    m, n : int
        Numbers of upper and lower rows, both at least 1

    Returns
    -------
    bool

    Raises
    ------
    PreconditionError
        Raised if P has the wrong number of inputs or m, n < 1
    """
    failure = parallelogram_counterexample(cat, P, m, n)
    if failure is not None:
        logger.debug('parallelogram row {} fails in {} at {}'.format(failure[1], failure[0], failure[2]))
    return failure is None


def compile_term(alg : FiniteAlgebra, circuit : Circuit,
                 derived : Optional[Mapping[str,np.ndarray]]=None) -> np.ndarray:
    """Tabulates a single-output circuit on `alg` as a cube with one axis per input."""
    r = circuit.input_count
    grid = np.indices((alg.size,) * r).reshape(r, -1)
    values = np.broadcast_to(eval_circuit(circuit, alg, list(grid), derived=derived), grid.shape[1:])
    return np.asarray(values, dtype=np.uint8).reshape((alg.size,) * r)


def _p_level(d : int) -> Dict[str,Circuit]:
    """s, p, x^y as circuits over the single symbol P."""
    b = CircuitBuilder(d)
    xs = list(range(d))
    s = b.build([b.apply('P', xs[0], xs[1], xs[1], *xs)])
    b = CircuitBuilder(3)
    p = b.build([b.apply('P', 0, 1, 2, 0, *([2] * (d - 1)))])
    b = CircuitBuilder(2)
    xy = b.build([b.apply('P', 0, 1, 1, 0, *([1] * (d - 1)))])
    return {'s': s, 'p': p, 'xy': xy}


def s_power(d : int, ell : int) -> Circuit:
    """s iterated ell times in its first argument (ell = 0 is the projection)."""
    b = CircuitBuilder(d)
    acc = 0
    for _ in range(ell):
        acc = b.apply('P', acc, 1, 1, acc, *range(1, d))
    return b.build([acc])


def _projection(inputs : int, i : int) -> Circuit:
    return Circuit(inputs, [], [i])


@typechecked
def derive_auxiliary(cat : Catalog, P : Circuit) -> Dict[str,Any]:
    """
    Derives s, p, x^y and the iterates of s from a (1,d-1)-parallelogram term.

    s(x1,...,xd) = P(x1,x2,x2,x1,...,xd), p(x,u,y) = P(x,u,y,x,y,...,y),
    x^y = p(x,y,y); s_pow(ell) iterates s ell times in its first argument.
    p(x,y,y) = s(x,y,...,y) holds by construction; p(x,x,y) = y and
    s(y,..,x,..,y) = y (x at any position but the first) are checked on every
    algebra of the catalog.

    Returns
    -------
    Dict[str, Any]
        {'s', 'p', 'xy'} circuits over the basic signature, 'P' circuits for
        the same terms under 'P_level', and 's_pow' a callable ell -> Circuit

    Raises
    ------
    IdentityError
        Raised if one of the identities fails
    """
    d = P.input_count - 3
    if d < 2:
        raise PreconditionError('a cube term needs d >= 2, got {} inputs'.format(P.input_count))
    level = _p_level(d)
    checks = []
    b = CircuitBuilder(2)
    checks.append(('p(x,x,y)=y', b.build([b.apply('P', 0, 0, 1, 0, *([1] * (d - 1)))]), _projection(2, 1)))
    for j in range(1, d):
        b = CircuitBuilder(2)
        args = [1] * d
        args[j] = 0
        checks.append(('s(y,..,x@{},..,y)=y'.format(j + 1),
                       b.build([b.apply('P', args[0], args[1], args[1], *args)]), _projection(2, 1)))
    for alg in cat.algebras.values():
        cube = compile_term(alg, P)
        for label, lhs, rhs in checks:
            bad = identity_counterexample(alg, lhs, rhs, derived={'P': cube})
            if bad is not None:
                raise IdentityError('{} fails in {} at {}'.format(label, alg.name, bad))
    expanded = {name: expand_to_signature(c, {'P': P}) for name, c in level.items()}
    expanded['P_level'] = level
    expanded['s_pow'] = lambda ell: expand_to_signature(s_power(d, ell), {'P': P})
    return expanded


@typechecked
def find_fork_exponent(cat : Catalog) -> int:
    """
    Least e >= 1 such that (x^(y^e))^(y^e) = x^(y^e) holds in the catalog,
    where x^(y^e) applies x -> x^y e times.

    For fixed y the map g(x) = x^y has some g^e idempotent exactly when e is
    at least the longest tail of g and a multiple of every cycle length, so
    e is computed directly from the functional graphs.

    Raises
    ------
    PreconditionError
        Raised if the catalog has no x^y table (no cube term configured)
    """
    if 'xy' not in cat.derived_tables:
        raise PreconditionError('configure a cube term before computing the fork exponent')
    tail, period = 1, 1
    for alg in cat.algebras.values():
        table = cat.derived_tables['xy'][alg.name]
        for y in range(alg.size):
            g = [int(table[x, y]) for x in range(alg.size)]
            for x in range(alg.size):
                seen : Dict[int,int] = {}
                cur, step = x, 0
                while cur not in seen:
                    seen[cur] = step
                    cur = g[cur]
                    step += 1
                tail = max(tail, seen[cur])
                period = period * (step - seen[cur]) // np.gcd(period, step - seen[cur])
    e = period
    while e < tail:
        e += period
    return int(e)


def compile_derived_tables(cat : Catalog, names : Optional[Sequence[str]]=None) -> None:
    """
    Tabulates P, s, p and x^y on the named algebras (all by default) into
    cat.derived_tables; members added to the catalog later need this too.
    """
    P = cat.cube_term
    if P is None:
        return
    level = _p_level(P.input_count - 3)
    with cat.lock:
        for name in ('P', 's', 'p', 'xy'):
            cat.derived_tables.setdefault(name, {})
        for name in (names if names is not None else list(cat.algebras)):
            alg = cat[name]
            cube = compile_term(alg, P)
            cat.derived_tables['P'][name] = cube
            for symbol in ('s', 'p', 'xy'):
                cat.derived_tables[symbol][name] = compile_term(alg, level[symbol], derived={'P': cube})


@typechecked
def configure_cube_term(cat : Catalog, P : Circuit) -> Catalog:
    """
    Installs P as the catalog's (1,d-1)-parallelogram term: verifies it,
    derives s, p and x^y, compiles P, p, s and x^y into per-algebra tables and
    sets d and e.

    Raises
    ------
    IdentityError
        Raised if P is not a (1,d-1)-parallelogram term for the catalog
    """
    d = P.input_count - 3
    check_symbols(P, dict(cat.signature.symbols))
    failure = parallelogram_counterexample(cat, P, 1, d - 1)
    if failure is not None:
        raise IdentityError('not a (1,{})-parallelogram term: row {} fails in {} at {}'.\
                            format(d - 1, failure[1] + 1, failure[0], failure[2]))
    aux = derive_auxiliary(cat, P)
    with cat.lock:
        cat.d = d
        cat.cube_term = P
        cat.circuits.update({k: v for k, v in aux.items() if isinstance(v, Circuit)})
        cat.circuits['P'] = P
        cat.derived_tables.clear()
        compile_derived_tables(cat)
        cat.e = find_fork_exponent(cat)
        cat.cache.clear()
    logger.debug('cube term configured: d={}, e={}'.format(cat.d, cat.e))
    return cat


def tn_inputs(n : int, d : int) -> List[Tuple[int,...]]:
    """The (d-1)-subsets of range(n) in lexicographic order (the w_I inputs)."""
    return list(itertools.combinations(range(n), d - 1))


def _add_tn(builder : CircuitBuilder, n : int, d : int, e : int, x : int, y : int,
            z : int, w : Mapping[Tuple[int,...],int]) -> int:
    """
    Adds t_n(x, y, z, (w_I)) over P to `builder` and returns its gate id.

    Subterms t_{l,V'} are built for l = n-1 down to d-1 (1-based levels): the
    level-n terms are the variables w_V', and
    t_{l,V'} = P(s^(e+1)(x, T_1..T_{d-1}), p(y, z, T_1), T_1, x, T_1..T_{d-1})
    with T_j = t_{l+1, V' - {i_j} + {l+1}}.
    """
    # 0-based: a level-l set V' is a (d-1)-subset of range(l); l+1 becomes index l
    current : Dict[Tuple[int,...],int] = {V: w[V] for V in itertools.combinations(range(n), d - 1)}
    for ell in range(n - 1, d - 2, -1):
        nxt : Dict[Tuple[int,...],int] = {}
        for V in itertools.combinations(range(ell), d - 1):
            ts = [current[tuple(sorted(V[:j] + V[j + 1:] + (ell,)))] for j in range(d - 1)]
            acc = x
            for _ in range(e + 1):
                acc = builder.apply('P', acc, ts[0], ts[0], acc, *ts)
            pz = builder.apply('P', y, z, ts[0], y, *([ts[0]] * (d - 1)))
            nxt[V] = builder.apply('P', acc, pz, ts[0], x, *ts)
        current = nxt
    return current[tuple(range(d - 1))]


@functools.lru_cache(maxsize=256)
@typechecked
def build_tn(n : int, d : int, e : int=1) -> Circuit:
    """
    The P-circuit of t_n(x, y, z, (w_I)).

    Parameters
    ----------
    n : int
        Number of coordinates, n >= d
    d : int
        Cube parameter, d >= 2
    e : int
        Fork exponent, e >= 1

    Returns
    -------
    Circuit
        Inputs x, y, z, then w_I for the (d-1)-subsets I of range(n) in
        lexicographic order; at most (e+3)*C(n,d) P-gates

    Raises
    ------
    PreconditionError
        Raised if n < d, d < 2 or e < 1
    """
    if d < 2 or e < 1:
        raise PreconditionError('need d >= 2 and e >= 1, got d={}, e={}'.format(d, e))
    if n < d:
        raise PreconditionError('t_n needs n >= d, got n={}, d={}'.format(n, d))
    subsets = tn_inputs(n, d)
    builder = CircuitBuilder(3 + len(subsets))
    w = {V: 3 + i for i, V in enumerate(subsets)}
    out = _add_tn(builder, n, d, e, 0, 1, 2, w)
    return builder.build([out])


def _add_Tn(builder : CircuitBuilder, n : int, d : int, e : int,
            forks : Sequence[Tuple[int,int]], w : Mapping[Tuple[int,...],int],
            b : Optional[int]=None) -> Tuple[int, List[int]]:
    # forks[m-d] = (z^(m), zhat^(m)) gate ids, 1-based m
    acc = w[tuple(range(d - 1))]
    extra = []
    for m in range(d, n + 1):
        if b is not None:
            extra.append(builder.apply('P', acc, b, b, acc, *([b] * (d - 1))))
        z, zhat = forks[m - d]
        tm = build_tn(m, d, e)
        operands = [acc, zhat, z] + [w[V] for V in tn_inputs(m, d)]
        acc = builder.splice(tm, operands)[0]
    return acc, extra


@functools.lru_cache(maxsize=64)
@typechecked
def build_Tn(n : int, d : int, e : int=1) -> Circuit:
    """
    The P-circuit of T_n(z^(d), zhat^(d), ..., z^(n), zhat^(n), (w_I)).

    T_{d-1} is the variable w_{[d-1]} and T_m = t_m(T_{m-1}, zhat^(m), z^(m), w),
    i.e. the x, y, z slots of t_m receive the previous level, the
    derived-fork side of the level-m witness pair and its plain side.

    T_{d-1} (n = d - 1) is the single input w_{[d-1]}.

    Raises
    ------
    PreconditionError
        Raised if n < d - 1
    """
    if n < d - 1:
        raise PreconditionError('T_n needs n >= d - 1, got n={}, d={}'.format(n, d))
    subsets = tn_inputs(n, d)
    levels = n - d + 1
    builder = CircuitBuilder(2 * levels + len(subsets))
    forks = [(2 * i, 2 * i + 1) for i in range(levels)]
    w = {V: 2 * levels + i for i, V in enumerate(subsets)}
    out, _ = _add_Tn(builder, n, d, e, forks, w)
    return builder.build([out])


@functools.lru_cache(maxsize=64)
@typechecked
def build_Tn_plus(n : int, d : int, e : int=1) -> Circuit:
    """
    T_n with one extra input b (last) and one extra P-gate per level
    computing p(T_{m-1}, b, b), the derived-fork partner the representability
    check adds when a level-m witness is missing.

    Returns
    -------
    Circuit
        Outputs [T_n, p(T_{d-1},b,b), ..., p(T_{n-1},b,b)]
    """
    if n < d:
        raise PreconditionError('T_n needs n >= d, got n={}, d={}'.format(n, d))
    subsets = tn_inputs(n, d)
    levels = n - d + 1
    builder = CircuitBuilder(2 * levels + len(subsets) + 1)
    forks = [(2 * i, 2 * i + 1) for i in range(levels)]
    w = {V: 2 * levels + i for i, V in enumerate(subsets)}
    b = 2 * levels + len(subsets)
    out, extra = _add_Tn(builder, n, d, e, forks, w, b=b)
    return builder.build([out] + extra)


def search_term(context : ProductContext, generators : np.ndarray, target : np.ndarray,
                cap : Optional[int]=None) -> Optional[Circuit]:
    """
    Looks for a term t with t(generators) = target by closing the generators
    in the product and reading the derivation of the target.

    Returns None if the closure is exhausted without reaching the target.

    Raises
    ------
    CapExceededError
        Raised (message "closure cap ...") when the search outgrows its caps
    """
    closure = subalgebra_closure(generators, context, target=target, cap=cap)
    if closure.found is None:
        return None
    builder = CircuitBuilder(len(generators))
    out = closure_circuit(closure, closure.found, len(generators), builder)
    return builder.build([out])


@typechecked
def search_parallelogram_term(alg : FiniteAlgebra, d : int) -> Optional[Circuit]:
    """
    Desk-scale search for a (1,d-1)-parallelogram term of one algebra.

    The d identity rows are evaluated at every assignment of x, y, z; each
    distinct column of variable values becomes one coordinate of a power of
    `alg`, the d+3 variables become generator tuples, and a term is found when
    the closure reaches the all-y tuple.

    Returns
    -------
    Circuit or None
        None when the closure is exhausted: no such term exists

    Raises
    ------
    CapExceededError
        Raised when the search exceeds its caps (undecided at this scale)
    """
    if d < 2:
        raise PreconditionError('d must be at least 2')
    values = _variables(alg.size)
    columns = {}
    for pattern in parallelogram_rows(1, d - 1):
        for k in range(values['x'].size):
            column = tuple(int(values[v][k]) for v in pattern)
            columns.setdefault(column, int(values['y'][k]))
    cols = list(columns)
    generators = np.asarray(cols, dtype=np.int64).T
    target = np.asarray([columns[c] for c in cols], dtype=np.int64)
    context = ProductContext([alg] * len(cols))
    try:
        found = search_term(context, generators, target, cap=settings.termSearchCap)
    except CapExceededError as e:
        raise CapExceededError('undecided at this scale: {}'.format(e), e.cap_name, e.limit)
    logger.debug('parallelogram search for {} with d={}: {}'.format(alg.name, d,
                 'found' if found is not None else 'none exists'))
    return found


@typechecked
def configure_catalog(cat : Catalog, P : Optional[Circuit]=None,
                      difference : Optional[Circuit]=None) -> Catalog:
    """
    Configures the cube term (and optionally the difference term) of a
    catalog, taking them from the arguments or else from the "cube_term" and
    "difference_term" entries of the algebra file.

    Raises
    ------
    PreconditionError
        Raised if no cube term is given or recorded in the file
    IdentityError
        Raised if the cube term fails its identities
    """
    if P is None:
        raw = cat.raw_terms.get('cube_term')
        if raw is None:
            raise PreconditionError('no cube term given and the algebra file has no "cube_term" entry')
        data = raw.get('term', raw)
        P = circuit_from_dict(data)
        if 'd' in raw and int(raw['d']) != P.input_count - 3:
            raise CatalogError('cube_term declares d={} but has {} inputs'.format(raw['d'], P.input_count))
    configure_cube_term(cat, P)
    if difference is None and 'difference_term' in cat.raw_terms:
        difference = circuit_from_dict(cat.raw_terms['difference_term'])
    if difference is not None:
        check_symbols(difference, dict(cat.signature.symbols))
        if difference.input_count != 3:
            raise CatalogError('a difference term has 3 inputs, got {}'.format(difference.input_count))
        cat.difference_term = difference
    return cat
