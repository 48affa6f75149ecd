from __future__ import annotations
import json
import threading
import itertools
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, Iterator, List, Mapping, Optional, \
     Sequence, Set, Tuple, Union
import numpy as np
from typeguard import typechecked
from subpower import settings
from subpower.errors import CatalogError, CapExceededError, PreconditionError
from subpower.logger import getSubpowerLogger

__all__ = ["Signature", "FiniteAlgebra", "Congruence", "ProductContext",
           "Closure", "Catalog", "HsEntry", "load_catalog", "catalog_from_dict",
           "closure_steps",
           "eval_circuit", "subalgebra_closure", "quotient", "check_identity",
           "identity_counterexample", "algebra_from_subuniverse",
           "all_subuniverses", "is_subuniverse", "find_isomorphism", "is_isomorphic",
           "as_rows", "project"]

logger = getSubpowerLogger(name='algebra')

# element ids of product tuples are stored as bytes
ELEMENT_DTYPE = np.uint8
MAX_ALGEBRA_SIZE = 256
CHUNK = 1 << 15


@dataclass(frozen=True)
class Signature:
    """
    Ordered operation symbols with their arities, shared by every algebra of
    a catalog.

    Attributes
    ----------
    symbols : Tuple[Tuple[str,int], ...]
        (name, arity) pairs in declaration order
    """
    symbols : Tuple[Tuple[str,int], ...]

    def __post_init__(self) -> None:
        names = [name for name, _ in self.symbols]
        if len(set(names)) != len(names):
            raise CatalogError('duplicate operation symbol in signature: {}'.format(names))
        for name, arity in self.symbols:
            if not isinstance(arity, int) or arity < 0:
                raise CatalogError('arity of {} must be a non-negative integer'.format(name))
            if arity > settings.arityCap:
                raise CatalogError('arity {} of {} exceeds the arity cap {}'.\
                                   format(arity, name, settings.arityCap))

    @property
    def names(self) -> List[str]:
        return [name for name, _ in self.symbols]

    def arity(self, name : str) -> int:
        for symbol, arity in self.symbols:
            if symbol == name:
                return arity
        raise KeyError('unknown operation symbol {}'.format(name))

    def __contains__(self, name : str) -> bool:
        return name in self.names

    def to_dict(self) -> List[Dict[str,Any]]:
        return [{'symbol': name, 'arity': arity} for name, arity in self.symbols]


class FiniteAlgebra:
    """
    A finite algebra on the universe 0..size-1.

    Each operation is stored as a flat table in row-major order with the first
    argument most significant, so the entry for (a1,...,ar) sits at
    sum(a_i * size**(r-i)). `cubes` holds the same data reshaped to
    (size,)*arity, which lets numpy index it with arrays of arguments.

    Attributes
    ----------
    name : str
    size : int
    signature : Signature
    tables : Dict[str, np.ndarray]
        Flat int64 tables
    cubes : Dict[str, np.ndarray]
        The tables reshaped to one axis per argument
    """

    def __init__(self, name : str, size : int, signature : Signature,
                 tables : Mapping[str, Sequence[int]]) -> None:
        if size < 1:
            raise CatalogError('algebra {} must have positive size'.format(name))
        if size > MAX_ALGEBRA_SIZE:
            raise CatalogError('algebra {} has size {}, at most {} is supported'.\
                               format(name, size, MAX_ALGEBRA_SIZE))
        self.name = name
        self.size = size
        self.signature = signature
        self.tables : Dict[str,np.ndarray] = {}
        self.cubes : Dict[str,np.ndarray] = {}
        for symbol, arity in signature.symbols:
            if symbol not in tables:
                raise CatalogError('algebra {} has no table for {}'.format(name, symbol))
            flat = np.asarray(tables[symbol], dtype=np.int64).ravel()
            if flat.size != size ** arity:
                raise CatalogError('table length of {} in {} is {}, expected {}'.\
                                   format(symbol, name, flat.size, size ** arity))
            if flat.size and (flat.min() < 0 or flat.max() >= size):
                raise CatalogError('entry out of range in table {} of {}'.format(symbol, name))
            flat.setflags(write=False)
            self.tables[symbol] = flat
            self.cubes[symbol] = flat.reshape((size,) * arity)
        extra = set(tables) - set(signature.names)
        if extra:
            raise CatalogError('algebra {} has tables for unknown symbols {}'.\
                               format(name, sorted(extra)))

    def apply(self, symbol : str, *args : Any) -> Any:
        """
        Applies an operation to element ids or to numpy arrays of ids
        (broadcast together).
        """
        cube = self.cubes[symbol]
        if cube.ndim == 0:
            return cube[()] if not args else cube
        return cube[tuple(np.asarray(a) for a in args)]

    @property
    def universe(self) -> range:
        return range(self.size)

    def __repr__(self) -> str:
        return 'FiniteAlgebra({}, size={})'.format(self.name, self.size)

    def to_dict(self) -> Dict[str,Any]:
        return {'name': self.name, 'size': self.size,
                'ops': {s: self.tables[s].tolist() for s in self.signature.names}}


@dataclass(frozen=True)
class Congruence:
    """
    A congruence of a named algebra, stored as one block label per element
    where each block is labeled by its least member.
    """
    algebra : str
    labels : Tuple[int, ...]

    @staticmethod
    def from_labels(algebra : str, labels : Iterable[int]) -> 'Congruence':
        labels = list(labels)
        least : Dict[int,int] = {}
        for x, lab in enumerate(labels):
            least.setdefault(lab, x)
        return Congruence(algebra, tuple(least[lab] for lab in labels))

    @staticmethod
    def identity(algebra : str, size : int) -> 'Congruence':
        return Congruence(algebra, tuple(range(size)))

    @staticmethod
    def full(algebra : str, size : int) -> 'Congruence':
        return Congruence(algebra, (0,) * size)

    @property
    def size(self) -> int:
        return len(self.labels)

    def related(self, a : int, b : int) -> bool:
        return self.labels[a] == self.labels[b]

    def blocks(self) -> List[List[int]]:
        out : Dict[int,List[int]] = {}
        for x, lab in enumerate(self.labels):
            out.setdefault(lab, []).append(x)
        return [out[k] for k in sorted(out)]

    def block_of(self, a : int) -> List[int]:
        return [x for x, lab in enumerate(self.labels) if lab == self.labels[a]]

    def block_count(self) -> int:
        return len(set(self.labels))

    def is_identity(self) -> bool:
        return self.block_count() == self.size

    def is_full(self) -> bool:
        return self.block_count() == 1

    def leq(self, other : 'Congruence') -> bool:
        """True iff every block of self lies inside a block of other."""
        return all(other.labels[x] == other.labels[lab]
                   for x, lab in enumerate(self.labels))

    def meet(self, other : 'Congruence') -> 'Congruence':
        return Congruence.from_labels(self.algebra, list(zip(self.labels, other.labels)))

    def join(self, other : 'Congruence') -> 'Congruence':
        parent = list(range(self.size))

        def find(x : int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for labels in (self.labels, other.labels):
            for x, lab in enumerate(labels):
                rx, rl = find(x), find(lab)
                if rx != rl:
                    parent[max(rx, rl)] = min(rx, rl)
        return Congruence.from_labels(self.algebra, [find(x) for x in range(self.size)])

    def pairs(self) -> List[Tuple[int,int]]:
        return [(a, b) for a in range(self.size) for b in range(self.size)
                if self.labels[a] == self.labels[b]]

    def to_dict(self) -> Dict[str,Any]:
        return {'algebra': self.algebra, 'blocks': self.blocks()}

    def __str__(self) -> str:
        return '|'.join(''.join(str(x) if self.size <= 10 else '{},'.format(x)
                                for x in block) for block in self.blocks())


class ProductContext:
    """
    The direct product of a sequence of factor algebras, in the form used by
    every coordinatewise computation.

    Tables of the distinct factors are padded to the largest factor size
    `amax` and stacked, so that applying an operation to k tuples at once is
    a single gather: entry alg_id * amax**r + sum(a_j * amax**(r-1-j)).

    Parameters
    ----------
    algebras : Sequence[FiniteAlgebra]
        One algebra per coordinate
    derived : Mapping[str, Mapping[str, np.ndarray]], optional
        Extra operations (compiled term tables, e.g. P, p, s) given per
        algebra name as cubes with one axis per argument
    """

    def __init__(self, algebras : Sequence[FiniteAlgebra],
                 derived : Optional[Mapping[str,Mapping[str,np.ndarray]]]=None) -> None:
        if len(algebras) == 0:
            raise PreconditionError('a product context needs at least one factor')
        self.algebras = list(algebras)
        self.n = len(self.algebras)
        self.signature = self.algebras[0].signature
        self.distinct : List[FiniteAlgebra] = []
        ids = []
        position : Dict[str,int] = {}
        for alg in self.algebras:
            if alg.signature != self.signature:
                raise CatalogError('factor {} has a different signature'.format(alg.name))
            if alg.name not in position:
                position[alg.name] = len(self.distinct)
                self.distinct.append(alg)
            ids.append(position[alg.name])
        self.alg_ids = np.asarray(ids, dtype=np.int64)
        self.sizes = np.asarray([alg.size for alg in self.algebras], dtype=np.int64)
        self.amax = int(self.sizes.max())
        self.names = [alg.name for alg in self.algebras]
        self._tables : Dict[str,Tuple[int,np.ndarray]] = {}
        for symbol, arity in self.signature.symbols:
            self._tables[symbol] = (arity, self._stack([alg.cubes[symbol] for alg in self.distinct], arity))
        self.derived_symbols : List[str] = []
        for symbol, per_algebra in (derived or {}).items():
            cubes = []
            for alg in self.distinct:
                if alg.name not in per_algebra:
                    break
                cubes.append(per_algebra[alg.name])
            else:
                arity = cubes[0].ndim
                self._tables[symbol] = (arity, self._stack(cubes, arity))
                self.derived_symbols.append(symbol)

    def _stack(self, cubes : Sequence[np.ndarray], arity : int) -> np.ndarray:
        padded = np.zeros((len(cubes),) + (self.amax,) * arity, dtype=ELEMENT_DTYPE)
        for i, cube in enumerate(cubes):
            padded[(i,) + tuple(slice(0, s) for s in cube.shape)] = cube
        return padded.ravel()

    def arity(self, symbol : str) -> int:
        return self._tables[symbol][0]

    def has_symbol(self, symbol : str) -> bool:
        return symbol in self._tables

    def table(self, symbol : str) -> Tuple[int, np.ndarray]:
        """(arity, flat stacked table) of a symbol, for callers doing their own gathers."""
        return self._tables[symbol]

    def apply(self, symbol : str, args : Sequence[Any],
              coords : Optional[np.ndarray]=None) -> np.ndarray:
        """
        Applies an operation coordinatewise.

        Parameters
        ----------
        symbol : str
            Basic or derived operation symbol
        args : Sequence of array_like
            One array per argument, each of shape (..., n) (or (..., len(coords)))
        coords : np.ndarray, optional
            Restricts the evaluation to these coordinates

        Returns
        -------
        np.ndarray
            uint8 array of the broadcast shape of the arguments
        """
        arity, table = self._tables[symbol]
        if len(args) != arity:
            raise TypeError('{} takes {} arguments, got {}'.format(symbol, arity, len(args)))
        ids = self.alg_ids if coords is None else self.alg_ids[coords]
        idx = ids * (self.amax ** arity)
        for j, a in enumerate(args):
            idx = idx + np.asarray(a, dtype=np.int64) * (self.amax ** (arity - 1 - j))
        return table[idx]

    def contains(self, row : Sequence[int]) -> bool:
        row = np.asarray(row)
        return row.shape == (self.n,) and bool(np.all((row >= 0) & (row < self.sizes)))

    def restrict(self, coords : Sequence[int]) -> 'ProductContext':
        """The product of the factors at the given coordinates."""
        sub = ProductContext.__new__(ProductContext)
        sub.algebras = [self.algebras[i] for i in coords]
        sub.n = len(sub.algebras)
        sub.signature = self.signature
        sub.distinct = self.distinct
        sub.alg_ids = self.alg_ids[list(coords)]
        sub.sizes = self.sizes[list(coords)]
        sub.amax = self.amax
        sub.names = [self.names[i] for i in coords]
        sub._tables = self._tables
        sub.derived_symbols = self.derived_symbols
        return sub

    def size(self) -> int:
        return int(np.prod(self.sizes.astype(object)))

    def __repr__(self) -> str:
        return 'ProductContext({})'.format(' x '.join(self.names))


def as_rows(tuples : Any, context : ProductContext) -> np.ndarray:
    """
    Converts a collection of product tuples to a (k, n) uint8 array and
    checks every coordinate is in range.

    Raises
    ------
    PreconditionError
        Raised on a length mismatch or an out-of-range coordinate
    """
    rows = np.asarray(tuples, dtype=np.int64)
    if rows.ndim == 1:
        rows = rows.reshape(1, -1)
    if rows.size == 0:
        return np.zeros((0, context.n), dtype=ELEMENT_DTYPE)
    if rows.ndim != 2 or rows.shape[1] != context.n:
        raise PreconditionError('tuples must have length {}, got shape {}'.\
                                format(context.n, rows.shape))
    if np.any(rows < 0) or np.any(rows >= context.sizes):
        raise PreconditionError('tuple coordinate out of range for {}'.format(context))
    return rows.astype(ELEMENT_DTYPE)


def project(rows : np.ndarray, coords : Sequence[int]) -> np.ndarray:
    return np.asarray(rows)[..., list(coords)]


class Closure:
    """
    A subalgebra of a product, listed in generation order.

    Elements are numbered as they are discovered: generators first (input
    order, duplicates skipped), then constants, then one wave after another.
    `parents[i]` records how element i was produced: (None, (g,)) for the
    g-th generator, otherwise (symbol, argument ids), all arguments being
    earlier elements.
    """

    def __init__(self, context : ProductContext) -> None:
        self.context = context
        self._buf = np.zeros((64, context.n), dtype=ELEMENT_DTYPE)
        self._size = 0
        self.index : Dict[bytes,int] = {}
        self.parents : List[Tuple[Optional[str],Tuple[int,...]]] = []
        self.waves : List[int] = []
        self.found : Optional[int] = None
        self.complete = False

    @property
    def elements(self) -> np.ndarray:
        return self._buf[:self._size]

    def __len__(self) -> int:
        return self._size

    def __contains__(self, row : Any) -> bool:
        return self.id_of(row) is not None

    def id_of(self, row : Any) -> Optional[int]:
        key = np.ascontiguousarray(row, dtype=ELEMENT_DTYPE).tobytes()
        return self.index.get(key)

    def to_set(self) -> Set[Tuple[int,...]]:
        return {tuple(int(x) for x in row) for row in self.elements}

    def _append(self, row : np.ndarray, key : bytes,
                parent : Tuple[Optional[str],Tuple[int,...]]) -> int:
        if self._size == self._buf.shape[0]:
            grown = np.zeros((2 * self._size, self.context.n), dtype=ELEMENT_DTYPE)
            grown[:self._size] = self._buf[:self._size]
            self._buf = grown
        self._buf[self._size] = row
        self.index[key] = self._size
        self.parents.append(parent)
        self._size += 1
        return self._size - 1

    def add(self, row : np.ndarray, parent : Tuple[Optional[str],Tuple[int,...]]) -> int:
        key = np.ascontiguousarray(row, dtype=ELEMENT_DTYPE).tobytes()
        existing = self.index.get(key)
        if existing is not None:
            return existing
        return self._append(row, key, parent)

    def absorb(self, results : np.ndarray, symbol : str,
               argids : Sequence[np.ndarray], target : Optional[bytes]=None) -> None:
        """Adds the new rows of a batch of results, in batch order."""
        results = np.ascontiguousarray(results, dtype=ELEMENT_DTYPE)
        if results.ndim == 1:
            results = results.reshape(1, -1)
        keys = results.view(np.dtype((np.void, results.shape[1]))).ravel()
        _, first = np.unique(keys, return_index=True)
        for pos in np.sort(first):
            key = keys[pos].tobytes()
            if key in self.index:
                continue
            idx = self._append(results[pos], key,
                               (symbol, tuple(int(a[pos]) for a in argids)))
            if target is not None and key == target:
                self.found = idx
                return


def _cap_label(cap_name : str) -> str:
    return 'oracle cap' if cap_name.startswith('oracle') else 'closure cap'


def closure_steps(gens : Any, context : ProductContext, target : Optional[Any]=None,
                  cap : Optional[int]=None, cap_name : str='closureCap',
                  work_cap : Optional[int]=None,
                  work_cap_name : str='closureWorkCap') -> Iterator[Closure]:
    """
    Generates a subalgebra of a product lazily: yields the growing Closure
    once after the generators and constants are in, then after every
    evaluated chunk, so callers can inspect elements in generation order and
    stop early. `complete` is set once no wave adds anything.

    Raises
    ------
    PreconditionError
        Raised if the generator set is empty or a tuple is malformed
    CapExceededError
        Raised if the element count exceeds `cap` (default settings.closureCap,
        reported under `cap_name`) or the evaluated argument tuples exceed
        `work_cap` (default settings.closureWorkCap, reported under
        `work_cap_name`)
    """
    cap = settings.closureCap if cap is None else cap
    work_cap = settings.closureWorkCap if work_cap is None else work_cap
    rows = as_rows(gens, context)
    if len(rows) == 0:
        raise PreconditionError('the generator set must be nonempty')
    closure = Closure(context)
    target_key = None
    if target is not None:
        target_key = as_rows(target, context)[0].tobytes()
    for g, row in enumerate(rows):
        idx = closure.add(row, (None, (g,)))
        if target_key is not None and closure.found is None and \
           closure.elements[idx].tobytes() == target_key:
            closure.found = idx
    for symbol, arity in context.signature.symbols:
        if arity == 0:
            const = context.apply(symbol, [])
            closure.absorb(const.reshape(1, -1), symbol, [], target_key)
    yield closure

    symbols = [(s, a) for s, a in context.signature.symbols if a > 0]
    old, work = 0, 0
    while old < len(closure):
        new_end = len(closure)
        closure.waves.append(new_end)
        for symbol, arity in symbols:
            for j in range(arity):
                # position j is the first argument drawn from the last wave
                shape = (old,) * j + (new_end - old,) + (new_end,) * (arity - j - 1)
                offsets = (0,) * j + (old,) + (0,) * (arity - j - 1)
                total = int(np.prod(shape, dtype=np.int64))
                if total == 0:
                    continue
                work += total
                if work > work_cap:
                    raise CapExceededError('{} ({}): more than {} argument tuples evaluated'.\
                                           format(_cap_label(work_cap_name), work_cap_name, work_cap),
                                           work_cap_name, work_cap)
                for start in range(0, total, CHUNK):
                    flat = np.arange(start, min(total, start + CHUNK), dtype=np.int64)
                    argids = [p + off for p, off in zip(np.unravel_index(flat, shape), offsets)]
                    elements = closure.elements
                    result = context.apply(symbol, [elements[a] for a in argids])
                    closure.absorb(result, symbol, argids, target_key)
                    if len(closure) > cap:
                        raise CapExceededError('{} ({}): more than {} elements'.\
                                               format(_cap_label(cap_name), cap_name, cap), cap_name, cap)
                    yield closure
        logger.debug('closure wave done: {} elements, {} argument tuples'.\
                     format(len(closure), work))
        old = new_end
    closure.complete = True


@typechecked
def subalgebra_closure(gens : Any, context : ProductContext,
                       target : Optional[Any]=None,
                       cap : Optional[int]=None) -> Closure:
    """
    Generates the subalgebra of a product spanned by a set of tuples.

    Semi-naive breadth-first closure: each wave applies every operation only
    to argument tuples that involve at least one element of the previous
    wave, in chunks evaluated with one numpy gather per chunk.

    Parameters
    ----------
    gens : array_like
        Nonempty collection of generator tuples
    context : ProductContext
        The product the tuples live in
    target : array_like, optional
        Stop as soon as this tuple is produced (membership queries)
    cap : int, optional
        Element cap, defaults to settings.closureCap

    Returns
    -------
    Closure
        The subalgebra in generation order with per-element provenance; when
        `target` is given and reached, `found` holds its id and the closure
        may be partial

    Raises
    ------
    PreconditionError
        Raised if the generator set is empty or a tuple is malformed
    CapExceededError
        Raised if the element count exceeds the closure cap or the number of
        evaluated argument tuples exceeds settings.closureWorkCap

    Examples
    --------
    >>> cl = subalgebra_closure([[1,0,0],[0,1,0],[0,0,1]], cat.context(['Z2']*3))
    >>> sorted(cl.to_set())
    [(0, 0, 1), (0, 1, 0), (1, 0, 0), (1, 1, 1)]
    """
    closure = None
    for closure in closure_steps(gens, context, target=target, cap=cap):
        if closure.found is not None:
            logger.debug('target reached after {} elements'.format(len(closure)))
            break
    return closure


@typechecked
def eval_circuit(circuit : Any, target : Union[FiniteAlgebra,ProductContext],
                 args : Any,
                 derived : Optional[Mapping[str,np.ndarray]]=None,
                 coords : Optional[np.ndarray]=None) -> Any:
    """
    Evaluates a circuit (inputs 0..input_count-1, then gates) in an algebra or,
    coordinatewise, in a product.

    Parameters
    ----------
    circuit : Circuit
        Any object with `input_count`, `gates` [(symbol, operand ids)] and
        `outputs`
    target : FiniteAlgebra or ProductContext
    args : Sequence
        Element ids / arrays of ids for an algebra, tuples or (k, n) batches for
        a product
    derived : Mapping[str, np.ndarray], optional
        Cubes for derived symbols (P, p, ...) when evaluating in a single
        algebra; products carry their derived tables themselves
    coords : np.ndarray, optional
        Product evaluation restricted to these coordinates (args already
        restricted)

    Returns
    -------
    The value of the single output, or a tuple of values for several outputs

    Raises
    ------
    TypeError
        Raised if the number of arguments differs from the input count
    """
    if len(args) != circuit.input_count:
        raise TypeError('circuit has {} inputs, got {} arguments'.\
                        format(circuit.input_count, len(args)))
    values : List[Any] = list(args) if isinstance(target, FiniteAlgebra) else \
        [np.asarray(a, dtype=np.int64) for a in args]
    for symbol, operands in circuit.gates:
        ops = [values[i] for i in operands]
        if isinstance(target, FiniteAlgebra):
            if derived is not None and symbol in derived:
                values.append(derived[symbol][tuple(np.asarray(o) for o in ops)])
            else:
                values.append(target.apply(symbol, *ops))
        else:
            values.append(target.apply(symbol, ops, coords=coords))
    outs = [values[o] for o in circuit.outputs]
    return outs[0] if len(outs) == 1 else tuple(outs)


def _assignments(size : int, count : int) -> np.ndarray:
    total = size ** count
    if total > settings.identityCap:
        raise CapExceededError('identity check needs {} assignments, cap is {}'.\
                               format(total, settings.identityCap), 'identityCap',
                               settings.identityCap)
    if count == 0:
        return np.zeros((0, 1), dtype=np.int64)
    return np.indices((size,) * count).reshape(count, -1)


def identity_counterexample(alg : FiniteAlgebra, lhs : Any, rhs : Any,
                            derived : Optional[Mapping[str,np.ndarray]]=None) \
                            -> Optional[Tuple[int,...]]:
    """
    Returns the first assignment (in lexicographic order) on which two
    circuits disagree in `alg`, or None if they induce the same operation.
    """
    if lhs.input_count != rhs.input_count:
        raise PreconditionError('identity sides have {} and {} variables'.\
                                format(lhs.input_count, rhs.input_count))
    grid = _assignments(alg.size, lhs.input_count)
    args = list(grid) if lhs.input_count else []
    left = np.broadcast_to(eval_circuit(lhs, alg, args, derived=derived), grid.shape[1:])
    right = np.broadcast_to(eval_circuit(rhs, alg, args, derived=derived), grid.shape[1:])
    bad = np.nonzero(left != right)[0]
    if bad.size == 0:
        return None
    return tuple(int(x) for x in grid[:, bad[0]])


@typechecked
def check_identity(alg : FiniteAlgebra, lhs : Any, rhs : Any,
                   derived : Optional[Mapping[str,np.ndarray]]=None) -> bool:
    """
    Decides whether two circuits over the same variables induce equal term
    operations on `alg`, by exhausting all size**v assignments.

    Raises
    ------
    PreconditionError
        Raised if the circuits have different variable counts
    CapExceededError
        Raised if size**v exceeds settings.identityCap

    Examples
    --------
    >>> check_identity(z2, m_xxy, proj_y)
    True
    """
    return identity_counterexample(alg, lhs, rhs, derived) is None


@typechecked
def quotient(alg : FiniteAlgebra, theta : Congruence,
             name : Optional[str]=None) -> Tuple[FiniteAlgebra, List[int]]:
    """
    Builds the quotient algebra alg/theta.

    Blocks are numbered 0..k-1 in the order of their least members.

    Returns
    -------
    Tuple[FiniteAlgebra, List[int]]
        The quotient and the natural map (element -> block number)

    Raises
    ------
    PreconditionError
        Raised if theta is not a congruence of alg
    """
    if theta.size != alg.size:
        raise PreconditionError('partition of size {} does not fit {}'.format(theta.size, alg.name))
    labels = np.asarray(theta.labels, dtype=np.int64)
    reps = sorted(set(theta.labels))
    renumber = np.zeros(alg.size, dtype=np.int64)
    for k, r in enumerate(reps):
        renumber[r] = k
    natural = renumber[labels]
    tables = {}
    for symbol, arity in alg.signature.symbols:
        cube = alg.cubes[symbol]
        if arity == 0:
            tables[symbol] = [int(natural[int(cube)])]
            continue
        at_reps = cube[np.ix_(*([labels] * arity))]
        if not np.array_equal(labels[cube], labels[at_reps]):
            raise PreconditionError('partition {} is not a congruence of {} (operation {})'.\
                                    format(theta, alg.name, symbol))
        reps_arr = np.asarray(reps, dtype=np.int64)
        tables[symbol] = natural[cube[np.ix_(*([reps_arr] * arity))]].ravel().tolist()
    qname = name or '{}/{}'.format(alg.name, theta)
    return FiniteAlgebra(qname, len(reps), alg.signature, tables), natural.tolist()


def algebra_from_subuniverse(name : str, tuples : Sequence[Sequence[int]],
                             context : ProductContext) -> FiniteAlgebra:
    """
    The subalgebra of a product induced on a closed set of tuples, with the
    tuples numbered in sorted order.

    Raises
    ------
    PreconditionError
        Raised if the set is not closed under the operations
    """
    ordered = sorted({tuple(int(x) for x in t) for t in tuples})
    rows = as_rows(ordered, context)
    position = {row.tobytes(): i for i, row in enumerate(rows)}
    size = len(ordered)
    tables = {}
    for symbol, arity in context.signature.symbols:
        grid = np.indices((size,) * arity).reshape(arity, -1) if arity else np.zeros((0, 1), dtype=np.int64)
        result = context.apply(symbol, [rows[g] for g in grid]) if arity else \
            context.apply(symbol, []).reshape(1, -1)
        result = np.ascontiguousarray(result, dtype=ELEMENT_DTYPE)
        table = []
        for row in result:
            key = row.tobytes()
            if key not in position:
                raise PreconditionError('tuple set is not closed under {}'.format(symbol))
            table.append(position[key])
        tables[symbol] = table
    return FiniteAlgebra(name, size, context.signature, tables)


def _single(alg : FiniteAlgebra) -> ProductContext:
    return ProductContext([alg])


def is_subuniverse(alg : Optional[FiniteAlgebra], subset : Iterable[Any],
                   context : Optional[ProductContext]=None) -> bool:
    """
    Whether a set of elements (ids, or tuples of `context`) is closed under
    every operation. The empty set is closed iff there are no constants.
    """
    ctx = context or _single(alg)
    elements = {tuple(int(v) for v in np.atleast_1d(x)) for x in subset}
    if not elements:
        return not any(arity == 0 for _, arity in ctx.signature.symbols)
    for closure in closure_steps(sorted(elements), ctx):
        if len(closure) > len(elements):
            return False
    return True


def all_subuniverses(alg : Optional[FiniteAlgebra],
                     context : Optional[ProductContext]=None) -> List[frozenset]:
    """
    Enumerates every nonempty subuniverse, smallest generating sets first.

    Works on a single algebra (elements are ids) or, when `context` is given,
    on the product described by it (elements are tuples). Each subuniverse
    is found as the closure of a known subuniverse plus one element.

    Raises
    ------
    CapExceededError
        Raised if more than settings.subuniverseCap subuniverses exist
    """
    ctx = context or _single(alg)
    universe = [tuple(int(v) for v in t) for t in np.ndindex(*[int(s) for s in ctx.sizes])]
    found : Dict[frozenset,None] = {}
    queue : List[frozenset] = []

    def close(elements : Iterable[Tuple[int,...]]) -> frozenset:
        return frozenset(subalgebra_closure(list(elements), ctx).to_set())

    for x in universe:
        s = close([x])
        if s not in found:
            found[s] = None
            queue.append(s)
    head = 0
    while head < len(queue):
        current = queue[head]
        head += 1
        for x in universe:
            if x in current:
                continue
            s = close(sorted(current) + [x])
            if s not in found:
                found[s] = None
                queue.append(s)
                if len(found) > settings.subuniverseCap:
                    raise CapExceededError('subuniverse enumeration exceeds {}'.\
                                           format(settings.subuniverseCap),
                                           'subuniverseCap', settings.subuniverseCap)
    subs = list(found)
    if context is None:
        return [frozenset(t[0] for t in s) for s in subs]
    return subs


def _generating_set(alg : FiniteAlgebra) -> List[int]:
    gens : List[int] = []
    covered : Set[int] = set()
    for x in range(alg.size):
        if x not in covered:
            gens.append(x)
            covered = {t[0] for t in subalgebra_closure([[g] for g in gens], _single(alg)).to_set()}
    return gens


def find_isomorphism(a : FiniteAlgebra, b : FiniteAlgebra) -> Optional[List[int]]:
    """
    Searches for an isomorphism a -> b.

    Candidate images are assigned to a greedy generating set of `a`; each
    assignment is extended along the closure derivation and then checked
    against every table.

    Returns
    -------
    List[int] or None
        phi with phi[x] the image of x
    """
    if a.size != b.size or a.signature != b.signature:
        return None
    gens = _generating_set(a)
    closure = subalgebra_closure([[g] for g in gens], _single(a))
    order = [int(row[0]) for row in closure.elements]
    for images in itertools.permutations(range(b.size), len(gens)):
        phi = np.full(a.size, -1, dtype=np.int64)
        for x, parent in zip(order, closure.parents):
            symbol, args = parent
            if symbol is None:
                phi[x] = images[args[0]]
            else:
                phi[x] = int(b.apply(symbol, *[phi[order[i]] for i in args]))
        if np.any(phi < 0) or len(set(phi.tolist())) != a.size:
            continue
        if all(np.array_equal(phi[a.cubes[s]], b.cubes[s][np.ix_(*([phi] * ar))] if ar else b.cubes[s])
               for s, ar in a.signature.symbols):
            return phi.tolist()
    return None


def is_isomorphic(a : FiniteAlgebra, b : FiniteAlgebra) -> bool:
    return find_isomorphism(a, b) is not None


@dataclass
class HsEntry:
    """
    How a member of HS(K) arises: the subuniverse of a base algebra it lives
    on (in base ids, sorted) and the congruence of that subalgebra it is the
    quotient by. `natural[i]` is the element of the member that the i-th
    subuniverse element maps to.
    """
    name : str
    parent : str
    subuniverse : Tuple[int, ...]
    congruence : Congruence
    natural : Tuple[int, ...]

    def lift(self, element : int) -> int:
        """A base-algebra preimage of an element of the member."""
        return self.subuniverse[self.natural.index(element)]


class Catalog:
    """
    The class K: finitely many finite algebras over one signature, plus the
    cube term and the derived data configured on it.

    Attributes
    ----------
    signature : Signature
    algebras : Dict[str, FiniteAlgebra]
    d : Optional[int]
        Cube parameter, set when a parallelogram term is configured
    e : Optional[int]
        Fork exponent
    cube_term : Optional[Circuit]
        The (1, d-1)-parallelogram term P
    difference_term : Optional[Circuit]
    circuits : Dict[str, Circuit]
        Derived circuits (s, p, xy, ...)
    derived_tables : Dict[str, Dict[str, np.ndarray]]
        Compiled derived operations per algebra name
    hs : Dict[str, HsEntry]
        Provenance of members added by hs_catalog
    """

    def __init__(self, signature : Signature, algebras : Sequence[FiniteAlgebra],
                 raw_terms : Optional[Mapping[str,Any]]=None) -> None:
        self.signature = signature
        self.algebras : Dict[str,FiniteAlgebra] = {}
        for alg in algebras:
            if alg.name in self.algebras:
                raise CatalogError('duplicate algebra name {}'.format(alg.name))
            if alg.signature != signature:
                raise CatalogError('algebra {} does not use the catalog signature'.format(alg.name))
            self.algebras[alg.name] = alg
        self.base_names = list(self.algebras)
        self.d : Optional[int] = None
        self.e : Optional[int] = None
        self.cube_term : Any = None
        self.difference_term : Any = None
        self.circuits : Dict[str,Any] = {}
        self.derived_tables : Dict[str,Dict[str,np.ndarray]] = {}
        self.hs : Dict[str,HsEntry] = {}
        self.raw_terms = dict(raw_terms or {})
        self.cache : Dict[Any,Any] = {}
        self.lock = threading.RLock()

    def __getitem__(self, name : str) -> FiniteAlgebra:
        try:
            return self.algebras[name]
        except KeyError:
            raise CatalogError('unknown algebra {}'.format(name))

    def __contains__(self, name : str) -> bool:
        return name in self.algebras

    def names(self) -> List[str]:
        return list(self.algebras)

    @property
    def max_size(self) -> int:
        return max(alg.size for alg in self.algebras.values())

    def context(self, names : Sequence[str]) -> ProductContext:
        return ProductContext([self[name] for name in names], self.derived_tables)

    def memo(self, key : Any, compute : Callable[[], Any]) -> Any:
        """Per-catalog memoization under the catalog lock."""
        with self.lock:
            if key not in self.cache:
                self.cache[key] = compute()
            return self.cache[key]

    def add_algebra(self, alg : FiniteAlgebra, entry : Optional[HsEntry]=None) -> None:
        with self.lock:
            if alg.name in self.algebras:
                raise CatalogError('duplicate algebra name {}'.format(alg.name))
            self.algebras[alg.name] = alg
            if entry is not None:
                self.hs[alg.name] = entry

    def to_dict(self) -> Dict[str,Any]:
        return {'signature': self.signature.to_dict(),
                'algebras': [alg.to_dict() for alg in self.algebras.values()]}


@typechecked
def catalog_from_dict(data : Mapping[str,Any]) -> Catalog:
    """
    Builds a validated catalog from the parsed algebra-file JSON.

    Raises
    ------
    CatalogError
        Raised on a missing key, a bad table length, an out-of-range entry or a
        duplicate name
    """
    try:
        signature = Signature(tuple((str(op['symbol']), int(op['arity']))
                                    for op in data['signature']))
        algebras = [FiniteAlgebra(str(a['name']), int(a['size']), signature, a['ops'])
                    for a in data['algebras']]
    except (KeyError, TypeError) as e:
        raise CatalogError('malformed algebra file: missing or invalid {}'.format(e))
    raw_terms = {key: data[key] for key in ('cube_term', 'difference_term') if key in data}
    catalog = Catalog(signature, algebras, raw_terms)
    logger.debug('loaded catalog with algebras {}'.format(catalog.names()))
    return catalog


@typechecked
def load_catalog(algebra_file : str) -> Catalog:
    """
    Loads an algebra file.

    Parameters
    ----------
    algebra_file : str
        Path to a JSON file of the form
        {"signature":[{"symbol":"m","arity":3}],
         "algebras":[{"name":"Z2","size":2,"ops":{"m":[0,1,1,0,1,0,0,1]}}]}

    Returns
    -------
    Catalog
        Validated catalog; d and e stay unset until a cube term is configured

    Raises
    ------
    CatalogError
        Raised if the file is not valid JSON or fails validation
    """
    try:
        with open(algebra_file, 'r') as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise CatalogError('malformed JSON in {}: {}'.format(algebra_file, e))
    return catalog_from_dict(data)
