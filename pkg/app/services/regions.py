"""Regiones tasa-distorsión alcanzables como nubes de puntos cerradas por dominancia.

Cada punto conserva su testigo (q1, q2, ψ) para poder reverificar las desigualdades que lo definen.
Las consultas de pertenencia y minimización resuelven programas lineales sobre combinaciones
convexas de los puntos (scipy.optimize.linprog) y la envolvente se calcula con scipy.spatial.ConvexHull.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property, reduce
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, QhullError

from .errors import BudgetExceededError, DimensionMismatchError
from .optimizers import (BETA_RANGE, LN2, AuxSpec, best_index, bisect_slope, blahut_arimoto, corner_terms,
                         distortion_range, exponentiated_gradient, information_bottleneck, parametric_rd,
                         random_channels, restart_rng, side_info_am)
from .probability import (ChainModel, ProbabilityTable, block_source, compose_chain, constant_channel, entropy,
                          identity_channel)
from .two_terminal import CornerRates, DistortionCriterion, ReconstructionMap, corner_rates, optimal_reconstruction

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-6
SINGLE_LETTER_TOLERANCE = 1.5e-2

FAMILY_EG_CORNER1 = 1
FAMILY_EG_CORNER0 = 2
FAMILY_SIDE_1 = 3
FAMILY_SIDE_2 = 4
FAMILY_BA_1 = 5
FAMILY_BA_2 = 6
FAMILY_BOTTLENECK = 7

Constraint = Tuple[np.ndarray, float]


@dataclass(frozen=True)
class RateDistortionPoint:
    r1: float
    r2: Optional[float] = None
    d: Optional[float] = None


@dataclass(frozen=True, eq=False)
class Witness:
    witness_id: str
    family: str
    q1: np.ndarray
    q2: np.ndarray
    psi: Optional[np.ndarray] = None

    def to_json_dict(self) -> dict:
        return {'witnessId': self.witness_id, 'family': self.family, 'q1': np.asarray(self.q1).tolist(),
                'q2': np.asarray(self.q2).tolist(),
                'psi': None if self.psi is None else np.asarray(self.psi).tolist()}


@dataclass(frozen=True)
class ContainmentResult:
    contained: bool
    worst_violation: float
    violations: Tuple[float, ...] = ()


@dataclass
class Region:
    problem: str
    order: int
    coords: Tuple[str, ...]
    points: np.ndarray
    witness_ids: List[Optional[str]] = field(default_factory=list)
    witnesses: Dict[str, Witness] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    constraints: Optional[Callable[[Witness], List[Constraint]]] = field(default=None, repr=False)

    def __post_init__(self):
        self.points = np.asarray(self.points, float).reshape(-1, len(self.coords))
        if not self.witness_ids:
            self.witness_ids = [None] * len(self.points)

    def __len__(self) -> int:
        return int(self.points.shape[0])

    def axis(self, name: str) -> int:
        if name not in self.coords:
            raise DimensionMismatchError(f'la región {self.problem} no tiene la coordenada {name}')
        return self.coords.index(name)

    def as_points(self) -> List[RateDistortionPoint]:
        out = []
        for row in self.points:
            values = dict(zip(self.coords, row))
            out.append(RateDistortionPoint(values['r1'], values.get('r2'), values.get('d')))
        return out

    def minimize(self, objective: Union[str, Dict[str, float]], bounds: Optional[Dict[str, float]] = None) -> float:
        """min de una combinación lineal de coordenadas sobre la envolvente convexa, con cotas superiores."""
        if not len(self):
            return math.inf
        weights = {objective: 1.0} if isinstance(objective, str) else dict(objective)
        c = sum(w * self.points[:, self.axis(k)] for k, w in weights.items())
        bounds = bounds or {}
        a_ub = np.array([self.points[:, self.axis(k)] for k in bounds]) if bounds else None
        b_ub = np.array([float(v) for v in bounds.values()]) if bounds else None
        res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=np.ones((1, len(self))), b_eq=[1.0],
                      bounds=[(0, None)] * len(self), method='highs')
        if res.status != 0:
            return math.inf
        return float(res.fun)

    def violation(self, point: Sequence[float]) -> float:
        """Menor t >= 0 tal que point + t·1 domina una combinación convexa de la región."""
        point = np.asarray(point, float)
        if point.shape != (len(self.coords),):
            raise DimensionMismatchError(f'punto de dimensión {point.shape}, la región usa {self.coords}')
        if not len(self):
            return math.inf
        m = len(self)
        c = np.zeros(m + 1)
        c[-1] = 1.0
        a_ub = np.hstack([self.points.T, -np.ones((len(self.coords), 1))])
        a_eq = np.hstack([np.ones((1, m)), np.zeros((1, 1))])
        res = linprog(c, A_ub=a_ub, b_ub=point, A_eq=a_eq, b_eq=[1.0],
                      bounds=[(0, None)] * m + [(None, None)], method='highs')
        return max(float(res.fun), 0.0)

    def contains(self, point: Sequence[float], tol: float = DEFAULT_TOLERANCE) -> bool:
        return self.violation(point) <= tol

    def verify(self, tol: float = 1e-9) -> bool:
        """Recalcula las desigualdades de cada punto a partir de su testigo."""
        if self.constraints is None:
            return True
        for row, wid in zip(self.points, self.witness_ids):
            if wid is None:
                continue
            for a, b in self.constraints(self.witnesses[wid]):
                if float(np.dot(a, row)) < b - tol:
                    logger.warning('punto %s viola %s >= %.9g', wid, a, b)
                    return False
        return True

    def translated(self, shift: Dict[str, float]) -> 'Region':
        delta = np.zeros(len(self.coords))
        for k, v in shift.items():
            delta[self.axis(k)] = v
        return Region(self.problem, self.order, self.coords, self.points + delta, list(self.witness_ids),
                      dict(self.witnesses), dict(self.meta), None)

    def rows(self) -> List[dict]:
        out = []
        for row, wid in zip(self.points, self.witness_ids):
            values = dict(zip(self.coords, row))
            out.append({'problem': self.problem, 'order': self.order, 'r1': values.get('r1'),
                        'r2': values.get('r2'), 'd': values.get('d'), 'witnessId': wid})
        return out

    def witness_json(self) -> Dict[str, dict]:
        return {k: w.to_json_dict() for k, w in sorted(self.witnesses.items())}


def check_containment(inner: Region, outer: Region, tol: float = DEFAULT_TOLERANCE) -> ContainmentResult:
    if inner.coords != outer.coords:
        raise DimensionMismatchError(f'coordenadas {inner.coords} y {outer.coords} no coinciden')
    violations = tuple(outer.violation(p) for p in inner.points)
    worst = max(violations, default=0.0)
    return ContainmentResult(contained=worst <= tol, worst_violation=worst, violations=violations)


@dataclass(frozen=True)
class HullReport:
    facets: np.ndarray
    corners: np.ndarray
    corner_indices: Tuple[int, ...]


def hull_and_corners(region: Region) -> HullReport:
    """Envolvente de la nube cerrada por dominancia: los puntos se aumentan con desplazamientos +M por eje."""
    if not len(region):
        raise DimensionMismatchError('región vacía')
    pts, first = np.unique(np.round(region.points, 12), axis=0, return_index=True)
    k = pts.shape[1]
    span = float(np.ptp(pts)) if pts.size else 0.0
    big = span + 1.0
    shifted = [pts + big * np.eye(k)[j] for j in range(k)]
    cloud = np.vstack([pts] + shifted)
    try:
        hull = ConvexHull(cloud)
    except QhullError:
        hull = ConvexHull(cloud, qhull_options='QJ')
    idx = sorted(int(i) for i in hull.vertices if i < len(pts))
    corners = pts[idx]
    order = np.lexsort(corners.T[::-1])
    return HullReport(facets=hull.equations, corners=corners[order],
                      corner_indices=tuple(int(first[idx[i]]) for i in order))


def region_from_corners(corners: CornerRates, d: Optional[float] = None, problem: str = 'corners') -> Region:
    c = corners.per_symbol()
    pts = [list(c.corner0), list(c.corner1)]
    coords: Tuple[str, ...] = ('r1', 'r2')
    if d is not None:
        pts = [p + [d] for p in pts]
        coords = ('r1', 'r2', 'd')
    return Region(problem, corners.block_order, coords, np.array(pts), ['corner0', 'corner1'])


# ---------------------------------------------------------------------------
# Funciones de una terminal
# ---------------------------------------------------------------------------

def _as_matrix(d: Union[DistortionCriterion, np.ndarray]) -> np.ndarray:
    return d.matrix if isinstance(d, DistortionCriterion) else np.asarray(d, float)


def _as_pmf(source) -> np.ndarray:
    arr = source.mass if isinstance(source, ProbabilityTable) else np.asarray(source, float)
    return np.asarray(arr, float).ravel()


def shannon_rd(source, d: Union[DistortionCriterion, np.ndarray], D: float) -> float:
    """R(D) = min I(X;X̂) con E d <= D (Blahut-Arimoto con bisección sobre la pendiente)."""
    if D < 0:
        raise ValueError('D debe ser >= 0')
    rate, _ = parametric_rd([(1.0, _as_pmf(source))], _as_matrix(d), float(D))
    return rate


def conditional_rd(joint: ProbabilityTable, d: Union[DistortionCriterion, np.ndarray], D: float) -> float:
    """min I(X1;X̂|X2) con X2 disponible en ambos extremos."""
    if D < 0:
        raise ValueError('D debe ser >= 0')
    p2 = joint.marginal_array(1)
    sources = [(float(p2[b]), joint.mass[:, b] / p2[b]) for b in range(p2.size) if p2[b] > 0]
    rate, _ = parametric_rd(sources, _as_matrix(d), float(D))
    return rate


# ---------------------------------------------------------------------------
# Familias de testigos
# ---------------------------------------------------------------------------

def _check_order(source: ProbabilityTable, order: int) -> None:
    if order < 1:
        raise ValueError('el orden n debe ser >= 1')
    cap = 2 if all(s == 2 for s in source.shape) else 1
    if order > cap:
        raise BudgetExceededError(f'orden {order} supera el máximo {cap} para alfabetos {source.shape}',
                                  required=order, budget=cap)


@dataclass(eq=False)
class _Setup:
    source: ProbabilityTable
    order: int
    criterion: Optional[DistortionCriterion]
    aux: AuxSpec

    @cached_property
    def p12(self) -> np.ndarray:
        return block_source(self.source, self.order).mass

    @cached_property
    def cost(self) -> Optional[np.ndarray]:
        if self.criterion is None:
            return None
        return np.ascontiguousarray(self.criterion.source_cost(self.source.shape, self.order))

    @property
    def blocks(self) -> Tuple[int, int]:
        return self.p12.shape

    @property
    def cards(self) -> Tuple[int, int]:
        return self.aux.cards(self.blocks)

    @property
    def scale(self) -> float:
        return float(self.criterion.d_max) if self.criterion is not None else 1.0


class _Collector:
    """Acumula testigos con identificadores estables y ψ óptimo recalculado sobre el modelo exacto."""

    def __init__(self, setup: _Setup):
        self.setup = setup
        self.witnesses: Dict[str, Witness] = {}

    def model(self, q1: np.ndarray, q2: np.ndarray) -> ChainModel:
        return compose_chain(self.setup.source, q1, q2, self.setup.order)

    def add(self, family: str, key: str, q1: np.ndarray, q2: np.ndarray) -> str:
        wid = f'{family}-{key}'
        q1 = np.asarray(q1, float)
        q2 = np.asarray(q2, float)
        q1 = q1 / q1.sum(axis=1, keepdims=True)
        q2 = q2 / q2.sum(axis=1, keepdims=True)
        psi = None
        if self.setup.criterion is not None:
            psi = optimal_reconstruction(self.model(q1, q2), self.setup.criterion).table
        self.witnesses[wid] = Witness(wid, family, q1, q2, psi)
        return wid

    def evaluate(self, w: Witness) -> Tuple[CornerRates, Optional[float]]:
        model = self.model(w.q1, w.q2)
        corners = corner_rates(model).per_symbol()
        d = None
        if self.setup.criterion is not None:
            psi = ReconstructionMap(w.psi, self.setup.criterion.target, self.setup.source.shape, self.setup.order)
            d = self.setup.criterion.expected(model, psi)
        return corners, d


def _fixed(kind: str, rows: int) -> np.ndarray:
    return identity_channel(rows) if kind == 'identity' else constant_channel(rows)


def _eg_family(col: _Collector, corner: int, fixed: Dict[int, str]) -> None:
    s, aux = col.setup, col.setup.aux
    family = FAMILY_EG_CORNER1 if corner == 1 else FAMILY_EG_CORNER0
    (a, b), (z1, z2) = s.blocks, s.cards
    rng = restart_rng(aux.seed, family, 0)
    q1_0 = random_channels(rng, aux.restarts, a, z1)
    q2_0 = random_channels(rng, aux.restarts, b, z2)
    if 1 in fixed:
        q1_0 = np.broadcast_to(_fixed(fixed[1], a), (aux.restarts,) + _fixed(fixed[1], a).shape).copy()
    if 2 in fixed:
        q2_0 = np.broadcast_to(_fixed(fixed[2], b), (aux.restarts,) + _fixed(fixed[2], b).shape).copy()
    terms = corner_terms(corner)
    name = f'eg{corner}'
    for i, beta in enumerate(aux.betas(s.scale)):
        res = exponentiated_gradient(s.p12, terms, s.cost, beta / LN2, q1_0, q2_0,
                                     free=(1 not in fixed, 2 not in fixed),
                                     max_iterations=aux.max_iterations, tolerance=aux.tolerance)
        k = best_index(res.objective, [np.concatenate([res.q1[r].ravel(), res.q2[r].ravel()])
                                       for r in range(aux.restarts)])
        col.add(name, str(i), res.q1[k], res.q2[k])


def _side_family(col: _Collector, coded: int, targets: Sequence[float]) -> None:
    """Terminal `coded` con canal libre; la otra terminal se entrega completa como información lateral."""
    s, aux = col.setup, col.setup.aux
    family = FAMILY_SIDE_1 if coded == 1 else FAMILY_SIDE_2
    p_ab = s.p12 if coded == 1 else s.p12.T
    cost = s.cost if coded == 1 else np.ascontiguousarray(s.cost.transpose(1, 0, 2))
    card = s.cards[coded - 1]
    q0 = random_channels(restart_rng(aux.seed, family, 0), aux.restarts, p_ab.shape[0], card)
    side = identity_channel(p_ab.shape[1])
    name = f'side{coded}'

    def solve(beta: float):
        res = side_info_am(p_ab, cost, beta, q0, aux.max_iterations, aux.tolerance)
        k = best_index(res.lagrangian, [res.channel[r] for r in range(aux.restarts)])
        return float(res.distortion[k]), res.channel[k]

    def add(key: str, q: np.ndarray) -> None:
        if coded == 1:
            col.add(name, key, q, side)
        else:
            col.add(name, key, side, q)

    for i, beta in enumerate(aux.betas(s.scale)):
        add(str(i), solve(beta)[1])
    hi = BETA_RANGE[1] / s.scale
    for j, target in enumerate(targets):
        above, below = bisect_slope(solve, float(target), BETA_RANGE[0], hi)
        for tag, q in (('a', above), ('b', below)):
            if q is not None:
                add(f't{j}{tag}', q)


def _ba_family(col: _Collector, coded: int, targets: Sequence[float], other: str = 'constant') -> None:
    """Terminal `coded` cuantizada por Blahut-Arimoto sobre el coste promediado en la otra terminal."""
    s, aux = col.setup, col.setup.aux
    p_ab = s.p12 if coded == 1 else s.p12.T
    cost = s.cost if coded == 1 else s.cost.transpose(1, 0, 2)
    p_a = p_ab.sum(axis=1)
    p_b_given_a = np.divide(p_ab, p_a[:, None], out=np.zeros_like(p_ab), where=p_a[:, None] > 0)
    averaged = np.einsum('ab,abt->at', p_b_given_a, cost)
    rest = _fixed(other, p_ab.shape[1])
    name = f'ba{coded}' if other == 'constant' else f'ba{coded}{other[0]}'

    def solve(beta: float):
        sol = blahut_arimoto(p_a, averaged, beta, aux.max_iterations)
        return sol.distortion, sol.channel

    def add(key: str, q: np.ndarray) -> None:
        if coded == 1:
            col.add(name, key, q, rest)
        else:
            col.add(name, key, rest, q)

    for i, beta in enumerate(aux.betas(s.scale)):
        add(str(i), solve(beta)[1])
    hi = BETA_RANGE[1] / s.scale
    for j, target in enumerate(targets):
        above, below = bisect_slope(solve, float(target), BETA_RANGE[0], hi)
        for tag, q in (('a', above), ('b', below)):
            if q is not None:
                add(f't{j}{tag}', q)


def _bottleneck_family(col: _Collector, r2_targets: Sequence[float]) -> None:
    """Canal de la terminal 2 que equilibra I(X2;Z2) frente a H(X1|Z2); la terminal 1 va completa."""
    s, aux = col.setup, col.setup.aux
    p_xy = s.p12.T
    q0 = random_channels(restart_rng(aux.seed, FAMILY_BOTTLENECK, 0), aux.restarts, p_xy.shape[0], s.cards[1])
    side = identity_channel(p_xy.shape[1])

    def solve(slope: float):
        res = information_bottleneck(p_xy, slope, q0, aux.max_iterations, aux.tolerance)
        k = best_index(res.lagrangian, [res.channel[r] for r in range(aux.restarts)])
        return -float(res.rate[k]), res.channel[k]

    slopes = 1.0 + np.logspace(-2.0, 3.0, aux.sweep_points)
    for i, slope in enumerate(slopes):
        col.add('ib', str(i), side, solve(slope)[1])
    for j, target in enumerate(r2_targets):
        if target <= 0:
            continue
        above, below = bisect_slope(solve, -float(target), 1.0, float(slopes[-1]))
        for tag, q in (('a', above), ('b', below)):
            if q is not None:
                col.add('ib', f't{j}{tag}', side, q)


def _anchor_witnesses(col: _Collector, kinds: Iterable[Tuple[str, str]]) -> None:
    a, b = col.setup.blocks
    for k1, k2 in kinds:
        col.add('anchor', f'{k1[0]}{k2[0]}', _fixed(k1, a), _fixed(k2, b))


def _kron_power(q: np.ndarray, n: int) -> np.ndarray:
    return reduce(np.kron, [q] * n)


def lift_witness(w: Witness, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Canales producto de orden n a partir de un testigo de primer orden."""
    return _kron_power(w.q1, order), _kron_power(w.q2, order)


def _add_lifted(col: _Collector, first_order: Dict[str, Witness]) -> None:
    for wid, w in sorted(first_order.items()):
        q1, q2 = lift_witness(w, col.setup.order)
        col.add('lift', wid, q1, q2)


# ---------------------------------------------------------------------------
# Regiones
# ---------------------------------------------------------------------------

def _unit(k: int, *idx: int) -> np.ndarray:
    v = np.zeros(k)
    v[list(idx)] = 1.0
    return v


def _build(col: _Collector, problem: str, coords: Tuple[str, ...],
           emit: Callable[[CornerRates, Optional[float]], List[Tuple[str, List[float]]]],
           constraints: Callable[[Witness], List[Constraint]], meta: dict) -> Region:
    points, ids = [], []
    for wid, w in col.witnesses.items():
        corners, d = col.evaluate(w)
        for suffix, pt in emit(corners, d):
            points.append(pt)
            ids.append(wid)
    region = Region(problem, col.setup.order, coords, np.array(points, float), ids, dict(col.witnesses),
                    meta, constraints)
    logger.info('región %s (n=%d): %d puntos, %d testigos', problem, col.setup.order, len(region),
                len(col.witnesses))
    return region


def _meta(setup: _Setup, **extra) -> dict:
    aux = setup.aux
    meta = {'order': setup.order, 'cardZ1': setup.cards[0], 'cardZ2': setup.cards[1], 'gridStep': aux.grid_step,
            'restarts': aux.restarts, 'maxIterations': aux.max_iterations, 'tolerance': aux.tolerance,
            'seed': aux.seed}
    meta.update(extra)
    return meta


def _criterion(d: Union[DistortionCriterion, np.ndarray], target: str) -> DistortionCriterion:
    if isinstance(d, DistortionCriterion):
        if d.target != target:
            raise DimensionMismatchError(f'se esperaba una distorsión sobre {target}, recibida sobre {d.target}')
        return d
    return DistortionCriterion(np.asarray(d, float), target)


def wyner_ziv_region(joint: ProbabilityTable, d, aux: AuxSpec = AuxSpec(), targets: Sequence[float] = (),
                     order: int = 1) -> Region:
    """Pares (I(X1^n;Z1|X2^n)/n, E d/n) con la terminal 2 completa en el decodificador."""
    _check_order(joint, order)
    setup = _Setup(joint, order, _criterion(d, 'x1'), aux)
    col = _Collector(setup)
    _side_family(col, 1, targets)
    _ba_family(col, 1, targets, other='identity')
    _anchor_witnesses(col, [('identity', 'identity'), ('constant', 'identity')])

    def emit(c: CornerRates, dist: Optional[float]):
        return [('c1', [c.corner1[0], dist])]

    def constraints(w: Witness) -> List[Constraint]:
        c, dist = col.evaluate(w)
        return [(_unit(2, 0), c.corner1[0]), (_unit(2, 1), dist)]

    return _build(col, 'wynerZiv', ('r1', 'd'), emit, constraints, _meta(setup, targets=list(targets)))


def wyner_ziv_rd(joint: ProbabilityTable, d, D: float, aux: AuxSpec = AuxSpec()) -> float:
    """min I(X1;Z1|X2) con E d(X1, ψ(Z1, X2)) <= D."""
    if D < 0:
        raise ValueError('D debe ser >= 0')
    crit = _criterion(d, 'x1')
    cost = crit.source_cost(joint.shape, 1)
    d_min = float((joint.mass * cost.min(axis=2)).sum())
    if D < d_min - 1e-12:
        logger.warning('D=%.6g por debajo de la distorsión mínima %.6g: tasa infinita', D, d_min)
        return math.inf
    region = wyner_ziv_region(joint, crit, aux, targets=[D])
    return region.minimize('r1', {'d': D})


def side_info_region(joint: ProbabilityTable, aux: AuxSpec = AuxSpec(),
                     r2_targets: Optional[Sequence[float]] = None) -> Region:
    """Pares (H(X1|Z2), I(X2;Z2)): X1 sin pérdidas con ayuda comprimida de X2."""
    setup = _Setup(joint, 1, None, aux)
    col = _Collector(setup)
    if r2_targets is None:
        h2 = entropy(joint, 1)
        r2_targets = [h2 * f for f in np.arange(aux.grid_step, 1.0, aux.grid_step)]
    _bottleneck_family(col, r2_targets)
    _anchor_witnesses(col, [('identity', 'identity'), ('identity', 'constant')])

    def emit(c: CornerRates, _):
        return [('c1', [c.corner1[0], c.corner1[1]])]

    def constraints(w: Witness) -> List[Constraint]:
        c, _ = col.evaluate(w)
        return [(_unit(2, 0), c.corner1[0]), (_unit(2, 1), c.corner1[1])]

    return _build(col, 'sideInfo', ('r1', 'r2'), emit, constraints, _meta(setup, r2Targets=list(r2_targets)))


def _two_corner_emit(c: CornerRates, dist: Optional[float]):
    return [('c0', [c.corner0[0], c.corner0[1], dist]), ('c1', [c.corner1[0], c.corner1[1], dist])]


def _two_corner_constraints(col: _Collector) -> Callable[[Witness], List[Constraint]]:
    def constraints(w: Witness) -> List[Constraint]:
        c, dist = col.evaluate(w)
        return [(_unit(3, 0), c.corner1[0]), (_unit(3, 1), c.corner0[1]), (_unit(3, 0, 1), c.sum_rate),
                (_unit(3, 2), dist)]
    return constraints


def berger_yeung_region(joint: ProbabilityTable, d, aux: AuxSpec = AuxSpec(), targets: Sequence[float] = ()) -> Region:
    """Ternas (r1, r2, d): X1 sin pérdidas (Z1 = X1), X2 con pérdidas reconstruido por ψ(X1, Z2)."""
    setup = _Setup(joint, 1, _criterion(d, 'x2'), aux)
    col = _Collector(setup)
    _side_family(col, 2, targets)
    _ba_family(col, 2, targets, other='identity')
    _eg_family(col, 1, {1: 'identity'})
    _anchor_witnesses(col, [('identity', 'identity'), ('identity', 'constant')])
    return _build(col, 'bergerYeung', ('r1', 'r2', 'd'), _two_corner_emit, _two_corner_constraints(col),
                  _meta(setup, targets=list(targets)))


def _first_order_witnesses(region_fn, *args, **kwargs) -> Dict[str, Witness]:
    return region_fn(*args, **kwargs).witnesses


def joint_inner_region(source: ProbabilityTable, d, order: int = 1, aux: AuxSpec = AuxSpec(),
                       targets: Sequence[float] = ()) -> Region:
    """Ternas (r1, r2, d) alcanzables con distorsión conjunta sobre los pares (X1, X2)."""
    _check_order(source, order)
    setup = _Setup(source, order, _criterion(d, 'joint'), aux)
    col = _Collector(setup)
    _joint_families(col, targets, both_corners=True)
    if order > 1:
        _add_lifted(col, _first_order_witnesses(joint_inner_region, source, d, 1, aux, targets))
    return _build(col, 'joint', ('r1', 'r2', 'd'), _two_corner_emit, _two_corner_constraints(col),
                  _meta(setup, targets=list(targets)))


def _joint_families(col: _Collector, targets: Sequence[float], both_corners: bool) -> None:
    _eg_family(col, 1, {})
    _side_family(col, 1, targets)
    _ba_family(col, 1, targets)
    if both_corners:
        _eg_family(col, 0, {})
        _side_family(col, 2, targets)
        _ba_family(col, 2, targets)
    _anchor_witnesses(col, [('identity', 'identity'), ('constant', 'constant')])


def partial_inner_region(joint: ProbabilityTable, d, order: int = 1, aux: AuxSpec = AuxSpec(),
                         targets: Sequence[float] = ()) -> Region:
    """Ternas (I(X1^n;Z1|Z2)/n, I(X2^n;Z2)/n, E d/n) con la distorsión medida solo sobre X1."""
    _check_order(joint, order)
    setup = _Setup(joint, order, _criterion(d, 'x1'), aux)
    col = _Collector(setup)
    _joint_families(col, targets, both_corners=False)
    if order > 1:
        _add_lifted(col, _first_order_witnesses(partial_inner_region, joint, d, 1, aux, targets))

    def emit(c: CornerRates, dist: Optional[float]):
        return [('c1', [c.corner1[0], c.corner1[1], dist])]

    def constraints(w: Witness) -> List[Constraint]:
        c, dist = col.evaluate(w)
        return [(_unit(3, 0), c.corner1[0]), (_unit(3, 1), c.corner1[1]), (_unit(3, 2), dist)]

    return _build(col, 'partial', ('r1', 'r2', 'd'), emit, constraints, _meta(setup, targets=list(targets)))


@dataclass
class SingleLetterizationReport:
    targets: Tuple[float, ...]
    rates_first_order: Tuple[float, ...]
    rates_second_order: Tuple[float, ...]
    containment: ContainmentResult
    tolerance: float

    @property
    def holds(self) -> bool:
        return self.containment.contained

    def rows(self) -> List[dict]:
        return [{'d': t, 'r1Order1': a, 'r1Order2': b} for t, a, b in
                zip(self.targets, self.rates_first_order, self.rates_second_order)]


def single_letterization_check(joint: ProbabilityTable, d, targets: Sequence[float], aux: AuxSpec = AuxSpec(),
                               tolerance: float = SINGLE_LETTER_TOLERANCE) -> SingleLetterizationReport:
    """Con información lateral completa, todo punto de orden 2 debe quedar dominado por la región de orden 1."""
    _check_order(joint, 2)
    first = wyner_ziv_region(joint, d, aux, targets, order=1)
    second = wyner_ziv_region(joint, d, aux, targets, order=2)
    containment = check_containment(second, first, tolerance)
    rates1 = tuple(first.minimize('r1', {'d': t}) for t in targets)
    rates2 = tuple(second.minimize('r1', {'d': t}) for t in targets)
    logger.info('single-letterization: violación máxima %.3g (tolerancia %.3g)', containment.worst_violation,
                tolerance)
    return SingleLetterizationReport(tuple(float(t) for t in targets), rates1, rates2, containment, tolerance)
