"""Motores de optimización para las regiones: Blahut-Arimoto, minimización alternada con información
lateral, cuello de botella de información y gradiente exponenciado sobre (q1, q2) con paso ψ exacto.

Todas las rutinas trabajan en dominio logarítmico y procesan los reinicios en lote (primer eje).
Las tasas se devuelven en bits.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.special import entr, logsumexp

from .errors import DimensionMismatchError
from .seeding import STREAM_RESTARTS, derive_rng

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)
TINY = 1e-300
BETA_RANGE = (1e-3, 1e4)
BISECTION_STEPS = 60


@dataclass(frozen=True)
class AuxSpec:
    """Límites de la búsqueda sobre alfabetos auxiliares y parámetros de los optimizadores."""
    card_z1: Optional[int] = None
    card_z2: Optional[int] = None
    grid_step: float = 0.0625
    restarts: int = 32
    max_iterations: int = 2000
    tolerance: float = 1e-9
    seed: int = 0

    def __post_init__(self):
        for name in ('card_z1', 'card_z2'):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ValueError(f'{name} debe ser >= 1')
        if not 0 < self.grid_step <= 0.5:
            raise ValueError('grid_step debe estar en (0, 0.5]')
        if self.restarts < 1 or self.max_iterations < 1:
            raise ValueError('restarts y max_iterations deben ser >= 1')
        if not self.tolerance > 0:
            raise ValueError('tolerance debe ser > 0')

    def cards(self, block_sizes: Tuple[int, int]) -> Tuple[int, int]:
        z1 = block_sizes[0] + 2 if self.card_z1 is None else self.card_z1
        z2 = block_sizes[1] + 2 if self.card_z2 is None else self.card_z2
        return int(z1), int(z2)

    @property
    def sweep_points(self) -> int:
        return int(round(1.0 / self.grid_step)) + 1

    def betas(self, scale: float = 1.0) -> np.ndarray:
        """Pendientes lagrangianas (nats por unidad de distorsión) repartidas en escala logarítmica."""
        return np.logspace(-1.0, 2.5, self.sweep_points) / max(scale, TINY)


def random_channels(rng: np.random.Generator, restarts: int, rows: int, card: int) -> np.ndarray:
    return rng.dirichlet(np.ones(card), size=(restarts, rows))


def restart_rng(seed: int, family: int, index: int) -> np.random.Generator:
    return derive_rng(seed, STREAM_RESTARTS, family, index)


def best_index(values: np.ndarray, keys: Sequence[np.ndarray], tie: float = 1e-12) -> int:
    """Índice del mínimo; los empates se deshacen comparando los testigos lexicográficamente."""
    values = np.asarray(values, float)
    best = float(np.min(values))
    candidates = [i for i in range(values.size) if values[i] <= best + tie]
    if len(candidates) == 1:
        return candidates[0]
    return min(candidates, key=lambda i: tuple(np.round(np.asarray(keys[i], float).ravel(), 12)))


def _log2(x: np.ndarray) -> np.ndarray:
    return np.log2(np.maximum(x, TINY))


def _normalize_rows(log_q: np.ndarray) -> np.ndarray:
    return np.exp(log_q - logsumexp(log_q, axis=-1, keepdims=True))


# ---------------------------------------------------------------------------
# Blahut-Arimoto
# ---------------------------------------------------------------------------

@dataclass
class RDSolution:
    rate: float
    distortion: float
    beta: float
    channel: np.ndarray


def blahut_arimoto(p_x: np.ndarray, dist: np.ndarray, beta: float, max_iterations: int = 5000,
                   tolerance: float = 1e-13, mask: Optional[np.ndarray] = None) -> RDSolution:
    """Iteración de Blahut-Arimoto en dominio logarítmico para la pendiente beta (nats por unidad de distorsión).

    Con `mask` se restringe el soporte de Q(y|x) a las celdas permitidas y se ignora beta.
    """
    p_x = np.asarray(p_x, float)
    dist = np.asarray(dist, float)
    if dist.shape[0] != p_x.size:
        raise DimensionMismatchError(f'distorsión {dist.shape} incompatible con |X|={p_x.size}')
    support = p_x > 0
    p = p_x[support] / p_x[support].sum()
    rho = dist[support]
    if mask is not None:
        score = np.where(np.asarray(mask)[support], 0.0, -np.inf)
    else:
        score = -beta * rho
    log_q_y = np.full(rho.shape[1], -math.log(rho.shape[1]))
    prev = np.inf
    with np.errstate(invalid='ignore', divide='ignore'):
        for step in range(max_iterations):
            log_Q = score + log_q_y
            log_Q -= logsumexp(log_Q, axis=1, keepdims=True)
            log_q_y = logsumexp(np.log(p)[:, None] + log_Q, axis=0)
            Q = np.exp(log_Q)
            rate = float(np.sum(p[:, None] * Q * np.where(Q > 0, log_Q - log_q_y, 0.0)))
            distortion = float(np.sum(p[:, None] * Q * rho))
            value = rate + (0.0 if mask is not None else beta * distortion)
            if prev - value < tolerance * max(1.0, abs(value)) and step > 0:
                break
            prev = value
    channel = np.full(dist.shape, 1.0 / dist.shape[1])
    channel[support] = Q
    return RDSolution(rate=max(rate, 0.0) / LN2, distortion=distortion, beta=beta, channel=channel)


def distortion_range(p_x: np.ndarray, dist: np.ndarray) -> Tuple[float, float]:
    """(Dmin, Dmax): distorsión con reconstrucción perfecta y con la mejor reconstrucción constante."""
    d_min = float(np.dot(p_x, dist.min(axis=1)))
    d_max = float((p_x @ dist).min())
    return d_min, d_max


def parametric_rd(sources: Sequence[Tuple[float, np.ndarray]], dist: np.ndarray, target: float,
                  max_iterations: int = 5000) -> Tuple[float, list]:
    """Curva R(D) de una mezcla de fuentes con pendiente común: bisección sobre beta hasta E d = target.

    Devuelve la tasa (bits) y las soluciones por componente usadas como testigos.
    """
    weights = np.array([w for w, _ in sources], float)
    pmfs = [np.asarray(p, float) for _, p in sources]
    d_min = sum(w * distortion_range(p, dist)[0] for w, p in zip(weights, pmfs))
    d_max = sum(w * distortion_range(p, dist)[1] for w, p in zip(weights, pmfs))
    if target >= d_max - 1e-12:
        return 0.0, []
    if target < d_min - 1e-12:
        logger.warning('D=%.6g por debajo de la distorsión mínima %.6g: tasa infinita', target, d_min)
        return math.inf, []

    def solve(beta: Optional[float]):
        sols = []
        for p in pmfs:
            if beta is None:
                mask = np.isclose(dist, dist.min(axis=1, keepdims=True), atol=1e-12)
                sols.append(blahut_arimoto(p, dist, 0.0, max_iterations, mask=mask))
            else:
                sols.append(blahut_arimoto(p, dist, beta, max_iterations))
        rate = float(np.dot(weights, [s.rate for s in sols]))
        distortion = float(np.dot(weights, [s.distortion for s in sols]))
        return rate, distortion, sols

    if target <= d_min + 1e-12:
        rate, _, sols = solve(None)
        return rate, sols
    lo, hi = BETA_RANGE[0], BETA_RANGE[1] / max(float(dist.max()), TINY)
    r_lo, d_lo, s_lo = solve(lo)
    r_hi, d_hi, s_hi = solve(hi)
    if d_lo <= target:
        return r_lo, s_lo
    if d_hi > target:
        r_lo, d_lo, s_lo = r_hi, d_hi, s_hi
        r_hi, d_hi, s_hi = solve(None)
    else:
        for _ in range(BISECTION_STEPS):
            mid = math.sqrt(lo * hi)
            r_mid, d_mid, s_mid = solve(mid)
            if d_mid > target:
                lo, r_lo, d_lo, s_lo = mid, r_mid, d_mid, s_mid
            else:
                hi, r_hi, d_hi, s_hi = mid, r_mid, d_mid, s_mid
            if d_lo - d_hi < 1e-12:
                break
    if d_lo - d_hi < 1e-15:
        return r_hi, s_hi
    # cuerda entre los extremos del intervalo final
    t = (d_lo - target) / (d_lo - d_hi)
    return float((1 - t) * r_lo + t * r_hi), s_hi


# ---------------------------------------------------------------------------
# Minimización alternada con información lateral en el decodificador
# ---------------------------------------------------------------------------

@dataclass
class SideInfoResult:
    channel: np.ndarray      # (R, A, Z) canal q(z|a)
    psi: np.ndarray          # (R, Z, B) reconstrucción
    rate: np.ndarray         # (R,) I(A;Z|B) en bits
    distortion: np.ndarray   # (R,)
    lagrangian: np.ndarray   # (R,) en nats


def _side_evaluate(p_ab: np.ndarray, cost: np.ndarray, q: np.ndarray):
    weight = p_ab[None, :, :, None] * q[:, :, None, :]          # (R, A, B, Z)
    per_t = np.einsum('rabz,abt->rzbt', weight, cost)
    psi = per_t.argmin(axis=3)                                  # (R, Z, B)
    distortion = np.take_along_axis(per_t, psi[..., None], axis=3)[..., 0].sum(axis=(1, 2))
    p_b = p_ab.sum(axis=0)
    r_zb = weight.sum(axis=1)                                   # (R, B, Z) conjunta p(b, z)
    cond = np.divide(r_zb, p_b[None, :, None], out=np.zeros_like(r_zb), where=p_b[None, :, None] > 0)
    log_ratio = _log2(q)[:, :, None, :] - _log2(cond)[:, None, :, :]
    rate = np.sum(np.where(weight > 0, weight * log_ratio, 0.0), axis=(1, 2, 3))
    return psi, np.maximum(rate, 0.0), distortion, cond


def side_info_am(p_ab: np.ndarray, cost: np.ndarray, beta: float, q0: np.ndarray,
                 max_iterations: int = 2000, tolerance: float = 1e-9) -> SideInfoResult:
    """min I(A;Z|B) + beta E c(A, B, ψ(Z, B)) sobre q(z|a), con ψ exacto en cada paso.

    r(z|b) = p(z|b); q(z|a) ∝ exp(Σ_b p(b|a)[log r(z|b) − beta c(a, b, ψ(z, b))]).
    """
    p_ab = np.asarray(p_ab, float)
    cost = np.asarray(cost, float)
    if cost.shape[:2] != p_ab.shape:
        raise DimensionMismatchError(f'coste {cost.shape} incompatible con la conjunta {p_ab.shape}')
    p_a = p_ab.sum(axis=1)
    p_b_given_a = np.divide(p_ab, p_a[:, None], out=np.zeros_like(p_ab), where=p_a[:, None] > 0)
    q = np.asarray(q0, float)
    psi, rate, distortion, cond = _side_evaluate(p_ab, cost, q)
    value = rate * LN2 + beta * distortion
    a_idx = np.arange(cost.shape[0])[None, :, None, None]
    b_idx = np.arange(cost.shape[1])[None, None, :, None]
    active = np.ones(q.shape[0], bool)
    for step in range(max_iterations):
        # c(a, b, ψ(z, b)) indexado (R, A, B, Z)
        c_psi = cost[a_idx, b_idx, np.swapaxes(psi, 1, 2)[:, None, :, :]]
        score = np.einsum('ab,rbz->raz', p_b_given_a, np.log(np.maximum(cond, TINY))) \
            - beta * np.einsum('ab,rabz->raz', p_b_given_a, c_psi)
        q_new = _normalize_rows(score)
        q = np.where(active[:, None, None], q_new, q)
        psi, rate, distortion, cond = _side_evaluate(p_ab, cost, q)
        new_value = rate * LN2 + beta * distortion
        active &= (value - new_value) > tolerance
        value = new_value
        if not active.any():
            break
    logger.debug('side_info_am beta=%.4g: %d iteraciones', beta, step + 1)
    return SideInfoResult(q, psi, rate, distortion, value)


# ---------------------------------------------------------------------------
# Cuello de botella de información (información lateral sin distorsión)
# ---------------------------------------------------------------------------

@dataclass
class BottleneckResult:
    channel: np.ndarray   # (R, X, Z)
    rate: np.ndarray      # (R,) I(X;Z) en bits
    residual: np.ndarray  # (R,) H(Y|Z) en bits
    lagrangian: np.ndarray


def _ib_evaluate(p_xy: np.ndarray, q: np.ndarray):
    p_x = p_xy.sum(axis=1)
    p_z = np.einsum('x,rxz->rz', p_x, q)
    p_yz = np.einsum('xy,rxz->ryz', p_xy, q)
    rate = np.einsum('x,rxz->r', p_x, np.where(q > 0, q * (_log2(q) - _log2(p_z)[:, None, :]), 0.0))
    h_yz = entr(p_yz).sum(axis=(1, 2)) / LN2
    h_z = entr(p_z).sum(axis=1) / LN2
    return np.maximum(rate, 0.0), h_yz - h_z, p_z, p_yz


def information_bottleneck(p_xy: np.ndarray, s: float, q0: np.ndarray, max_iterations: int = 2000,
                           tolerance: float = 1e-9) -> BottleneckResult:
    """min I(X;Z) + s H(Y|Z) sobre q(z|x): q(z|x) ∝ p(z) exp(−s KL(p(y|x) || p(y|z)))."""
    p_xy = np.asarray(p_xy, float)
    p_x = p_xy.sum(axis=1)
    p_y_given_x = np.divide(p_xy, p_x[:, None], out=np.zeros_like(p_xy), where=p_x[:, None] > 0)
    q = np.asarray(q0, float)
    rate, residual, p_z, p_yz = _ib_evaluate(p_xy, q)
    value = rate + s * residual
    active = np.ones(q.shape[0], bool)
    for _ in range(max_iterations):
        p_y_given_z = np.divide(p_yz, p_z[:, None, :], out=np.zeros_like(p_yz), where=p_z[:, None, :] > 0)
        # KL(p(y|x) || p(y|z)) en nats, solo el término cruzado depende de z
        cross = -np.einsum('xy,ryz->rxz', p_y_given_x, np.log(np.maximum(p_y_given_z, TINY)))
        q_new = _normalize_rows(np.log(np.maximum(p_z, TINY))[:, None, :] - s * cross)
        q = np.where(active[:, None, None], q_new, q)
        rate, residual, p_z, p_yz = _ib_evaluate(p_xy, q)
        new_value = rate + s * residual
        active &= (value - new_value) > tolerance
        value = new_value
        if not active.any():
            break
    return BottleneckResult(q, rate, residual, value)


# ---------------------------------------------------------------------------
# Gradiente exponenciado sobre (q1, q2)
# ---------------------------------------------------------------------------

# Ejes de la conjunta encadenada: 0 Y1, 1 Y2, 2 Z1, 3 Z2.
EntropyTerms = Dict[Tuple[int, ...], float]


def corner_terms(corner: int, w1: float = 1.0, w2: float = 1.0) -> EntropyTerms:
    """Combinación de entropías de w1 R1 + w2 R2 en la esquina indicada."""
    if corner == 1:
        terms = {(0, 3): w1, (2, 3): w1, (0, 2, 3): -w1, (3,): w2 - w1, (1,): w2, (1, 3): -w2}
    elif corner == 0:
        terms = {(0,): w1, (2,): w1 - w2, (0, 2): -w1, (1, 2): w2, (2, 3): w2, (1, 2, 3): -w2}
    else:
        raise ValueError('corner debe ser 0 o 1')
    return {k: v for k, v in terms.items() if v != 0.0}


@dataclass
class GradientResult:
    q1: np.ndarray
    q2: np.ndarray
    psi: Optional[np.ndarray]
    objective: np.ndarray
    distortion: np.ndarray


def _chain_mass(p12: np.ndarray, q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    return p12[None, :, :, None, None] * q1[:, :, None, :, None] * q2[:, None, :, None, :]


def _chain_objective(p12, q1, q2, terms: EntropyTerms, cost: Optional[np.ndarray], beta: float):
    P = _chain_mass(p12, q1, q2)
    value = np.zeros(P.shape[0])
    grad = np.zeros_like(P)
    for axes, coef in terms.items():
        drop = tuple(1 + k for k in range(4) if k not in axes)
        marg = P.sum(axis=drop, keepdims=True)
        value += coef * entr(marg).sum(axis=(1, 2, 3, 4)) / LN2
        grad = grad - coef * _log2(marg)
    psi = None
    distortion = np.zeros(P.shape[0])
    if cost is not None:
        per_t = np.einsum('rabcd,abt->rcdt', P, cost)
        psi = per_t.argmin(axis=3)
        distortion = np.take_along_axis(per_t, psi[..., None], axis=3)[..., 0].sum(axis=(1, 2))
        value = value + beta * distortion
        grad = grad + beta * np.moveaxis(cost[:, :, psi], 2, 0)
    return value, grad, psi, distortion


def _eg_step(q: np.ndarray, g: np.ndarray, eta: np.ndarray) -> np.ndarray:
    g = g - g.min(axis=2, keepdims=True)
    log_q = np.log(np.maximum(q, TINY)) - eta[:, None, None] * g
    return _normalize_rows(log_q)


def exponentiated_gradient(p12: np.ndarray, terms: EntropyTerms, cost: Optional[np.ndarray], beta: float,
                           q1: np.ndarray, q2: np.ndarray, free: Tuple[bool, bool] = (True, True),
                           max_iterations: int = 2000, tolerance: float = 1e-9) -> GradientResult:
    """Descenso por gradiente exponenciado con retroceso sobre los canales libres.

    El paso empieza en ln 2 y se reduce a la mitad cuando el objetivo no mejora. El gradiente de cada
    fila se divide por p(y) de la fila.
    """
    p12 = np.asarray(p12, float)
    p1, p2 = p12.sum(axis=1), p12.sum(axis=0)
    value, grad, psi, distortion = _chain_objective(p12, q1, q2, terms, cost, beta)
    eta = np.full(q1.shape[0], LN2)
    active = np.ones(q1.shape[0], bool)
    for step in range(max_iterations):
        new_q1, new_q2 = q1, q2
        if free[0]:
            g1 = np.einsum('ab,rbd,rabcd->rac', p12, q2, grad)
            g1 = np.divide(g1, p1[None, :, None], out=np.zeros_like(g1), where=p1[None, :, None] > 0)
            new_q1 = _eg_step(q1, g1, eta)
        if free[1]:
            g2 = np.einsum('ab,rac,rabcd->rbd', p12, q1, grad)
            g2 = np.divide(g2, p2[None, :, None], out=np.zeros_like(g2), where=p2[None, :, None] > 0)
            new_q2 = _eg_step(q2, g2, eta)
        n_value, n_grad, n_psi, n_dist = _chain_objective(p12, new_q1, new_q2, terms, cost, beta)
        accept = active & (n_value <= value + 1e-15)
        gain = value - n_value
        a3 = accept[:, None, None]
        q1 = np.where(a3, new_q1, q1)
        q2 = np.where(a3, new_q2, q2)
        grad = np.where(accept[:, None, None, None, None], n_grad, grad)
        if psi is not None:
            psi = np.where(a3, n_psi, psi)
        distortion = np.where(accept, n_dist, distortion)
        value = np.where(accept, n_value, value)
        eta = np.where(accept | ~active, eta, eta / 2)
        active &= ~((accept & (gain < tolerance)) | (eta < 1e-12))
        if not active.any():
            break
    logger.debug('gradiente exponenciado beta=%.4g: %d iteraciones', beta, step + 1)
    return GradientResult(q1, q2, psi, value, distortion)


def bisect_slope(solve: Callable[[float], Tuple[float, object]], target: float, lo: float, hi: float,
                 steps: int = BISECTION_STEPS) -> Tuple[object, object]:
    """Bisección logarítmica sobre una pendiente cuya medida (p.ej. la distorsión) decrece con ella.

    Devuelve las soluciones a ambos lados del objetivo (medida > target, medida <= target); cualquiera
    puede ser None si el objetivo queda fuera del intervalo.
    """
    m_lo, s_lo = solve(lo)
    m_hi, s_hi = solve(hi)
    if m_lo <= target:
        return None, s_lo
    if m_hi > target:
        return s_hi, None
    for _ in range(steps):
        mid = math.sqrt(lo * hi)
        m_mid, s_mid = solve(mid)
        if m_mid > target:
            lo, m_lo, s_lo = mid, m_mid, s_mid
        else:
            hi, m_hi, s_hi = mid, m_mid, s_mid
        if m_lo - m_hi < 1e-10 or hi / lo < 1 + 1e-9:
            break
    return s_lo, s_hi
