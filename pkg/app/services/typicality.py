"""Tipicidad fuerte: tests, probabilidades exactas y Monte Carlo, y verificación del sándwich y del lema de Markov.

Una secuencia (o tupla de secuencias emparejadas) es típica si para cada celda
|N(x)/n - p(x)| < epsilon / |X|, con desigualdad estricta. La variante `support_restricted`
exige además que las celdas de probabilidad cero estén vacías y usa epsilon / |soporte|.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import gammaln, logsumexp, xlogy

from ..config import settings
from .errors import BudgetExceededError, DimensionMismatchError, FactorizationError, TypicalityError
from .probability import (ChainModel, ProbabilityTable, apply_channel, mutual_information, sample_with_rng,
                          verify_factorization, as_seq_tuple)
from .seeding import STREAM_TRIALS, binomial_sigma, derive_rng, is_monotone_nonincreasing, run_trials

logger = logging.getLogger(__name__)

CHUNK_ROWS = 4096


@dataclass(frozen=True)
class TypicalityParams:
    epsilon: float
    block_length: int
    support_restricted: bool = False

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f'epsilon debe ser > 0 (recibido {self.epsilon})')
        if int(self.block_length) < 1:
            raise ValueError(f'block_length debe ser >= 1 (recibido {self.block_length})')

    def with_length(self, n: int) -> 'TypicalityParams':
        return TypicalityParams(self.epsilon, int(n), self.support_restricted)


@dataclass(frozen=True)
class TypicalityVerdict:
    is_typical: bool
    max_deviation: float


def _scale(pflat: np.ndarray, support_restricted: bool) -> int:
    return int(np.count_nonzero(pflat)) if support_restricted else int(pflat.size)


def deviation_from_counts(counts: np.ndarray, n: int, pflat: np.ndarray, scale: int,
                          support_restricted: bool = False) -> np.ndarray:
    """Máxima desviación |N/n - p| escalada por `scale` sobre el último eje de `counts`."""
    counts = np.asarray(counts)
    dev = np.abs(counts / float(n) - pflat) * scale
    if support_restricted:
        dev = np.where((pflat == 0) & (counts > 0), np.inf, np.where(pflat == 0, 0.0, dev))
    return dev.max(axis=-1)


def count_occurrences(seqs, symbol, sizes: Optional[Sequence[int]] = None) -> int:
    seqs = as_seq_tuple(seqs)
    symbol = tuple(np.atleast_1d(symbol).tolist())
    if len(symbol) != len(seqs):
        raise DimensionMismatchError(f'símbolo de {len(symbol)} componentes para {len(seqs)} secuencias')
    if sizes is not None:
        sizes = tuple(sizes)
        if len(sizes) != len(seqs) or any(s < 0 or s >= k for s, k in zip(symbol, sizes)):
            raise DimensionMismatchError(f'símbolo {symbol} fuera del alfabeto {sizes}')
    mask = np.ones(len(seqs[0]), dtype=bool)
    for s, v in zip(seqs, symbol):
        mask &= (s == v)
    return int(mask.sum())


def joint_counts(seqs, sizes: Sequence[int]) -> np.ndarray:
    seqs = as_seq_tuple(seqs)
    sizes = tuple(int(s) for s in sizes)
    if len(seqs) != len(sizes):
        raise DimensionMismatchError(f'{len(seqs)} secuencias para una tabla de {len(sizes)} ejes')
    n = len(seqs[0])
    for s, k in zip(seqs, sizes):
        if len(s) != n:
            raise DimensionMismatchError('las secuencias emparejadas deben tener la misma longitud')
        if len(s) and (s.min() < 0 or s.max() >= k):
            raise DimensionMismatchError(f'símbolo fuera del alfabeto de tamaño {k}')
    flat = np.ravel_multi_index(seqs, sizes)
    return np.bincount(flat, minlength=int(np.prod(sizes))).reshape(sizes)


def is_strongly_typical(seqs, p: ProbabilityTable, params: TypicalityParams) -> TypicalityVerdict:
    seqs = as_seq_tuple(seqs)
    if any(len(s) != params.block_length for s in seqs):
        raise DimensionMismatchError(f'longitud {len(seqs[0])} distinta de n={params.block_length}')
    counts = joint_counts(seqs, p.shape).ravel()
    pflat = p.mass.ravel()
    dev = float(deviation_from_counts(counts, params.block_length, pflat,
                                      _scale(pflat, params.support_restricted), params.support_restricted))
    return TypicalityVerdict(is_typical=dev < params.epsilon, max_deviation=dev)


class CandidateScanner:
    """Test de tipicidad conjunta de una tupla fija frente a muchas palabras candidatas.

    La ley `p` tiene los ejes de las secuencias fijas primero y el eje de las candidatas al final.
    """

    def __init__(self, fixed, p: ProbabilityTable, params: TypicalityParams):
        fixed = as_seq_tuple(fixed)
        if p.ndim != len(fixed) + 1:
            raise DimensionMismatchError(f'ley de {p.ndim} ejes para {len(fixed)} secuencias fijas + candidatas')
        n = params.block_length
        if any(len(s) != n for s in fixed):
            raise DimensionMismatchError(f'longitud de entrada distinta de n={n}')
        for s, k in zip(fixed, p.shape[:-1]):
            if len(s) and (s.min() < 0 or s.max() >= k):
                raise DimensionMismatchError(f'la entrada usa símbolos fuera del alfabeto de tamaño {k}')
        self.params = params
        self.card = p.shape[-1]
        self.offsets = np.ravel_multi_index(fixed, p.shape[:-1]) * self.card
        self.cells = p.mass.size
        self.pflat = p.mass.ravel()
        self.scale = _scale(self.pflat, params.support_restricted)

    def deviations(self, candidates: np.ndarray) -> np.ndarray:
        candidates = np.asarray(candidates)
        if candidates.ndim == 1:
            candidates = candidates[None, :]
        if candidates.shape[1] != self.params.block_length:
            raise DimensionMismatchError('longitud de palabra candidata distinta de n')
        out = np.empty(candidates.shape[0])
        cells = np.arange(self.cells)
        for start in range(0, candidates.shape[0], CHUNK_ROWS):
            codes = self.offsets[None, :] + candidates[start:start + CHUNK_ROWS]
            counts = (codes[:, :, None] == cells).sum(axis=1)
            out[start:start + CHUNK_ROWS] = deviation_from_counts(
                counts, self.params.block_length, self.pflat, self.scale, self.params.support_restricted)
        return out

    def mask(self, candidates: np.ndarray) -> np.ndarray:
        return self.deviations(candidates) < self.params.epsilon

    def first_typical(self, candidates: np.ndarray) -> int:
        """Índice (base 0) de la primera candidata típica, o -1; recorre por trozos con salida temprana."""
        for start in range(0, candidates.shape[0], CHUNK_ROWS):
            hits = np.flatnonzero(self.mask(candidates[start:start + CHUNK_ROWS]))
            if hits.size:
                return start + int(hits[0])
        return -1


# ---------------------------------------------------------------------------
# Probabilidades exactas
# ---------------------------------------------------------------------------

def _compositions(n: int, cells: int) -> np.ndarray:
    total = math.comb(n + cells - 1, cells - 1)
    cap = settings.table_cell_cap
    if total > cap:
        raise BudgetExceededError(f'{total} clases de tipo superan el límite de {cap}', required=total, budget=cap)
    if cells == 1:
        return np.array([[n]], dtype=np.int64)
    bars = np.array(list(combinations(range(n + cells - 1), cells - 1)), dtype=np.int64).reshape(-1, cells - 1)
    edges = np.hstack([np.full((bars.shape[0], 1), -1), bars, np.full((bars.shape[0], 1), n + cells - 1)])
    return np.diff(edges, axis=1) - 1


def _log_multinomial(comps: np.ndarray, probs: np.ndarray) -> np.ndarray:
    n = comps.sum(axis=1)
    with np.errstate(divide='ignore'):
        return gammaln(n + 1) - gammaln(comps + 1).sum(axis=1) + xlogy(comps, probs).sum(axis=1)


def _sum_exp(logs: np.ndarray) -> float:
    logs = logs[np.isfinite(logs)]
    return float(np.exp(logsumexp(logs))) if logs.size else 0.0


def _split_condition(p: ProbabilityTable, condition) -> Tuple[Tuple[np.ndarray, ...], int]:
    cond = as_seq_tuple(condition)
    k = len(cond)
    if k >= p.ndim:
        raise DimensionMismatchError('la condición debe fijar sólo los ejes iniciales de la ley')
    return cond, k


def exact_typicality_probability(p: ProbabilityTable, params: TypicalityParams, condition=None,
                                 drawn_marginal: Optional[np.ndarray] = None, method: str = 'types') -> float:
    """Probabilidad exacta de que el bloque sorteado sea (conjuntamente) típico.

    Sin `condition` se sortean todos los ejes i.i.d. según `p`. Con `condition` (secuencias de los
    ejes iniciales) el resto de ejes se sortea i.i.d. según `drawn_marginal` (por defecto la marginal
    de `p` en esos ejes) y se evalúa la tipicidad conjunta respecto de `p`.
    """
    n = params.block_length
    pflat = p.mass.ravel()
    scale = _scale(pflat, params.support_restricted)
    sr = params.support_restricted
    if condition is None:
        if method == 'enumerate':
            return _enumerate_probability(pflat, np.zeros(n, dtype=np.int64), pflat.size, pflat, params, scale)
        comps = _compositions(n, pflat.size)
        ok = deviation_from_counts(comps, n, pflat, scale, sr) < params.epsilon
        return _sum_exp(_log_multinomial(comps[ok], pflat))

    cond, k = _split_condition(p, condition)
    if any(len(c) != n for c in cond):
        raise DimensionMismatchError(f'la condición no tiene longitud n={n}')
    cond_cells = int(np.prod(p.shape[:k]))
    drawn_cells = pflat.size // cond_cells
    grid = pflat.reshape(cond_cells, drawn_cells)
    r = grid.sum(axis=0) if drawn_marginal is None else np.asarray(drawn_marginal, float).ravel()
    if r.size != drawn_cells:
        raise DimensionMismatchError('la marginal sorteada no coincide con los ejes libres')
    cidx = np.ravel_multi_index(cond, p.shape[:k])
    if method == 'enumerate':
        return _enumerate_probability(pflat, cidx, drawn_cells, r, params, scale)
    total_log = 0.0
    for c in range(cond_cells):
        nc = int(np.count_nonzero(cidx == c))
        row = grid[c]
        if nc == 0:
            dev = deviation_from_counts(np.zeros(drawn_cells), n, row, scale, sr)
            if not dev < params.epsilon:
                return 0.0
            continue
        comps = _compositions(nc, drawn_cells)
        ok = deviation_from_counts(comps, n, row, scale, sr) < params.epsilon
        if not ok.any():
            return 0.0
        logs = _log_multinomial(comps[ok], r)
        logs = logs[np.isfinite(logs)]
        if not logs.size:
            return 0.0
        total_log += float(logsumexp(logs))
    return float(math.exp(total_log))


def _enumerate_probability(pflat: np.ndarray, cidx: np.ndarray, drawn_cells: int, r: np.ndarray,
                           params: TypicalityParams, scale: int) -> float:
    n = params.block_length
    total = drawn_cells ** n
    cap = settings.table_cell_cap
    if total > cap:
        raise BudgetExceededError(f'{total} secuencias superan el límite de enumeración {cap}', required=total, budget=cap)
    powers = drawn_cells ** np.arange(n - 1, -1, -1)
    cells = np.arange(pflat.size)
    logr = np.log(np.where(r > 0, r, 1.0))
    acc = 0.0
    for start in range(0, total, CHUNK_ROWS):
        idx = np.arange(start, min(total, start + CHUNK_ROWS))
        digits = (idx[:, None] // powers) % drawn_cells
        codes = cidx[None, :] * drawn_cells + digits
        counts = (codes[:, :, None] == cells).sum(axis=1)
        ok = deviation_from_counts(counts, n, pflat, scale, params.support_restricted) < params.epsilon
        possible = np.all(r[digits] > 0, axis=1)
        logs = logr[digits].sum(axis=1)
        acc += float(np.exp(logs[ok & possible]).sum())
    return acc


def monte_carlo_typicality_probability(p: ProbabilityTable, params: TypicalityParams, trials: int, seed: int,
                                       condition=None, drawn_marginal: Optional[np.ndarray] = None,
                                       threads: int = 1) -> Tuple[float, float]:
    """Estimación muestral de exact_typicality_probability: (estimación, desviación típica binomial)."""
    n = params.block_length
    if condition is None:
        def trial(t: int) -> Dict[str, int]:
            seqs = sample_with_rng(p, n, derive_rng(seed, STREAM_TRIALS, t))
            return {'hits': int(is_strongly_typical(seqs, p, params).is_typical)}
    else:
        cond, k = _split_condition(p, condition)
        free = tuple(range(k, p.ndim))
        marg = p.marginal(free) if drawn_marginal is None else ProbabilityTable(
            np.asarray(drawn_marginal, float).reshape(p.shape[k:]), name='drawn')

        def trial(t: int) -> Dict[str, int]:
            drawn = sample_with_rng(marg, n, derive_rng(seed, STREAM_TRIALS, t))
            return {'hits': int(is_strongly_typical(cond + drawn, p, params).is_typical)}
    tally = run_trials(trial, trials, threads)
    est = tally.get('hits', 0) / trials
    return est, binomial_sigma(tally.get('hits', 0), trials)


def exact_type_sequence(marginal, n: int) -> Tuple[np.ndarray, ...]:
    """Secuencia determinista cuyo tipo es el más cercano a la marginal (redondeo de mayores restos)."""
    arr = marginal.mass if isinstance(marginal, ProbabilityTable) else np.asarray(marginal, float)
    flat = arr.ravel()
    base = np.floor(flat * n).astype(np.int64)
    rest = n - int(base.sum())
    order = np.lexsort((np.arange(flat.size), -(flat * n - base)))
    base[order[:rest]] += 1
    cells = np.repeat(np.arange(flat.size), base)
    return tuple(np.asarray(a, dtype=np.int64) for a in np.unravel_index(cells, arr.shape))


# ---------------------------------------------------------------------------
# Verificaciones
# ---------------------------------------------------------------------------

@dataclass
class SandwichReport:
    probability: float
    lower: float
    upper: float
    epsilon1: float
    mutual_information: float
    n: int
    epsilon: float
    trials: Optional[int] = None
    seed: Optional[int] = None

    @property
    def holds(self) -> bool:
        return math.isfinite(self.epsilon1) and self.lower * (1 - 1e-9) <= self.probability <= self.upper * (1 + 1e-9)

    def as_dict(self) -> dict:
        return {'probability': self.probability, 'bounds': {'lower': self.lower, 'upper': self.upper},
                'epsilon1': self.epsilon1, 'n': self.n, 'trials': self.trials, 'seed': self.seed}


def check_sandwich_bounds(joint: ProbabilityTable, condition, params: TypicalityParams) -> SandwichReport:
    """Menor epsilon1 >= 0 tal que 2^{-n(I+e1)} <= Pr <= 2^{-n(I-e1)} para la condición dada."""
    cond, k = _split_condition(joint, condition)
    cond_axes = tuple(range(k))
    drawn_axes = tuple(range(k, joint.ndim))
    verdict = is_strongly_typical(cond, joint.marginal(cond_axes), params)
    if not verdict.is_typical:
        raise TypicalityError(f'la secuencia condicionante no es típica (desviación {verdict.max_deviation:.4g})')
    n = params.block_length
    info = mutual_information(joint, cond_axes, drawn_axes)
    prob = exact_typicality_probability(joint, params, cond)
    if prob <= 0:
        eps1 = math.inf
    else:
        eps1 = max(0.0, abs(-math.log2(prob) / n - info))
    lower = 2.0 ** (-n * (info + eps1)) if math.isfinite(eps1) else 0.0
    upper = 2.0 ** (-n * (info - eps1)) if math.isfinite(eps1) else math.inf
    logger.debug('sandwich n=%d P=%.6g I=%.6f eps1=%.6f', n, prob, info, eps1)
    return SandwichReport(probability=prob, lower=lower, upper=upper, epsilon1=eps1,
                          mutual_information=info, n=n, epsilon=params.epsilon)


@dataclass
class SandwichSchedule:
    points: List[SandwichReport]

    @property
    def shrinking(self) -> bool:
        e = [pt.epsilon1 for pt in self.points]
        return all(e[i + 1] <= e[i] + 1e-12 for i in range(len(e) - 1))


def sandwich_schedule(joint: ProbabilityTable, block_lengths: Sequence[int], epsilon: float,
                      support_restricted: bool = False) -> SandwichSchedule:
    points = []
    for n in block_lengths:
        params = TypicalityParams(epsilon, n, support_restricted)
        cond = exact_type_sequence(joint.marginal(0), n)
        points.append(check_sandwich_bounds(joint, cond, params))
    logger.info('sandwich: eps1 %s', [round(pt.epsilon1, 6) for pt in points])
    return SandwichSchedule(points)


@dataclass
class MarkovLemmaPoint:
    n: int
    trials: int
    conditioned: int
    failures: int
    rate: float
    sigma: float


@dataclass
class MarkovLemmaReport:
    points: List[MarkovLemmaPoint] = field(default_factory=list)
    seed: Optional[int] = None

    @property
    def monotone(self) -> bool:
        return is_monotone_nonincreasing([p.rate for p in self.points], [p.sigma for p in self.points], 2.0)

    def rows(self) -> List[dict]:
        return [asdict(p) | {'seed': self.seed} for p in self.points]


def check_markov_lemma(model: ChainModel, epsilon: float, block_lengths: Sequence[int], trials: int, seed: int,
                       support_restricted: bool = False, threads: int = 1) -> MarkovLemmaReport:
    """Estima Pr{(Y1, Y2, Z1) atípica | (Y1, Z1) y (Y1, Y2) típicas} a lo largo de `block_lengths`.

    Sólo se usa la rama auxiliar Z1 del modelo; Y1, Y2 son los supersímbolos de bloque.
    """
    verdict = verify_factorization(model.joint_mass)
    if not verdict.holds:
        raise FactorizationError(f'el modelo no factoriza (desviación {verdict.max_deviation:.3g})')
    if trials <= 0:
        raise ValueError('trials debe ser > 0')
    pair12 = model.block
    triple = ProbabilityTable(pair12.mass[:, :, None] * model.aux1[:, None, :], name='triple')
    pair1z = triple.marginal((0, 2))
    report = MarkovLemmaReport(seed=seed)
    for n in block_lengths:
        params = TypicalityParams(epsilon, n, support_restricted)

        def trial(t: int, n=n, params=params) -> Dict[str, int]:
            rng = derive_rng(seed, STREAM_TRIALS, n, t)
            y1, y2 = sample_with_rng(pair12, n, rng)
            z1 = apply_channel(y1, model.aux1, rng)
            if not (is_strongly_typical((y1, z1), pair1z, params).is_typical
                    and is_strongly_typical((y1, y2), pair12, params).is_typical):
                return {'conditioned': 0, 'failures': 0}
            bad = not is_strongly_typical((y1, y2, z1), triple, params).is_typical
            return {'conditioned': 1, 'failures': int(bad)}

        tally = run_trials(trial, trials, threads)
        cond = int(tally.get('conditioned', 0))
        fails = int(tally.get('failures', 0))
        rate = fails / cond if cond else 0.0
        report.points.append(MarkovLemmaPoint(n=n, trials=trials, conditioned=cond, failures=fails,
                                              rate=rate, sigma=binomial_sigma(fails, cond)))
        logger.info('lema de Markov n=%d: %d/%d fallos condicionados', n, fails, cond)
    return report


__all__ = [
    'TypicalityParams', 'TypicalityVerdict', 'CandidateScanner', 'count_occurrences', 'joint_counts',
    'is_strongly_typical', 'exact_typicality_probability', 'monte_carlo_typicality_probability',
    'exact_type_sequence', 'check_sandwich_bounds', 'sandwich_schedule', 'check_markov_lemma',
    'is_monotone_nonincreasing', 'deviation_from_counts',
]
