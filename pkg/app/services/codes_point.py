"""Código puntual aleatorio: diccionario i.i.d., codificación por tipicidad conjunta y simulación Monte Carlo."""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..config import settings
from .errors import BudgetExceededError, DimensionMismatchError, SizingError
from .probability import ProbabilityTable, mutual_information, sample_with_rng, validate_channel
from .seeding import STREAM_CODEBOOK, STREAM_TRIALS, binomial_sigma, derive_rng, is_monotone_nonincreasing, run_trials
from .typicality import CandidateScanner, TypicalityParams, exact_typicality_probability

logger = logging.getLogger(__name__)

MAX_N_PRIME_SEARCH = 4096


@dataclass(frozen=True)
class CodeSizing:
    codebook_size: int
    rate_per_symbol: float
    epsilon1: float
    block_length: int
    mutual_information: Optional[float] = None

    @property
    def log2_size(self) -> float:
        return math.log2(self.codebook_size)

    @classmethod
    def fixed(cls, codebook_size: int, block_length: int) -> 'CodeSizing':
        if codebook_size < 1 or block_length < 1:
            raise ValueError('codebook_size y block_length deben ser >= 1')
        return cls(codebook_size, math.log2(codebook_size) / block_length, 0.0, block_length, None)


def _point_bits(info: float, epsilon1: float, n_prime: int) -> float:
    # redondeo para que 20*(0.5+0.1) produzca exactamente 12 bits
    return round(n_prime * (info + 2 * epsilon1), 9)


def _point_window_ok(info: float, epsilon1: float, n_prime: int) -> bool:
    bits = _point_bits(info, epsilon1, n_prime)
    k = math.ceil(2.0 ** bits)
    return math.log2(k) <= n_prime * (info + 3 * epsilon1) + 1e-9


def choose_codebook_size(info: float, epsilon1: float, n_prime: int, budget: Optional[int] = None) -> CodeSizing:
    """K = ceil(2^{n'(I + 2 e1)}), comprobando que log2 K <= n'(I + 3 e1) y que K cabe en el presupuesto."""
    if info < 0 or not epsilon1 > 0 or n_prime < 1:
        raise ValueError('se requiere I >= 0, epsilon1 > 0 y n\' >= 1')
    budget = settings.codebook_budget if budget is None else budget
    bits = _point_bits(info, epsilon1, n_prime)
    if bits > math.log2(budget) + 1e-12:
        logger.warning('diccionario de 2^%.3f palabras supera el presupuesto 2^%.1f', bits, math.log2(budget))
        raise BudgetExceededError(f'se necesitan 2^{bits:.4g} palabras, presupuesto {budget}',
                                  required=2.0 ** bits, budget=budget)
    if not _point_window_ok(info, epsilon1, n_prime):
        minimal = next((m for m in range(n_prime + 1, MAX_N_PRIME_SEARCH) if _point_window_ok(info, epsilon1, m)), None)
        raise SizingError(f'ventana de tamaño vacía para n\'={n_prime}; n\' mínimo {minimal}', minimal_n_prime=minimal)
    k = math.ceil(2.0 ** bits)
    return CodeSizing(k, math.log2(k) / n_prime, epsilon1, n_prime, info)


@dataclass(frozen=True, eq=False)
class Codebook:
    codewords: np.ndarray
    marginal: np.ndarray
    seed: int
    stream: int = 0

    @property
    def size(self) -> int:
        return int(self.codewords.shape[0])

    @property
    def block_length(self) -> int:
        return int(self.codewords.shape[1])

    @property
    def alphabet_size(self) -> int:
        return int(self.marginal.size)

    def to_json_dict(self) -> dict:
        return {'nPrime': self.block_length, 'K': self.size, 'seed': self.seed,
                'codewords': self.codewords.astype(int).tolist()}


def generate_codebook(sizing: CodeSizing, marginal, seed: int, stream: int = 0,
                      budget: Optional[int] = None) -> Codebook:
    budget = settings.codebook_budget if budget is None else budget
    if sizing.codebook_size > budget:
        raise BudgetExceededError(f'K={sizing.codebook_size} supera el presupuesto {budget}',
                                  required=sizing.codebook_size, budget=budget)
    arr = marginal.mass if isinstance(marginal, ProbabilityTable) else np.asarray(marginal, float)
    arr = np.asarray(arr, float).ravel()
    rng = derive_rng(seed, STREAM_CODEBOOK, stream)
    dtype = np.min_scalar_type(max(arr.size - 1, 0))
    words = rng.choice(arr.size, size=(sizing.codebook_size, sizing.block_length), p=arr / arr.sum()).astype(dtype)
    words.setflags(write=False)
    logger.debug('diccionario K=%d n\'=%d generado (seed=%d, stream=%d)', sizing.codebook_size,
                 sizing.block_length, seed, stream)
    return Codebook(codewords=words, marginal=arr, seed=seed, stream=stream)


@dataclass(frozen=True)
class EncodeResult:
    index: int
    covered: bool


def _check_law(codebook: Codebook, law: ProbabilityTable) -> None:
    if law.ndim < 2 or law.shape[-1] != codebook.alphabet_size:
        raise DimensionMismatchError(f'ley {law.shape} incompatible con un diccionario sobre {codebook.alphabet_size} símbolos')


def encode(codebook: Codebook, inputs, joint_law: ProbabilityTable, params: TypicalityParams) -> EncodeResult:
    """Menor índice (base 1) cuya palabra es conjuntamente típica con la entrada; (1, False) si no hay ninguna."""
    _check_law(codebook, joint_law)
    if params.block_length != codebook.block_length:
        raise DimensionMismatchError(f'n={params.block_length} distinto de n\'={codebook.block_length}')
    scanner = CandidateScanner(inputs, joint_law, params)
    hit = scanner.first_typical(codebook.codewords)
    if hit < 0:
        return EncodeResult(index=1, covered=False)
    return EncodeResult(index=hit + 1, covered=True)


@dataclass
class PointCodeReport:
    n_prime: int
    trials: int
    failures: int
    failure_rate: float
    sigma: float
    codebook_size: int
    rate: float
    mutual_information: float
    epsilon1: float
    analytic_bound: Optional[float]
    atypical_source: Optional[float]
    mean_distortion: Optional[float]
    seed: int

    def as_row(self) -> dict:
        return asdict(self)


def simulate_point_code(source: ProbabilityTable, channel, sizing: CodeSizing, params: TypicalityParams,
                        trials: int, seed: int, codebook: Optional[Codebook] = None,
                        distortion: Optional[np.ndarray] = None, threads: int = 1) -> PointCodeReport:
    """Estima Pr{(Y^n', Z^n'(F(Y^n'))) no típica} para el código puntual dimensionado por `sizing`.

    Args:
        source: pmf de Y (un eje).
        channel: canal auxiliar q(z|y) que define la ley conjunta de referencia.
        distortion: matriz opcional d(y, z) para medir la distorsión por letra de la reconstrucción Z.
    """
    if trials <= 0:
        raise ValueError('trials debe ser > 0')
    if source.ndim != 1:
        raise DimensionMismatchError('la fuente del código puntual tiene un solo eje')
    q = validate_channel(channel, source.shape[0], 'channel')
    law = ProbabilityTable(source.mass[:, None] * q, name='pyz')
    info = mutual_information(law, 0, 1)
    n = sizing.block_length
    params = params.with_length(n)
    if codebook is None:
        codebook = generate_codebook(sizing, law.marginal_array(1), seed, stream=n)
    d = None if distortion is None else np.asarray(distortion, float)

    def trial(t: int) -> Dict[str, float]:
        (y,) = sample_with_rng(source, n, derive_rng(seed, STREAM_TRIALS, n, t))
        res = encode(codebook, y, law, params)
        out = {'failures': int(not res.covered)}
        if d is not None:
            out['distortion'] = float(d[y, codebook.codewords[res.index - 1]].mean())
        return out

    tally = run_trials(trial, trials, threads)
    failures = int(tally.get('failures', 0))
    try:
        atypical = 1.0 - exact_typicality_probability(source, params)
    except BudgetExceededError:
        atypical = None
    bound = None
    if atypical is not None and sizing.epsilon1 > 0:
        bound = atypical + math.exp(-sizing.codebook_size * 2.0 ** (-n * (info + sizing.epsilon1)))
    report = PointCodeReport(
        n_prime=n, trials=trials, failures=failures, failure_rate=failures / trials,
        sigma=binomial_sigma(failures, trials), codebook_size=codebook.size,
        rate=math.log2(codebook.size) / n, mutual_information=info, epsilon1=sizing.epsilon1,
        analytic_bound=bound, atypical_source=atypical,
        mean_distortion=None if d is None else tally['distortion'] / trials, seed=seed)
    logger.info('código puntual n\'=%d K=%d: fallo %.4f', n, codebook.size, report.failure_rate)
    return report


@dataclass
class PointSchedule:
    points: List[PointCodeReport] = field(default_factory=list)

    @property
    def monotone(self) -> bool:
        return is_monotone_nonincreasing([p.failure_rate for p in self.points], [p.sigma for p in self.points], 2.0)

    def rows(self) -> List[dict]:
        return [p.as_row() for p in self.points]


def point_code_schedule(source: ProbabilityTable, channel, epsilon: float, epsilon1: float,
                        schedule: Sequence[int], trials: int, seed: int, support_restricted: bool = False,
                        distortion: Optional[np.ndarray] = None, budget: Optional[int] = None,
                        threads: int = 1) -> PointSchedule:
    q = validate_channel(channel, source.shape[0], 'channel')
    info = mutual_information(ProbabilityTable(source.mass[:, None] * q), 0, 1)
    out = PointSchedule()
    for n in schedule:
        sizing = choose_codebook_size(info, epsilon1, n, budget)
        params = TypicalityParams(epsilon, n, support_restricted)
        out.points.append(simulate_point_code(source, q, sizing, params, trials, seed,
                                              distortion=distortion, threads=threads))
    return out
