"""Binning aleatorio: diccionario de K1 palabras repartido en K2 cubetas, decodificación con información lateral.

Eventos de error por ensayo:
  e0  par fuente (Y1, Y2) atípico
  e1  ninguna palabra típica con Y1 (codificador sin cobertura)
  e2  terna (Y1, Y2, palabra del codificador) atípica
  e3  más de una candidata típica dentro de la cubeta
El error global es que la terna con la palabra decodificada (índice 1 si el decodificador falla) sea atípica.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..config import settings
from .codes_point import Codebook, CodeSizing, encode, generate_codebook
from .errors import BudgetExceededError, DimensionMismatchError, SizingError
from .probability import ProbabilityTable, mutual_information, sample_with_rng, validate_channel
from .seeding import STREAM_BINS, STREAM_TRIALS, binomial_sigma, derive_rng, is_monotone_nonincreasing, run_trials
from .typicality import CandidateScanner, TypicalityParams, is_strongly_typical

logger = logging.getLogger(__name__)

MAX_N_PRIME_SEARCH = 4096


@dataclass(frozen=True)
class BinSizing:
    log2_k1: int
    log2_k2: int
    epsilon1: float
    epsilon4: float
    block_length: int
    i_y1z1: Optional[float] = None
    i_y2z1: Optional[float] = None

    @property
    def k1(self) -> int:
        return 1 << self.log2_k1

    @property
    def k2(self) -> int:
        return 1 << self.log2_k2

    @property
    def rate(self) -> float:
        return self.log2_k2 / self.block_length

    @property
    def rate_bound(self) -> Optional[float]:
        if self.i_y1z1 is None or self.i_y2z1 is None:
            return None
        return self.i_y1z1 - self.i_y2z1 + 3 * self.epsilon1 + 3 * self.epsilon4

    @classmethod
    def fixed(cls, log2_k1: int, log2_k2: int, block_length: int) -> 'BinSizing':
        if not 0 <= log2_k2 <= log2_k1:
            raise ValueError('se requiere 0 <= log2 K2 <= log2 K1')
        return cls(log2_k1, log2_k2, 0.0, 0.0, block_length)


def _bin_exponents(i1: float, i2: float, e1: float, e4: float, n: int):
    log2_k1 = math.ceil(n * (i1 + 2 * e1) - 1e-9)
    if log2_k1 > n * (i1 + 3 * e1) + 1e-9:
        return None
    gain = max(0, math.floor(n * (i2 - 2 * e4) + 1e-9))
    if gain < n * (i2 - 3 * e4) - 1e-9:
        return None
    return log2_k1, max(0, log2_k1 - gain)


def choose_bin_sizes(i_y1z1: float, i_y2z1: float, epsilon1: float, epsilon4: float, n_prime: int,
                     budget: Optional[int] = None) -> BinSizing:
    """log2 K1 = techo de n'(I(Y1;Z1) + 2 e1); log2 K2 = log2 K1 - suelo de n'(I(Y2;Z1) - 2 e4), recortado a >= 0."""
    if i_y1z1 < 0 or i_y2z1 < 0 or not epsilon1 > 0 or not epsilon4 > 0 or n_prime < 1:
        raise ValueError('parámetros de dimensionado no válidos')
    if i_y2z1 > i_y1z1 + 1e-12:
        raise ValueError('I(Y2;Z1) no puede superar I(Y1;Z1) bajo la cadena de Markov')
    budget = settings.codebook_budget if budget is None else budget
    exps = _bin_exponents(i_y1z1, i_y2z1, epsilon1, epsilon4, n_prime)
    if exps is None:
        minimal = next((m for m in range(n_prime + 1, MAX_N_PRIME_SEARCH)
                        if _bin_exponents(i_y1z1, i_y2z1, epsilon1, epsilon4, m) is not None), None)
        raise SizingError(f'ventana de binning vacía para n\'={n_prime}; n\' mínimo {minimal}', minimal_n_prime=minimal)
    log2_k1, log2_k2 = exps
    if 2.0 ** log2_k1 > budget:
        logger.warning('K1=2^%d supera el presupuesto %d', log2_k1, budget)
        raise BudgetExceededError(f'K1=2^{log2_k1} supera el presupuesto {budget}', required=2.0 ** log2_k1, budget=budget)
    return BinSizing(log2_k1, log2_k2, epsilon1, epsilon4, n_prime, i_y1z1, i_y2z1)


@dataclass(frozen=True, eq=False)
class BinnedCodebook:
    inner: Codebook
    bin_map: np.ndarray
    k2: int
    seed: int

    @cached_property
    def _members(self) -> List[np.ndarray]:
        order = np.argsort(self.bin_map, kind='stable')
        bounds = np.searchsorted(self.bin_map[order], np.arange(1, self.k2 + 2))
        return [order[bounds[j]:bounds[j + 1]] for j in range(self.k2)]

    def members(self, bin_index: int) -> np.ndarray:
        """Índices (base 0) de las palabras de la cubeta `bin_index` (base 1), en orden creciente."""
        return self._members[bin_index - 1]

    def bin_loads(self) -> np.ndarray:
        return np.bincount(self.bin_map - 1, minlength=self.k2)

    def second_moment(self) -> float:
        loads = self.bin_loads().astype(float)
        return float(np.mean(loads ** 2))

    def to_json_dict(self) -> dict:
        return self.inner.to_json_dict() | {'K2': self.k2, 'binMap': self.bin_map.astype(int).tolist()}


def generate_binned_codebook(sizing: BinSizing, marginal_z1, seed: int, stream: int = 0,
                             budget: Optional[int] = None) -> BinnedCodebook:
    inner = generate_codebook(CodeSizing.fixed(sizing.k1, sizing.block_length), marginal_z1, seed, stream, budget)
    return attach_bins(inner, sizing.k2, seed, stream)


def attach_bins(inner: Codebook, k2: int, seed: int, stream: int = 0) -> BinnedCodebook:
    k1 = inner.size
    if k2 == k1:
        # sin ganancia de binning la aplicación es inyectiva: identidad
        bins = np.arange(1, k1 + 1, dtype=np.int64)
    else:
        bins = derive_rng(seed, STREAM_BINS, stream).integers(1, k2 + 1, size=k1, dtype=np.int64)
    bins.setflags(write=False)
    return BinnedCodebook(inner=inner, bin_map=bins, k2=int(k2), seed=seed)


@dataclass(frozen=True)
class BinnedEncodeResult:
    bin_index: int
    codeword_index: int
    covered: bool


@dataclass(frozen=True)
class BinnedDecodeResult:
    index: Optional[int]
    failure: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.failure is None


def binned_encode(codebook: BinnedCodebook, inputs, law_y1z1: ProbabilityTable,
                  params: TypicalityParams) -> BinnedEncodeResult:
    res = encode(codebook.inner, inputs, law_y1z1, params)
    return BinnedEncodeResult(bin_index=int(codebook.bin_map[res.index - 1]), codeword_index=res.index,
                              covered=res.covered)


def binned_decode(codebook: BinnedCodebook, bin_index: int, side_info, law_y2z1: ProbabilityTable,
                  params: TypicalityParams) -> BinnedDecodeResult:
    """Índice (base 1) de la única palabra de la cubeta conjuntamente típica con la información lateral."""
    if not 1 <= bin_index <= codebook.k2:
        raise ValueError(f'índice de cubeta {bin_index} fuera de 1..{codebook.k2}')
    if law_y2z1.shape[-1] != codebook.inner.alphabet_size:
        raise DimensionMismatchError('ley de decodificación incompatible con el alfabeto del diccionario')
    members = codebook.members(bin_index)
    if members.size == 0:
        return BinnedDecodeResult(None, 'none')
    scanner = CandidateScanner(side_info, law_y2z1, params)
    hits = members[scanner.mask(codebook.inner.codewords[members])]
    if hits.size == 0:
        return BinnedDecodeResult(None, 'none')
    if hits.size > 1:
        return BinnedDecodeResult(None, 'multiple')
    return BinnedDecodeResult(int(hits[0]) + 1)


@dataclass
class ErrorEventTally:
    n_prime: int
    trials: int
    e0: int = 0
    e1: int = 0
    e2: int = 0
    e3: int = 0
    decode_none: int = 0
    overall: int = 0
    union_violations: int = 0
    consistency_violations: int = 0

    @property
    def overall_rate(self) -> float:
        return self.overall / self.trials

    @property
    def sigma(self) -> float:
        return binomial_sigma(self.overall, self.trials)


@dataclass
class BinnedCodeReport:
    tally: ErrorEventTally
    sizing: BinSizing
    rate: float
    second_moment: float
    seed: int

    def as_row(self) -> dict:
        t = self.tally
        return {'nPrime': t.n_prime, 'trials': t.trials, 'e0': t.e0 / t.trials, 'e1': t.e1 / t.trials,
                'e2': t.e2 / t.trials, 'e3': t.e3 / t.trials, 'overall': t.overall_rate,
                'rateBitsPerSymbol': self.rate, 'seed': self.seed}

    def as_dict(self) -> dict:
        return {'tally': asdict(self.tally), 'rate': self.rate, 'second_moment': self.second_moment,
                'k1': self.sizing.k1, 'k2': self.sizing.k2, 'rate_bound': self.sizing.rate_bound, 'seed': self.seed}


TALLY_COLUMNS = ['nPrime', 'trials', 'e0', 'e1', 'e2', 'e3', 'overall', 'rateBitsPerSymbol', 'seed']


def simulate_binned_code(source_pair: ProbabilityTable, aux1, sizing: BinSizing, params: TypicalityParams,
                         trials: int, seed: int, codebook: Optional[BinnedCodebook] = None,
                         threads: int = 1) -> BinnedCodeReport:
    """Clasifica cada ensayo en e0..e3 y error global; la fuente es la tabla (Y1, Y2) y aux1 el canal q(z1|y1)."""
    if trials <= 0:
        raise ValueError('trials debe ser > 0')
    if source_pair.ndim != 2:
        raise DimensionMismatchError('la fuente del código con binning es una tabla (Y1, Y2)')
    q1 = validate_channel(aux1, source_pair.shape[0], 'aux1')
    triple = ProbabilityTable(source_pair.mass[:, :, None] * q1[:, None, :], name='y1y2z1')
    law_enc = triple.marginal((0, 2))
    law_dec = triple.marginal((1, 2))
    n = sizing.block_length
    params = params.with_length(n)
    if codebook is None:
        codebook = generate_binned_codebook(sizing, triple.marginal_array(2), seed, stream=n)

    def trial(t: int) -> Dict[str, int]:
        y1, y2 = sample_with_rng(source_pair, n, derive_rng(seed, STREAM_TRIALS, n, t))
        enc = binned_encode(codebook, y1, law_enc, params)
        dec = binned_decode(codebook, enc.bin_index, y2, law_dec, params)
        words = codebook.inner.codewords
        e0 = not is_strongly_typical((y1, y2), source_pair, params).is_typical
        e1 = not enc.covered
        e2 = not is_strongly_typical((y1, y2, words[enc.codeword_index - 1]), triple, params).is_typical
        e3 = dec.failure == 'multiple'
        decoded = dec.index if dec.ok else 1
        overall = not is_strongly_typical((y1, y2, words[decoded - 1]), triple, params).is_typical
        clean = not (e0 or e1 or e2 or e3)
        return {'e0': int(e0), 'e1': int(e1), 'e2': int(e2), 'e3': int(e3),
                'decode_none': int(dec.failure == 'none'), 'overall': int(overall),
                'union_violations': int(overall and clean),
                'consistency_violations': int(clean and dec.ok and dec.index != enc.codeword_index)}

    counts = run_trials(trial, trials, threads)
    tally = ErrorEventTally(n_prime=n, trials=trials, **{k: int(v) for k, v in counts.items()})
    if tally.union_violations:
        logger.warning('n\'=%d: %d ensayos violan la cota de unión', n, tally.union_violations)
    report = BinnedCodeReport(tally=tally, sizing=sizing, rate=math.log2(codebook.k2) / n,
                              second_moment=codebook.second_moment(), seed=seed)
    logger.info('binning n\'=%d K1=%d K2=%d: error global %.4f', n, codebook.inner.size, codebook.k2,
                tally.overall_rate)
    return report


@dataclass
class BinnedSchedule:
    points: List[BinnedCodeReport] = field(default_factory=list)

    @property
    def monotone(self) -> bool:
        return is_monotone_nonincreasing([p.tally.overall_rate for p in self.points],
                                         [p.tally.sigma for p in self.points], 2.0)

    def rows(self) -> List[dict]:
        return [p.as_row() for p in self.points]


def binned_code_schedule(source_pair: ProbabilityTable, aux1, epsilon: float, epsilon1: float, epsilon4: float,
                         schedule: Sequence[int], trials: int, seed: int, support_restricted: bool = False,
                         budget: Optional[int] = None, threads: int = 1) -> BinnedSchedule:
    q1 = validate_channel(aux1, source_pair.shape[0], 'aux1')
    triple = ProbabilityTable(source_pair.mass[:, :, None] * q1[:, None, :])
    i1 = mutual_information(triple, 0, 2)
    i2 = min(mutual_information(triple, 1, 2), i1)
    out = BinnedSchedule()
    for n in schedule:
        sizing = choose_bin_sizes(i1, i2, epsilon1, epsilon4, n, budget)
        params = TypicalityParams(epsilon, n, support_restricted)
        out.points.append(simulate_binned_code(source_pair, q1, sizing, params, trials, seed, threads=threads))
    return out
