"""Esquema a dos terminales: esquinas (código puntual + código con binning), reparto de tiempo,
reconstrucción símbolo a símbolo y experimentos tasa-distorsión de extremo a extremo.

La esquina 0 codifica Z1 con el código puntual y Z2 con binning usando Ẑ1 como información lateral;
la esquina 1 intercambia los papeles. Las tasas se expresan en bits por símbolo de la fuente.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .codes_binned import (BinnedCodebook, BinSizing, binned_decode, binned_encode, choose_bin_sizes,
                           generate_binned_codebook)
from .codes_point import Codebook, CodeSizing, choose_codebook_size, encode, generate_codebook
from .errors import ConfigError, DimensionMismatchError, FactorizationError
from .probability import (AX_Y1, AX_Y2, AX_Z1, AX_Z2, ChainModel, block_digits, blocks_to_letters,
                          check_cell_cap, letters_to_blocks, mutual_information, sample_with_rng, verify_factorization)
from .seeding import STREAM_TRIALS, binomial_sigma, derive_rng, is_monotone_nonincreasing, run_trials
from .typicality import TypicalityParams, is_strongly_typical

logger = logging.getLogger(__name__)

PROBLEMS = ('joint', 'partial', 'wynerZiv', 'slepianWolf', 'bergerYeung')
EXPERIMENT_COLUMNS = ['problem', 'n', 'nPrime', 'lambda', 'r1', 'r2', 'targetD', 'measuredD', 'errorRate',
                      'trials', 'seed']


@dataclass(frozen=True)
class CodingEpsilons:
    epsilon: float
    epsilon1: Optional[float] = None
    epsilon4: Optional[float] = None
    support_restricted: bool = False

    @property
    def e1(self) -> float:
        return self.epsilon / 2 if self.epsilon1 is None else self.epsilon1

    @property
    def e4(self) -> float:
        return self.epsilon / 2 if self.epsilon4 is None else self.epsilon4

    def params(self, n_prime: int) -> TypicalityParams:
        return TypicalityParams(self.epsilon, n_prime, self.support_restricted)


@dataclass(frozen=True)
class CornerRates:
    corner0: Tuple[float, float]
    corner1: Tuple[float, float]
    sum_rate: float
    block_order: int = 1

    def per_symbol(self) -> 'CornerRates':
        n = float(self.block_order)
        return CornerRates((self.corner0[0] / n, self.corner0[1] / n), (self.corner1[0] / n, self.corner1[1] / n),
                           self.sum_rate / n, 1)


def _require_factorization(model: ChainModel) -> None:
    verdict = verify_factorization(model.joint_mass)
    if not verdict.holds:
        raise FactorizationError(f'el modelo no factoriza (desviación {verdict.max_deviation:.3g})')


def corner_rates(model: ChainModel) -> CornerRates:
    """Esquinas (I(Y1;Z1), I(Y2;Z2|Z1)) y (I(Y1;Z1|Z2), I(Y2;Z2)), en bits por supersímbolo."""
    _require_factorization(model)
    s = model.info_summary()
    return CornerRates(corner0=(s.i_x1_z1, s.i_x2_z2_given_z1), corner1=(s.i_x1_z1_given_z2, s.i_x2_z2),
                       sum_rate=s.i_x1x2_z1z2, block_order=model.block_order)


# ---------------------------------------------------------------------------
# Esquemas
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TwoTerminalScheme:
    kind: str
    model: ChainModel
    n_prime: int
    params: TypicalityParams
    point: Optional[Codebook] = None
    binned: Optional[BinnedCodebook] = None
    first: int = 0
    lam: Optional[float] = None
    blocks: int = 1
    components: Tuple['TwoTerminalScheme', ...] = ()

    @property
    def letters_per_block(self) -> int:
        return self.model.block_order * self.n_prime

    @property
    def input_length(self) -> int:
        return self.letters_per_block * self.blocks

    def rates(self) -> Tuple[float, float]:
        """(R1, R2) en bits por símbolo fuente: log2 del tamaño de los conjuntos de índices / (n n')."""
        if self.kind == 'timeshared':
            s0, s1 = self.components
            k0 = self._blocks_first()
            r0, r1 = s0.rates(), s1.rates()
            return tuple((k0 * a + (self.blocks - k0) * b) / self.blocks for a, b in zip(r0, r1))
        denom = float(self.letters_per_block)
        point_rate = math.log2(self.point.size) / denom
        binned_rate = math.log2(self.binned.k2) / denom
        return (point_rate, binned_rate) if self.first == 0 else (binned_rate, point_rate)

    def _blocks_first(self) -> int:
        return int(math.floor(self.lam * self.blocks + 1e-12))

    def block_kinds(self) -> List[int]:
        if self.kind != 'timeshared':
            return [0] * self.blocks
        k0 = self._blocks_first()
        return [0] * k0 + [1] * (self.blocks - k0)


def _laws(model: ChainModel, first: int):
    j = model._joint_table
    yf, zf = (AX_Y1, AX_Z1) if first == 0 else (AX_Y2, AX_Z2)
    ys, zs = (AX_Y2, AX_Z2) if first == 0 else (AX_Y1, AX_Z1)
    return j.marginal((yf, zf)), j.marginal((ys, zs)), j.marginal((zf, zs))


def _is_deterministic(marginal: np.ndarray) -> bool:
    return int(np.count_nonzero(marginal > 0)) == 1


def corner_sizings(model: ChainModel, which: int, epsilons: CodingEpsilons, n_prime: int,
                   budget: Optional[int] = None) -> Tuple[CodeSizing, BinSizing]:
    """Tamaños del código puntual y del código con binning de la esquina `which`, sin generar diccionarios."""
    if which not in (0, 1):
        raise ValueError('which debe ser 0 o 1')
    _require_factorization(model)
    point_law, enc_law, dec_law = _laws(model, which)
    if _is_deterministic(point_law.marginal_array(1)):
        sizing = CodeSizing.fixed(1, n_prime)
    else:
        sizing = choose_codebook_size(mutual_information(point_law, 0, 1), epsilons.e1, n_prime, budget)
    if _is_deterministic(enc_law.marginal_array(1)):
        bin_sizing = BinSizing.fixed(0, 0, n_prime)
    else:
        i1 = mutual_information(enc_law, 0, 1)
        i2 = min(mutual_information(dec_law, 0, 1), i1)
        bin_sizing = choose_bin_sizes(i1, i2, epsilons.e1, epsilons.e4, n_prime, budget)
    return sizing, bin_sizing


def build_corner_scheme(model: ChainModel, which: int, epsilons: CodingEpsilons, n_prime: int, seed: int,
                        budget: Optional[int] = None) -> TwoTerminalScheme:
    """Código puntual para la terminal `which` (0 -> Y1) y binning para la otra contra Ẑ de la primera."""
    sizing, bin_sizing = corner_sizings(model, which, epsilons, n_prime, budget)
    point_law, enc_law, _ = _laws(model, which)
    stream = 4 * n_prime + 2 * which
    point = generate_codebook(sizing, point_law.marginal_array(1), seed, stream=stream, budget=budget)
    binned = generate_binned_codebook(bin_sizing, enc_law.marginal_array(1), seed, stream=stream + 1, budget=budget)
    logger.info('esquina %d: K=%d K1=%d K2=%d (n\'=%d)', which, point.size, binned.inner.size, binned.k2, n_prime)
    return TwoTerminalScheme(kind=f'corner{which}', model=model, n_prime=n_prime,
                             params=epsilons.params(n_prime), point=point, binned=binned, first=which)


def build_timeshared_scheme(scheme0: TwoTerminalScheme, scheme1: TwoTerminalScheme, lam: float,
                            blocks: int = 10) -> TwoTerminalScheme:
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f'lambda fuera de [0,1]: {lam}')
    if blocks < 1:
        raise ValueError('blocks debe ser >= 1')
    if scheme0.model is not scheme1.model or scheme0.n_prime != scheme1.n_prime:
        raise DimensionMismatchError('los esquemas a compartir deben usar el mismo modelo y la misma n\'')
    return TwoTerminalScheme(kind='timeshared', model=scheme0.model, n_prime=scheme0.n_prime,
                             params=scheme0.params, lam=float(lam), blocks=int(blocks),
                             components=(scheme0, scheme1))


@dataclass
class EventFlags:
    e0: bool = False
    point_uncovered: bool = False
    binned_uncovered: bool = False
    e2: bool = False
    e3: bool = False
    decode_none: bool = False
    success: bool = True

    def merge(self, other: 'EventFlags') -> 'EventFlags':
        return EventFlags(**{k: (getattr(self, k) and getattr(other, k)) if k == 'success'
                             else (getattr(self, k) or getattr(other, k)) for k in self.__dataclass_fields__})


@dataclass
class EncodeDecodeResult:
    z1: np.ndarray
    z2: np.ndarray
    flags: EventFlags


def _encode_decode_corner(scheme: TwoTerminalScheme, y1: np.ndarray, y2: np.ndarray) -> EncodeDecodeResult:
    model, params = scheme.model, scheme.params
    point_law, enc_law, dec_law = _laws(model, scheme.first)
    yf, ys = (y1, y2) if scheme.first == 0 else (y2, y1)
    res_p = encode(scheme.point, yf, point_law, params)
    zf = scheme.point.codewords[res_p.index - 1]
    enc = binned_encode(scheme.binned, ys, enc_law, params)
    dec = binned_decode(scheme.binned, enc.bin_index, zf, dec_law, params)
    words = scheme.binned.inner.codewords
    zs_enc = words[enc.codeword_index - 1]
    zs = words[dec.index - 1] if dec.ok else words[0]
    z1, z2 = (zf, zs) if scheme.first == 0 else (zs, zf)
    z1_enc, z2_enc = (zf, zs_enc) if scheme.first == 0 else (zs_enc, zf)
    joint = model._joint_table
    flags = EventFlags(
        e0=not is_strongly_typical((y1, y2), model.block, params).is_typical,
        point_uncovered=not res_p.covered,
        binned_uncovered=not enc.covered,
        e2=not is_strongly_typical((y1, y2, z1_enc, z2_enc), joint, params).is_typical,
        e3=dec.failure == 'multiple',
        decode_none=dec.failure == 'none',
    )
    flags.success = dec.ok and is_strongly_typical((y1, y2, z1, z2), joint, params).is_typical
    return EncodeDecodeResult(np.asarray(z1), np.asarray(z2), flags)


def encode_decode(scheme: TwoTerminalScheme, x1, x2) -> EncodeDecodeResult:
    """Codifica y decodifica bloques de letras fuente de longitud n n' (por L bloques si hay reparto de tiempo)."""
    x1, x2 = np.asarray(x1), np.asarray(x2)
    if x1.shape != (scheme.input_length,) or x2.shape != (scheme.input_length,):
        raise DimensionMismatchError(f'se esperaban {scheme.input_length} letras por terminal')
    a, b = scheme.model.letter_sizes
    n = scheme.model.block_order
    y1 = letters_to_blocks(x1, a, n)
    y2 = letters_to_blocks(x2, b, n)
    if scheme.kind != 'timeshared':
        return _encode_decode_corner(scheme, y1, y2)
    z1_parts, z2_parts, flags = [], [], None
    m = scheme.n_prime
    for j, kind in enumerate(scheme.block_kinds()):
        sub = scheme.components[kind]
        out = _encode_decode_corner(sub, y1[j * m:(j + 1) * m], y2[j * m:(j + 1) * m])
        z1_parts.append(out.z1)
        z2_parts.append(out.z2)
        flags = out.flags if flags is None else flags.merge(out.flags)
    return EncodeDecodeResult(np.concatenate(z1_parts), np.concatenate(z2_parts), flags)


# ---------------------------------------------------------------------------
# Reconstrucción y distorsión
# ---------------------------------------------------------------------------

TARGETS = ('joint', 'x1', 'x2')


def target_sizes(target: str, letter_sizes: Tuple[int, int]) -> Tuple[int, ...]:
    if target == 'joint':
        return tuple(letter_sizes)
    if target == 'x1':
        return (letter_sizes[0],)
    if target == 'x2':
        return (letter_sizes[1],)
    raise ValueError(f'objetivo de reconstrucción desconocido: {target}')


@dataclass(frozen=True, eq=False)
class ReconstructionMap:
    """Tabla ψ: Z1 x Z2 -> bloques del objetivo (pares de bloques para 'joint')."""
    table: np.ndarray
    target: str
    letter_sizes: Tuple[int, int]
    block_order: int = 1

    def __post_init__(self):
        table = np.asarray(self.table, dtype=np.int64)
        if table.ndim != 2:
            raise DimensionMismatchError('ψ es una tabla Z1 x Z2')
        limit = int(np.prod([s ** self.block_order for s in target_sizes(self.target, self.letter_sizes)]))
        if table.size and (table.min() < 0 or table.max() >= limit):
            raise DimensionMismatchError(f'ψ toma valores fuera de 0..{limit - 1}')
        table.setflags(write=False)
        object.__setattr__(self, 'table', table)

    @property
    def target_blocks(self) -> Tuple[int, ...]:
        return tuple(s ** self.block_order for s in target_sizes(self.target, self.letter_sizes))

    def to_json_dict(self) -> dict:
        return {'target': self.target, 'order': self.block_order, 'table': self.table.tolist()}


def apply_reconstruction(psi: ReconstructionMap, z1, z2) -> Dict[str, np.ndarray]:
    """Aplica ψ posición a posición y devuelve las letras reconstruidas por terminal ('x1' y/o 'x2')."""
    z1, z2 = np.asarray(z1), np.asarray(z2)
    if z1.shape != z2.shape:
        raise DimensionMismatchError('las palabras Ẑ1 y Ẑ2 deben tener la misma longitud')
    if z1.size and (z1.max() >= psi.table.shape[0] or z2.max() >= psi.table.shape[1]):
        raise DimensionMismatchError('símbolo auxiliar fuera del dominio de ψ')
    est = psi.table[z1, z2]
    n = psi.block_order
    a, b = psi.letter_sizes
    if psi.target == 'joint':
        blocks1, blocks2 = np.divmod(est, b ** n)
        return {'x1': blocks_to_letters(blocks1, a, n), 'x2': blocks_to_letters(blocks2, b, n)}
    size = a if psi.target == 'x1' else b
    return {psi.target: blocks_to_letters(est, size, n)}


def block_distortion(matrix: np.ndarray, sizes: Sequence[int], n: int) -> np.ndarray:
    """Distorsión por símbolo entre bloques: media de d letra a letra (índices de bloque en orden ravel)."""
    totals = [int(s) ** n for s in sizes]
    count = int(np.prod(totals))
    check_cell_cap(count * count * n, 'distorsión por bloques')
    parts = np.unravel_index(np.arange(count), totals)
    letters = [block_digits(parts[j], sizes[j], n) for j in range(len(sizes))]
    idx = np.ravel_multi_index(letters, sizes) if len(sizes) > 1 else letters[0]
    return matrix[idx[:, None, :], idx[None, :, :]].mean(axis=2)


@dataclass(frozen=True, eq=False)
class DistortionCriterion:
    matrix: np.ndarray
    target: str = 'x1'
    d_max: Optional[float] = None

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatchError('la matriz de distorsión debe ser cuadrada (objetivo x estimación)')
        if self.target not in TARGETS:
            raise ValueError(f'objetivo desconocido: {self.target}')
        d_max = float(m.max()) if self.d_max is None else float(self.d_max)
        if d_max <= 0:
            d_max = 1.0
        if np.any(m < 0) or np.any(m > d_max):
            raise ValueError(f'entradas de distorsión fuera de [0, {d_max}]')
        m.setflags(write=False)
        object.__setattr__(self, 'matrix', m)
        object.__setattr__(self, 'd_max', d_max)

    @classmethod
    def hamming(cls, size: int, target: str = 'x1') -> 'DistortionCriterion':
        return cls(1.0 - np.eye(size), target, 1.0)

    def check_sizes(self, letter_sizes: Tuple[int, int]) -> None:
        expected = int(np.prod(target_sizes(self.target, letter_sizes)))
        if self.matrix.shape[0] != expected:
            raise DimensionMismatchError(f'distorsión de {self.matrix.shape[0]} símbolos, el objetivo tiene {expected}')

    def source_cost(self, letter_sizes: Tuple[int, int], n: int) -> np.ndarray:
        """Coste c[y1, y2, t] de estimar el bloque t cuando la fuente emite los bloques (y1, y2)."""
        self.check_sizes(letter_sizes)
        blocks = block_distortion(self.matrix, target_sizes(self.target, letter_sizes), n)
        b1, b2 = letter_sizes[0] ** n, letter_sizes[1] ** n
        if self.target == 'joint':
            return blocks.reshape(b1, b2, -1)
        if self.target == 'x1':
            return np.broadcast_to(blocks[:, None, :], (b1, b2, blocks.shape[1]))
        return np.broadcast_to(blocks[None, :, :], (b1, b2, blocks.shape[1]))

    def expected(self, model: ChainModel, psi: ReconstructionMap) -> float:
        cost = self.source_cost(model.letter_sizes, model.block_order)
        j = model.joint_mass
        if psi.table.shape != j.shape[2:]:
            raise DimensionMismatchError(f'ψ {psi.table.shape} no cubre Z1 x Z2 = {j.shape[2:]}')
        per_cell = cost[:, :, psi.table]
        return float((j * per_cell).sum())

    def evaluate(self, sources: Dict[str, np.ndarray], estimates: Dict[str, np.ndarray],
                 letter_sizes: Tuple[int, int]) -> float:
        if self.target == 'joint':
            t = sources['x1'] * letter_sizes[1] + sources['x2']
            e = estimates['x1'] * letter_sizes[1] + estimates['x2']
        else:
            t, e = sources[self.target], estimates[self.target]
        return float(self.matrix[t, e].mean())


def optimal_reconstruction(model: ChainModel, criterion: DistortionCriterion) -> ReconstructionMap:
    """ψ(z1, z2) = argmin_t E[d | z1, z2] calculado de forma exacta sobre el modelo."""
    cost = criterion.source_cost(model.letter_sizes, model.block_order)
    per_t = np.einsum('abcd,abt->cdt', model.joint_mass, cost)
    return ReconstructionMap(per_t.argmin(axis=2), criterion.target, model.letter_sizes, model.block_order)


def identity_reconstruction(model: ChainModel) -> ReconstructionMap:
    z1, z2 = model.aux_sizes
    b1, b2 = model.block_sizes
    if (z1, z2) != (b1, b2):
        raise DimensionMismatchError('la reconstrucción identidad requiere Z1 = X1^n y Z2 = X2^n')
    table = np.arange(z1)[:, None] * b2 + np.arange(z2)[None, :]
    return ReconstructionMap(table, 'joint', model.letter_sizes, model.block_order)


# ---------------------------------------------------------------------------
# Experimentos
# ---------------------------------------------------------------------------

def _is_identity(channel: np.ndarray) -> bool:
    return channel.shape[0] == channel.shape[1] and np.array_equal(channel, np.eye(channel.shape[0]))


def _check_specialization(problem: str, model: ChainModel, d: Optional[DistortionCriterion]) -> None:
    errors = []
    if problem not in PROBLEMS:
        errors.append(f'problema desconocido: {problem}')
    if problem == 'wynerZiv' and not _is_identity(model.aux2):
        errors.append('wynerZiv requiere Z2 = X2^n (canal identidad en aux2)')
    if problem in ('slepianWolf', 'bergerYeung') and not _is_identity(model.aux1):
        errors.append(f'{problem} requiere Z1 = X1^n (canal identidad en aux1)')
    if problem == 'slepianWolf' and not _is_identity(model.aux2):
        errors.append('slepianWolf requiere Z2 = X2^n (canal identidad en aux2)')
    wanted = {'joint': 'joint', 'partial': 'x1', 'wynerZiv': 'x1', 'bergerYeung': 'x2'}.get(problem)
    if wanted is not None:
        if d is None:
            errors.append(f'{problem} necesita un criterio de distorsión')
        elif d.target != wanted:
            errors.append(f'{problem} necesita una distorsión sobre {wanted}, recibida sobre {d.target}')
    if errors:
        raise ConfigError(errors)


@dataclass
class ExperimentPoint:
    problem: str
    n: int
    n_prime: int
    lam: Optional[float]
    r1: float
    r2: float
    target_d: Optional[float]
    measured_d: Optional[float]
    error_rate: float
    trials: int
    seed: int
    sigma_d: Optional[float] = None
    sigma_error: float = 0.0
    inexact_successes: int = 0

    @property
    def delta(self) -> Optional[float]:
        if self.measured_d is None or self.target_d is None:
            return None
        return self.measured_d - self.target_d

    def as_row(self) -> dict:
        return {'problem': self.problem, 'n': self.n, 'nPrime': self.n_prime, 'lambda': self.lam,
                'r1': self.r1, 'r2': self.r2, 'targetD': self.target_d, 'measuredD': self.measured_d,
                'errorRate': self.error_rate, 'trials': self.trials, 'seed': self.seed}


@dataclass
class ExperimentReport:
    points: List[ExperimentPoint] = field(default_factory=list)

    @property
    def delta_nonincreasing(self) -> bool:
        pts = [p for p in self.points if p.delta is not None]
        return is_monotone_nonincreasing([max(p.delta, 0.0) for p in pts], [p.sigma_d or 0.0 for p in pts], 2.0)

    @property
    def error_monotone(self) -> bool:
        return is_monotone_nonincreasing([p.error_rate for p in self.points],
                                         [p.sigma_error for p in self.points], 2.0)

    def rows(self) -> List[dict]:
        return [p.as_row() for p in self.points]


def build_scheme(model: ChainModel, epsilons: CodingEpsilons, n_prime: int, seed: int, corner: int = 0,
                 lam: Optional[float] = None, blocks: int = 10, budget: Optional[int] = None) -> TwoTerminalScheme:
    if lam is None:
        return build_corner_scheme(model, corner, epsilons, n_prime, seed, budget)
    s0 = build_corner_scheme(model, 0, epsilons, n_prime, seed, budget)
    s1 = build_corner_scheme(model, 1, epsilons, n_prime, seed, budget)
    return build_timeshared_scheme(s0, s1, lam, blocks)


def run_rd_experiment(problem: str, model: ChainModel, psi: Optional[ReconstructionMap],
                      d: Optional[DistortionCriterion], epsilons: CodingEpsilons, schedule: Sequence[int],
                      trials: int, seed: int, corner: Optional[int] = None, lam: Optional[float] = None,
                      blocks: int = 10, budget: Optional[int] = None, threads: int = 1) -> ExperimentReport:
    """Mide (R1, R2, distorsión media, tasa de error) en cada n' del calendario.

    Las componentes sin pérdidas (X1 y X2 en slepianWolf, X1 en bergerYeung) informan la tasa de error
    de bloque en lugar de distorsión.
    """
    _check_specialization(problem, model, d)
    if trials <= 0:
        raise ValueError('trials debe ser > 0')
    if corner is None:
        corner = 1 if problem == 'wynerZiv' else 0
    lossy = problem != 'slepianWolf'
    if lossy and psi is None:
        psi = optimal_reconstruction(model, d)
    target_d = d.expected(model, psi) if lossy else None
    a, b = model.letter_sizes
    n = model.block_order
    report = ExperimentReport()
    for n_prime in schedule:
        scheme = build_scheme(model, epsilons, n_prime, seed, corner, lam, blocks, budget)
        length = scheme.input_length

        def trial(t: int, scheme=scheme, length=length, n_prime=n_prime) -> Dict[str, float]:
            rng = derive_rng(seed, STREAM_TRIALS, n_prime, t)
            x1, x2 = sample_with_rng(model.source, length, rng)
            out = encode_decode(scheme, x1, x2)
            row: Dict[str, float] = {}
            src = {'x1': x1, 'x2': x2}
            if problem == 'slepianWolf':
                r1 = blocks_to_letters(out.z1, a, n)
                r2 = blocks_to_letters(out.z2, b, n)
                exact = bool(np.array_equal(r1, x1) and np.array_equal(r2, x2))
                row['errors'] = int(not exact)
                row['success_not_exact'] = int(out.flags.success and not exact)
                return row
            est = apply_reconstruction(psi, out.z1, out.z2)
            dist = d.evaluate(src, est, model.letter_sizes)
            row['distortion'] = dist
            row['distortion_sq'] = dist * dist
            if problem == 'bergerYeung':
                row['errors'] = int(not np.array_equal(blocks_to_letters(out.z1, a, n), x1))
            else:
                row['errors'] = int(not out.flags.success)
            return row

        tally = run_trials(trial, trials, threads)
        errors = int(tally.get('errors', 0))
        measured = sigma_d = None
        if lossy:
            measured = tally['distortion'] / trials
            var = max(tally['distortion_sq'] / trials - measured ** 2, 0.0)
            sigma_d = math.sqrt(var / trials)
        inexact = int(tally.get('success_not_exact', 0))
        if not lossy and inexact:
            logger.warning('n\'=%d: %d ensayos con éxito declarado sin reconstrucción exacta', n_prime, inexact)
        r1, r2 = scheme.rates()
        point = ExperimentPoint(problem=problem, n=n, n_prime=n_prime, lam=lam, r1=r1, r2=r2, target_d=target_d,
                                measured_d=measured, error_rate=errors / trials, trials=trials, seed=seed,
                                sigma_d=sigma_d, sigma_error=binomial_sigma(errors, trials),
                                inexact_successes=inexact)
        report.points.append(point)
        logger.info('%s n\'=%d: R=(%.4f, %.4f) D=%s error=%.4f', problem, n_prime, r1, r2,
                    'n/a' if measured is None else f'{measured:.4f}', point.error_rate)
    return report
