"""Medidas exactas de probabilidad e información sobre alfabetos finitos.

Todas las tablas son densas (numpy) y todas las magnitudes se expresan en bits.
El modelo de cadena Z1 -> X1 -> X2 -> Z2 que consumen los demás servicios se construye aquí.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import entr

from ..config import settings
from .errors import (BudgetExceededError, DimensionMismatchError, FactorizationError,
                     TableValidationError)
from .seeding import derive_rng

logger = logging.getLogger(__name__)

MASS_TOLERANCE = 1e-9
FACTORIZATION_TOLERANCE = 1e-9
LN2 = math.log(2.0)

AxesLike = Union[int, Sequence[int]]

# Ejes de la tabla conjunta (X1^n, X2^n, Z1, Z2) de un ChainModel
AX_Y1, AX_Y2, AX_Z1, AX_Z2 = 0, 1, 2, 3


@dataclass(frozen=True)
class Alphabet:
    size: int
    labels: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        if int(self.size) < 1:
            raise TableValidationError(f'alfabeto con tamaño {self.size} (< 1)')
        if self.labels is not None:
            labels = tuple(str(x) for x in self.labels)
            if len(labels) != self.size or len(set(labels)) != len(labels):
                raise TableValidationError('las etiquetas del alfabeto deben ser distintas y tantas como símbolos')
            object.__setattr__(self, 'labels', labels)


def check_cell_cap(cells: int, what: str = 'tabla', cap: Optional[int] = None) -> None:
    cap = settings.table_cell_cap if cap is None else cap
    if cells > cap:
        raise BudgetExceededError(f'{what}: {cells} celdas superan el límite de {cap}', required=cells, budget=cap)


class ProbabilityTable:
    """pmf conjunta densa sobre un producto de alfabetos finitos.

    Args:
        mass: array no negativo; se renormaliza si la masa total se desvía de 1 menos de 1e-9.
        axes: alfabetos por eje (por defecto se deducen de la forma).
        name: nombre usado en los mensajes de error.
    """

    def __init__(self, mass, axes: Optional[Sequence[Alphabet]] = None, name: str = 'p'):
        arr = np.array(mass, dtype=float)
        if arr.ndim == 0:
            raise TableValidationError(f'{name}: la tabla necesita al menos un eje')
        check_cell_cap(arr.size, name)
        if not np.all(np.isfinite(arr)):
            raise TableValidationError(f'{name}: contiene valores no finitos')
        if np.any(arr < 0):
            raise TableValidationError(f'{name}: entrada negativa ({arr.min():.3g})')
        total = float(arr.sum())
        deviation = abs(total - 1.0)
        if deviation >= MASS_TOLERANCE:
            raise TableValidationError(f'{name}: la masa total es {total:.9g} (desviación {deviation:.3g})')
        if deviation > 0:
            arr = arr / total
        if axes is None:
            axes = tuple(Alphabet(s) for s in arr.shape)
        axes = tuple(axes)
        if tuple(a.size for a in axes) != arr.shape:
            raise DimensionMismatchError(f'{name}: forma {arr.shape} no coincide con los alfabetos {[a.size for a in axes]}')
        arr.setflags(write=False)
        self._mass = arr
        self.axes = axes
        self.name = name

    @property
    def mass(self) -> np.ndarray:
        return self._mass

    @property
    def shape(self) -> Tuple[int, ...]:
        return self._mass.shape

    @property
    def ndim(self) -> int:
        return self._mass.ndim

    def __repr__(self) -> str:
        return f'ProbabilityTable(name={self.name!r}, shape={self.shape})'

    def axes_tuple(self, axes: AxesLike) -> Tuple[int, ...]:
        if isinstance(axes, (int, np.integer)):
            axes = (int(axes),)
        axes = tuple(int(a) for a in axes)
        if not axes:
            raise DimensionMismatchError('subconjunto de ejes vacío')
        if len(set(axes)) != len(axes) or any(a < 0 or a >= self.ndim for a in axes):
            raise DimensionMismatchError(f'ejes {axes} no válidos para una tabla de {self.ndim} ejes')
        return axes

    def marginal_array(self, axes: AxesLike) -> np.ndarray:
        axes = self.axes_tuple(axes)
        others = tuple(i for i in range(self.ndim) if i not in axes)
        m = self._mass.sum(axis=others) if others else self._mass
        # sum conserva el orden original de los ejes restantes; se reordena al pedido
        kept = [i for i in range(self.ndim) if i in axes]
        return np.transpose(m, [kept.index(a) for a in axes])

    def marginal(self, axes: AxesLike) -> 'ProbabilityTable':
        axes = self.axes_tuple(axes)
        return ProbabilityTable(self.marginal_array(axes), [self.axes[a] for a in axes], name=f'{self.name}_marg')

    def conditional(self, target: AxesLike, given: AxesLike) -> Tuple[np.ndarray, np.ndarray]:
        """Devuelve (p(target | given), máscara de celdas alcanzables) con los ejes `given` primero.

        Las celdas condicionantes de masa cero quedan marcadas como no alcanzables y su fila vale 0.
        """
        target = self.axes_tuple(target)
        given = self.axes_tuple(given)
        if set(target) & set(given):
            raise DimensionMismatchError('ejes solapados en la condicional')
        joint = self.marginal_array(given + target)
        cond_shape = joint.shape[:len(given)]
        den = joint.reshape(cond_shape + (-1,)).sum(axis=-1)
        reachable = den > 0
        safe = np.where(reachable, den, 1.0)
        cond = joint / safe.reshape(cond_shape + (1,) * len(target))
        cond = np.where(reachable.reshape(cond_shape + (1,) * len(target)), cond, 0.0)
        return cond, reachable

    def to_json_dict(self) -> Dict[str, list]:
        return {'axes': [int(s) for s in self.shape], 'mass': [float(x) for x in self._mass.ravel()]}

    @classmethod
    def from_json_dict(cls, payload: dict, name: str = 'p') -> 'ProbabilityTable':
        try:
            sizes = [int(s) for s in payload['axes']]
            mass = [float(x) for x in payload['mass']]
        except (KeyError, TypeError, ValueError) as exc:
            raise TableValidationError(f'{name}: objeto de tabla mal formado ({exc})') from exc
        expected = int(np.prod(sizes)) if sizes else 0
        if len(mass) != expected:
            raise TableValidationError(f'{name}: mass tiene {len(mass)} valores, se esperaban {expected}')
        return cls(np.array(mass).reshape(sizes), name=name)


# ---------------------------------------------------------------------------
# Medidas de información
# ---------------------------------------------------------------------------

def _entropy_array(q: np.ndarray) -> float:
    return float(entr(np.asarray(q, dtype=float).ravel()).sum() / LN2)


def entropy(p: ProbabilityTable, axes: AxesLike) -> float:
    h = _entropy_array(p.marginal_array(axes))
    return max(h, 0.0)


def conditional_entropy(p: ProbabilityTable, axes_a: AxesLike, axes_c: Optional[AxesLike] = None) -> float:
    a = p.axes_tuple(axes_a)
    if axes_c is None or (not isinstance(axes_c, int) and len(tuple(axes_c)) == 0):
        return entropy(p, a)
    c = p.axes_tuple(axes_c)
    if set(a) & set(c):
        raise DimensionMismatchError('ejes solapados en la entropía condicional')
    return max(entropy(p, a + c) - entropy(p, c), 0.0)


def mutual_information(p: ProbabilityTable, axes_a: AxesLike, axes_b: AxesLike) -> float:
    a, b = p.axes_tuple(axes_a), p.axes_tuple(axes_b)
    if set(a) & set(b):
        raise DimensionMismatchError(f'ejes solapados {a} y {b}')
    value = entropy(p, a) + entropy(p, b) - entropy(p, a + b)
    return max(value, 0.0)


def conditional_mutual_information(p: ProbabilityTable, axes_a: AxesLike, axes_b: AxesLike,
                                   axes_c: Optional[AxesLike] = None) -> float:
    """I(A;B|C) = H(A,C) + H(B,C) - H(C) - H(A,B,C); con C vacío se reduce a I(A;B)."""
    a, b = p.axes_tuple(axes_a), p.axes_tuple(axes_b)
    if axes_c is None or (not isinstance(axes_c, int) and len(tuple(axes_c)) == 0):
        return mutual_information(p, a, b)
    c = p.axes_tuple(axes_c)
    if set(a) & set(b) or set(a) & set(c) or set(b) & set(c):
        raise DimensionMismatchError('los tres conjuntos de ejes deben ser disjuntos')
    value = entropy(p, a + c) + entropy(p, b + c) - entropy(p, c) - entropy(p, a + b + c)
    return max(value, 0.0)


def fano_bound(alphabet_size: int, error_prob: float) -> float:
    if alphabet_size < 1:
        raise ValueError('alphabet_size debe ser >= 1')
    if not 0.0 <= error_prob <= 1.0:
        raise ValueError(f'probabilidad de error fuera de [0,1]: {error_prob}')
    return 1.0 + math.log2(alphabet_size) * error_prob


def map_decoder_error(joint: ProbabilityTable) -> Tuple[float, float]:
    """(probabilidad de error del decodificador MAP de U dado V, H(U|V)) para una tabla (U, V)."""
    if joint.ndim != 2:
        raise DimensionMismatchError('map_decoder_error espera una tabla (U, V)')
    pe = 1.0 - float(joint.mass.max(axis=0).sum())
    return max(pe, 0.0), conditional_entropy(joint, 0, 1)


# ---------------------------------------------------------------------------
# Canales y fuentes de uso habitual
# ---------------------------------------------------------------------------

def validate_channel(matrix, rows: Optional[int] = None, name: str = 'q') -> np.ndarray:
    arr = np.array(matrix, dtype=float)
    if arr.ndim != 2:
        raise DimensionMismatchError(f'{name}: un canal es una matriz (entrada x salida)')
    if rows is not None and arr.shape[0] != rows:
        raise DimensionMismatchError(f'{name}: {arr.shape[0]} filas, se esperaban {rows}')
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise TableValidationError(f'{name}: entradas negativas o no finitas')
    sums = arr.sum(axis=1)
    worst = float(np.max(np.abs(sums - 1.0)))
    if worst >= MASS_TOLERANCE:
        raise TableValidationError(f'{name}: una fila suma {sums[np.argmax(np.abs(sums - 1.0))]:.9g} (desviación {worst:.3g})')
    arr = arr / sums[:, None]
    arr.setflags(write=False)
    return arr


def identity_channel(size: int) -> np.ndarray:
    return validate_channel(np.eye(size), size, 'identity')


def constant_channel(size: int, card: int = 1, symbol: int = 0) -> np.ndarray:
    arr = np.zeros((size, card))
    arr[:, symbol] = 1.0
    return validate_channel(arr, size, 'constant')


def bsc_channel(crossover: float) -> np.ndarray:
    if not 0.0 <= crossover <= 1.0:
        raise ValueError(f'crossover fuera de [0,1]: {crossover}')
    return validate_channel([[1 - crossover, crossover], [crossover, 1 - crossover]], 2, 'bsc')


def dsbs(crossover: float) -> ProbabilityTable:
    """Fuente binaria doblemente simétrica: X1 uniforme y X2 = X1 invertido con probabilidad `crossover`."""
    ch = bsc_channel(crossover)
    return ProbabilityTable(0.5 * ch, name=f'dsbs({crossover})')


def product_table(p1, p2, name: str = 'p') -> ProbabilityTable:
    return ProbabilityTable(np.outer(np.asarray(p1, float), np.asarray(p2, float)), name=name)


def block_source(p: ProbabilityTable, n: int) -> ProbabilityTable:
    """Producto i.i.d. de orden n de una tabla (X1, X2); la primera letra del bloque es la más significativa."""
    if p.ndim != 2:
        raise DimensionMismatchError('block_source espera una tabla (X1, X2)')
    if n < 1:
        raise ValueError('el orden de bloque debe ser >= 1')
    a, b = p.shape
    check_cell_cap((a * b) ** n, f'{p.name}^{n}')
    arr = p.mass
    for _ in range(n - 1):
        ra, rb = arr.shape
        arr = np.einsum('ab,cd->acbd', arr, p.mass).reshape(ra * a, rb * b)
    return ProbabilityTable(arr, name=f'{p.name}^{n}')


def block_digits(index: np.ndarray, size: int, n: int) -> np.ndarray:
    """Letras (n últimas dimensiones) de los índices de bloque, primera letra más significativa."""
    index = np.asarray(index)
    powers = size ** np.arange(n - 1, -1, -1)
    return (index[..., None] // powers) % size


def letters_to_blocks(letters: np.ndarray, size: int, n: int) -> np.ndarray:
    letters = np.asarray(letters)
    if letters.shape[-1] % n:
        raise DimensionMismatchError(f'longitud {letters.shape[-1]} no es múltiplo del orden {n}')
    grouped = letters.reshape(letters.shape[:-1] + (-1, n))
    powers = size ** np.arange(n - 1, -1, -1)
    return (grouped * powers).sum(axis=-1)


def blocks_to_letters(blocks: np.ndarray, size: int, n: int) -> np.ndarray:
    digits = block_digits(blocks, size, n)
    return digits.reshape(digits.shape[:-2] + (-1,))


# ---------------------------------------------------------------------------
# Modelo de cadena
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InfoSummary:
    block_order: int
    h_x1: float
    h_x2: float
    i_x1_z1: float
    i_x2_z2: float
    i_x1_z1_given_z2: float
    i_x2_z2_given_z1: float
    i_x1x2_z1z2: float
    i_z1_z2: float
    i_x1_z1_given_x2: float
    i_x2_z2_given_x1: float

    def as_dict(self) -> Dict[str, float]:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    def per_symbol(self) -> Dict[str, float]:
        n = float(self.block_order)
        out = {k: v / n for k, v in self.as_dict().items() if k != 'block_order'}
        out['block_order'] = self.block_order
        return out


@dataclass(frozen=True, eq=False)
class ChainModel:
    source: ProbabilityTable
    aux1: np.ndarray
    aux2: np.ndarray
    block_order: int = 1

    @cached_property
    def block(self) -> ProbabilityTable:
        return block_source(self.source, self.block_order)

    @property
    def letter_sizes(self) -> Tuple[int, int]:
        return self.source.shape

    @property
    def block_sizes(self) -> Tuple[int, int]:
        return self.block.shape

    @property
    def aux_sizes(self) -> Tuple[int, int]:
        return self.aux1.shape[1], self.aux2.shape[1]

    @cached_property
    def joint_mass(self) -> np.ndarray:
        pn = self.block.mass
        return pn[:, :, None, None] * self.aux1[:, None, :, None] * self.aux2[None, :, None, :]

    def joint(self) -> ProbabilityTable:
        """Ley conjunta de (X1^n, X2^n, Z1, Z2) = p_n q1 q2."""
        return ProbabilityTable(self.joint_mass, name='chain')

    @cached_property
    def _joint_table(self) -> ProbabilityTable:
        return self.joint()

    def info_summary(self) -> InfoSummary:
        j = self._joint_table
        cmi = conditional_mutual_information
        return InfoSummary(
            block_order=self.block_order,
            h_x1=entropy(j, AX_Y1),
            h_x2=entropy(j, AX_Y2),
            i_x1_z1=mutual_information(j, AX_Y1, AX_Z1),
            i_x2_z2=mutual_information(j, AX_Y2, AX_Z2),
            i_x1_z1_given_z2=cmi(j, AX_Y1, AX_Z1, AX_Z2),
            i_x2_z2_given_z1=cmi(j, AX_Y2, AX_Z2, AX_Z1),
            i_x1x2_z1z2=mutual_information(j, (AX_Y1, AX_Y2), (AX_Z1, AX_Z2)),
            i_z1_z2=mutual_information(j, AX_Z1, AX_Z2),
            i_x1_z1_given_x2=cmi(j, AX_Y1, AX_Z1, AX_Y2),
            i_x2_z2_given_x1=cmi(j, AX_Y2, AX_Z2, AX_Y1),
        )

    def pair_law(self, axes: Tuple[int, ...]) -> ProbabilityTable:
        return self._joint_table.marginal(axes)


def compose_chain(source: ProbabilityTable, aux1, aux2, n: int = 1) -> ChainModel:
    if source.ndim != 2:
        raise DimensionMismatchError('la fuente debe ser una tabla (X1, X2)')
    if n < 1:
        raise ValueError('el orden de bloque debe ser >= 1')
    a, b = source.shape
    q1 = validate_channel(aux1, a ** n, 'aux1')
    q2 = validate_channel(aux2, b ** n, 'aux2')
    check_cell_cap((a * b) ** n * q1.shape[1] * q2.shape[1], 'modelo de cadena')
    model = ChainModel(source=source, aux1=q1, aux2=q2, block_order=int(n))
    logger.debug('compose_chain: n=%d |Z1|=%d |Z2|=%d', n, q1.shape[1], q2.shape[1])
    return model


@dataclass(frozen=True)
class FactorizationVerdict:
    holds: bool
    max_deviation: float


def verify_factorization(joint: Union[ProbabilityTable, np.ndarray]) -> FactorizationVerdict:
    """Compara la tabla con p(x1,x2) q1(z1|x1) q2(z2|x2) reconstruido a partir de sus propias marginales."""
    mass = joint.mass if isinstance(joint, ProbabilityTable) else np.asarray(joint, float)
    if mass.ndim != 4:
        raise DimensionMismatchError('verify_factorization espera una tabla de 4 ejes')
    p12 = mass.sum(axis=(2, 3))
    p1z1 = mass.sum(axis=(1, 3))
    p2z2 = mass.sum(axis=(0, 2))
    p1 = p1z1.sum(axis=1, keepdims=True)
    p2 = p2z2.sum(axis=1, keepdims=True)
    q1 = np.divide(p1z1, p1, out=np.zeros_like(p1z1), where=p1 > 0)
    q2 = np.divide(p2z2, p2, out=np.zeros_like(p2z2), where=p2 > 0)
    rebuilt = p12[:, :, None, None] * q1[:, None, :, None] * q2[None, :, None, :]
    dev = float(np.max(np.abs(mass - rebuilt)))
    return FactorizationVerdict(holds=dev <= FACTORIZATION_TOLERANCE, max_deviation=dev)


@dataclass
class ChainIdentityReport:
    values: Dict[str, float]
    residuals: Dict[str, float]
    checks: Dict[str, bool] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def chain_identity_check(model: ChainModel) -> ChainIdentityReport:
    verdict = verify_factorization(model.joint_mass)
    if not verdict.holds:
        raise FactorizationError(f'el modelo no factoriza (desviación {verdict.max_deviation:.3g})')
    s = model.info_summary()
    values = {
        'i_y1_z1': s.i_x1_z1,
        'i_y2_z2': s.i_x2_z2,
        'i_y1_z1_given_z2': s.i_x1_z1_given_z2,
        'i_y2_z2_given_z1': s.i_x2_z2_given_z1,
        'i_y1y2_z1z2': s.i_x1x2_z1z2,
        'i_z1_z2': s.i_z1_z2,
    }
    residuals = {
        'conditioning_y1': values['i_y1_z1_given_z2'] - values['i_y1_z1'],
        'conditioning_y2': values['i_y2_z2_given_z1'] - values['i_y2_z2'],
        'decomposition_corner0': values['i_y1y2_z1z2'] - values['i_y1_z1'] - values['i_y2_z2_given_z1'],
        'decomposition_corner1': values['i_y1y2_z1z2'] - values['i_y2_z2'] - values['i_y1_z1_given_z2'],
    }
    checks = {
        'conditioning_y1': residuals['conditioning_y1'] <= 1e-12,
        'conditioning_y2': residuals['conditioning_y2'] <= 1e-12,
        'decomposition_corner0': abs(residuals['decomposition_corner0']) <= 1e-10,
        'decomposition_corner1': abs(residuals['decomposition_corner1']) <= 1e-10,
    }
    return ChainIdentityReport(values=values, residuals=residuals, checks=checks)


def random_chain_model(seed: int, index: int = 0, sizes: Tuple[int, int] = (2, 2),
                       cards: Tuple[int, int] = (2, 2), n: int = 1) -> ChainModel:
    """Modelo de cadena aleatorio (Dirichlet uniforme en cada tabla) derivado de (seed, index)."""
    rng = derive_rng(seed, 7, index)
    src = rng.dirichlet(np.ones(sizes[0] * sizes[1])).reshape(sizes)
    q1 = rng.dirichlet(np.ones(cards[0]), size=sizes[0] ** n)
    q2 = rng.dirichlet(np.ones(cards[1]), size=sizes[1] ** n)
    return compose_chain(ProbabilityTable(src, name=f'random[{index}]'), q1, q2, n)


# ---------------------------------------------------------------------------
# Muestreo y tipos empíricos
# ---------------------------------------------------------------------------

def sample_iid(p: ProbabilityTable, n: int, seed: int, stream: Iterable[int] = ()) -> Tuple[np.ndarray, ...]:
    if n < 1:
        raise ValueError('la longitud n debe ser >= 1')
    rng = derive_rng(seed, *tuple(stream))
    return sample_with_rng(p, n, rng)


def sample_with_rng(p: ProbabilityTable, n: int, rng: np.random.Generator) -> Tuple[np.ndarray, ...]:
    flat = rng.choice(p.mass.size, size=n, p=p.mass.ravel())
    return tuple(np.asarray(a, dtype=np.int64) for a in np.unravel_index(flat, p.shape))


def apply_channel(inputs: np.ndarray, channel: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Pasa cada símbolo por el canal de forma independiente (muestreo por inversión de la CDF)."""
    cdf = np.cumsum(channel, axis=1)
    u = rng.random(np.shape(inputs))
    out = (u[..., None] > cdf[inputs]).sum(axis=-1)
    return np.minimum(out, channel.shape[1] - 1)


def as_seq_tuple(seqs) -> Tuple[np.ndarray, ...]:
    if isinstance(seqs, np.ndarray) and seqs.ndim == 1:
        return (seqs,)
    if isinstance(seqs, (tuple, list)) and seqs and isinstance(seqs[0], (np.ndarray, list, tuple)):
        return tuple(np.asarray(s, dtype=np.int64) for s in seqs)
    return (np.asarray(seqs, dtype=np.int64),)


def empirical_distribution(seqs, sizes: Optional[Sequence[int]] = None) -> ProbabilityTable:
    seqs = as_seq_tuple(seqs)
    n = len(seqs[0])
    if n == 0:
        raise ValueError('secuencia vacía')
    if any(len(s) != n for s in seqs):
        raise DimensionMismatchError('las secuencias emparejadas deben tener la misma longitud')
    if sizes is None:
        sizes = tuple(int(s.max()) + 1 for s in seqs)
    sizes = tuple(int(s) for s in sizes)
    flat = np.ravel_multi_index(seqs, sizes)
    counts = np.bincount(flat, minlength=int(np.prod(sizes))).reshape(sizes)
    return ProbabilityTable(counts / n, name='empirical')
