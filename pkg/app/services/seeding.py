"""Generadores por ensayo `default_rng([seed, *contadores])`: el agregado no depende del número de hilos."""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Sequence

import numpy as np

logger = logging.getLogger(__name__)

# Etiquetas fijas para separar los flujos de un mismo experimento
STREAM_CODEBOOK = 0
STREAM_BINS = 1
STREAM_TRIALS = 2
STREAM_RESTARTS = 3


def derive_rng(seed: int, *counters: int) -> np.random.Generator:
    if seed is None:
        raise ValueError('seed es obligatorio (no se siembra con el reloj)')
    key = [int(seed) & 0xFFFFFFFFFFFF] + [int(c) for c in counters]
    return np.random.default_rng(key)


def run_trials(trial_fn: Callable[[int], Dict[str, float]], trials: int, threads: int = 1) -> Dict[str, float]:
    """Ejecuta `trial_fn(t)` para t en [0, trials) y suma los contadores devueltos.

    La reducción es una suma por clave, así que el resultado es idéntico con cualquier `threads`.
    """
    if trials <= 0:
        raise ValueError('trials debe ser > 0')
    threads = max(1, int(threads))

    def _chunk(bounds: Sequence[int]) -> List[Dict[str, float]]:
        return [trial_fn(t) for t in range(bounds[0], bounds[1])]

    step = (trials + threads - 1) // threads
    chunks = [(s, min(trials, s + step)) for s in range(0, trials, step)]
    if threads == 1 or len(chunks) == 1:
        partials = [_chunk(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            partials = list(pool.map(_chunk, chunks))
    total: Dict[str, float] = {}
    # se suma en el orden de t: la suma en coma flotante tampoco depende de los hilos
    for part in partials:
        for row in part:
            for k, v in row.items():
                total[k] = total.get(k, 0) + v
    logger.debug('run_trials: %d ensayos en %d trozos', trials, len(chunks))
    return total


def binomial_sigma(failures: float, trials: int) -> float:
    if trials <= 0:
        return 0.0
    p = failures / trials
    return float(np.sqrt(max(p * (1.0 - p), 0.0) / trials))


def is_monotone_nonincreasing(rates: Sequence[float], sigmas: Sequence[float], k: float = 2.0) -> bool:
    """Tendencia no creciente dentro de k desviaciones típicas entre puntos consecutivos."""
    for i in range(len(rates) - 1):
        slack = k * float(np.hypot(sigmas[i], sigmas[i + 1]))
        if rates[i + 1] > rates[i] + slack + 1e-12:
            return False
    return True
