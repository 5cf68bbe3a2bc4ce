from __future__ import annotations

import logging
import math
import pathlib
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import orjson
import pandas as pd

from .. import TOOL_NAME, __version__
from .errors import LabError

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.9g'
JSON_OPTIONS = orjson.OPT_SORT_KEYS | orjson.OPT_INDENT_2 | orjson.OPT_SERIALIZE_NUMPY


def header_line(config_hash: str) -> str:
    return f'# {TOOL_NAME} {__version__} config={config_hash}'


def round_sig(value: Any) -> Any:
    """Redondea floats (también dentro de listas y dicts) a 9 cifras significativas."""
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return float(f'{v:.9g}') if math.isfinite(v) else v
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, np.ndarray):
        return round_sig(value.tolist())
    if isinstance(value, dict):
        return {k: round_sig(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [round_sig(v) for v in value]
    return value


def _columns(rows: Sequence[dict], columns: Optional[Sequence[str]]) -> List[str]:
    if columns is not None:
        return list(columns)
    out: List[str] = []
    for r in rows:
        for k in r:
            if k not in out:
                out.append(k)
    return out


def _prepare(path) -> pathlib.Path:
    path = pathlib.Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise LabError(f'no se puede crear el directorio {path.parent}: {exc}') from exc
    return path


def emit_results(rows: Sequence[dict], fmt: str, path, config_hash: str,
                 columns: Optional[Sequence[str]] = None, name: str = 'results') -> int:
    """Escribe las filas de un informe en CSV o JSON y devuelve el número de filas.

    El CSV empieza con una línea de comentario con herramienta, versión y hash de configuración;
    un informe vacío produce solo esa línea y la cabecera de columnas.
    """
    if fmt not in ('csv', 'json'):
        raise ValueError(f'formato desconocido: {fmt}')
    cols = _columns(rows, columns)
    data = [{c: round_sig(r.get(c)) for c in cols} for r in rows]
    path = _prepare(path)
    try:
        if fmt == 'csv':
            df = pd.DataFrame(data, columns=cols)
            with open(path, 'w', encoding='utf-8', newline='') as f:
                f.write(header_line(config_hash) + '\n')
                df.to_csv(f, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
        else:
            doc = {'tool': TOOL_NAME, 'version': __version__, 'configHash': config_hash, 'name': name,
                   'columns': cols, 'rows': data}
            path.write_bytes(orjson.dumps(doc, option=JSON_OPTIONS))
    except OSError as exc:
        raise LabError(f'no se puede escribir {path}: {exc}') from exc
    logger.info('%s: %d filas -> %s', name, len(data), path)
    return len(data)


def emit_document(doc: Dict[str, Any], path) -> None:
    """JSON libre (testigos, manifiesto) con claves ordenadas."""
    path = _prepare(path)
    try:
        path.write_bytes(orjson.dumps(round_sig(doc), option=JSON_OPTIONS))
    except OSError as exc:
        raise LabError(f'no se puede escribir {path}: {exc}') from exc


def read_results(path) -> Tuple[str, List[dict]]:
    """Lee un artefacto emitido y devuelve (línea de cabecera, filas)."""
    path = pathlib.Path(path)
    if path.suffix == '.json':
        doc = orjson.loads(path.read_bytes())
        header = f'# {doc["tool"]} {doc["version"]} config={doc["configHash"]}'
        return header, [{c: r.get(c) for c in doc['columns']} for r in doc['rows']]
    with open(path, encoding='utf-8') as f:
        header = f.readline().rstrip('\n')
        df = pd.read_csv(f)
    df = df.astype(object).where(pd.notna(df), None)
    return header, df.to_dict(orient='records')
