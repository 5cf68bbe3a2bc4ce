"""Línea de comandos del laboratorio: `python -m app {info,region,simulate,verify} --config exp.json`.

Códigos de salida:
    0  éxito
    1  otro error del laboratorio (p. ej. ruta no escribible)
    2  configuración, tabla o dimensiones inválidas
    3  una comprobación de verificación falló
    4  presupuesto excedido o ventana de dimensionado vacía
"""
import argparse
import logging
import pathlib
import sys
from typing import List, Optional, get_args

from . import __version__
from .config import settings
from .models.config import Problem, parse_config
from .services.errors import (BudgetExceededError, ConfigError, DimensionMismatchError, LabError, SizingError,
                              TableValidationError, VerificationFailure)
from .services.pipeline import COMMANDS, SUITES, run

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_VERIFICATION = 3
EXIT_BUDGET = 4


def setup_logger(verbosity: int = 0) -> int:
    """Configura el logging raíz según -v/-q; sin flags manda LAB_LOG_LEVEL. Devuelve el nivel efectivo."""
    if verbosity > 0:
        level = logging.DEBUG
    elif verbosity < 0:
        level = logging.WARNING
    else:
        level = getattr(logging, settings.log_level.upper(), logging.INFO)
    logging.basicConfig(level=level, format='[%(asctime)s] %(levelname)s %(name)s - %(message)s',
                        datefmt='%H:%M:%S')
    logging.getLogger().setLevel(level)
    logging.debug('Logger inicializado (nivel %s)', logging.getLevelName(level))
    return level


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='twoterm-lab',
                                     description='Laboratorio de codificación de fuentes a dos terminales')
    parser.add_argument('command', choices=COMMANDS, help='Comando a ejecutar')
    parser.add_argument('--config', required=True, help='Ruta al JSON de configuración')
    parser.add_argument('--out', help='Directorio de salida (por defecto config.output o LAB_OUTPUT_DIR)')
    parser.add_argument('--seed', type=int, help='Sobrescribe la semilla de la configuración')
    parser.add_argument('--threads', type=int, help='Hilos para los ensayos Monte Carlo')
    parser.add_argument('--format', choices=('csv', 'json'), default='csv', help='Formato de las tablas')
    parser.add_argument('--suite', choices=SUITES, help='Suite para el comando verify')
    parser.add_argument('--problem', choices=get_args(Problem), help='Sobrescribe el problema de la configuración')
    parser.add_argument('-v', '--verbose', action='count', default=0, help='Logging detallado (DEBUG)')
    parser.add_argument('-q', '--quiet', action='store_true', help='Sólo avisos y errores')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    return parser


def exit_code(exc: LabError) -> int:
    if isinstance(exc, (ConfigError, TableValidationError, DimensionMismatchError)):
        return EXIT_CONFIG
    if isinstance(exc, VerificationFailure):
        return EXIT_VERIFICATION
    if isinstance(exc, (BudgetExceededError, SizingError)):
        return EXIT_BUDGET
    return EXIT_ERROR


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logger(-1 if args.quiet else args.verbose)
    if args.command == 'verify' and not args.suite:
        logging.error('verify necesita --suite (%s)', ', '.join(SUITES))
        return EXIT_CONFIG
    try:
        text = pathlib.Path(args.config).read_text(encoding='utf-8')
    except OSError as exc:
        logging.error('No se puede leer la configuración %s: %s', args.config, exc)
        return EXIT_CONFIG
    try:
        cfg = parse_config(text)
        overrides = {}
        if args.seed is not None:
            overrides['seed'] = args.seed
        if args.problem is not None:
            overrides['problem'] = args.problem
        if overrides:
            cfg = cfg.model_copy(update=overrides)
        manifest = run(args.command, cfg, args.out, args.format, args.threads, args.suite)
    except ConfigError as exc:
        for msg in exc.errors:
            logging.error('config: %s', msg)
        return EXIT_CONFIG
    except BudgetExceededError as exc:
        logging.error('%s (requerido %s, presupuesto %s)', exc, exc.required, exc.budget)
        return EXIT_BUDGET
    except SizingError as exc:
        logging.error('%s (n\' mínimo factible: %s)', exc, exc.minimal_n_prime)
        return EXIT_BUDGET
    except LabError as exc:
        logging.error('%s', exc)
        return exit_code(exc)
    logging.info('OK: %d artefactos (config=%s)', len(manifest.outputs), manifest.config_hash)
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
