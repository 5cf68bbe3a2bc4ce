import os
from dataclasses import dataclass

# Valores por defecto; cada uno puede sobrescribirse con la variable de entorno homónima
DEFAULT_TABLE_CELL_CAP = 1 << 24
DEFAULT_CODEBOOK_BUDGET = 1 << 26


def _env_int(name: str, default: int) -> int:
    raw = os.environ.get(name)
    if raw is None or raw.strip() == '':
        return default
    try:
        return int(raw)
    except ValueError:
        return default


@dataclass(frozen=True)
class Settings:
    log_level: str = 'info'
    threads: int = 1
    table_cell_cap: int = DEFAULT_TABLE_CELL_CAP
    codebook_budget: int = DEFAULT_CODEBOOK_BUDGET
    output_dir: str = 'results'

    @classmethod
    def from_env(cls) -> 'Settings':
        return cls(
            log_level=os.environ.get('LAB_LOG_LEVEL', 'info').lower(),
            threads=max(1, _env_int('LAB_THREADS', 1)),
            table_cell_cap=_env_int('LAB_TABLE_CELL_CAP', DEFAULT_TABLE_CELL_CAP),
            codebook_budget=_env_int('LAB_CODEBOOK_BUDGET', DEFAULT_CODEBOOK_BUDGET),
            output_dir=os.environ.get('LAB_OUTPUT_DIR', 'results'),
        )

    def as_dict(self) -> dict:
        return {
            'log_level': self.log_level,
            'threads': self.threads,
            'table_cell_cap': self.table_cell_cap,
            'codebook_budget': self.codebook_budget,
            'output_dir': self.output_dir,
        }


settings = Settings.from_env()
