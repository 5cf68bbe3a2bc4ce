from pydantic import BaseModel, ConfigDict, Field
from typing import List, Dict, Any, Optional


class OutputEntry(BaseModel):
    name: str
    path: str
    format: str
    rows: int


class CheckEntry(BaseModel):
    name: str
    passed: bool
    required: bool = True
    detail: Optional[str] = None


class RunManifest(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    tool: str
    version: str
    command: str
    suite: Optional[str] = None
    config_hash: str = Field(alias='configHash')
    seed: int
    threads: int
    format: str
    config: Dict[str, Any]
    settings: Dict[str, Any]
    outputs: List[OutputEntry] = []
    checks: List[CheckEntry] = []
    wall_time_sec: float = Field(alias='wallTimeSec')

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.required)
