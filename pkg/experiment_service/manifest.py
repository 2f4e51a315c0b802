# experiment_service/manifest.py
import hashlib
import json
import pathlib
from typing import Dict, List, Optional, Union

from pydantic import BaseModel, Field

from common_utils.logger.client import LoggerClient
from experiment_service import __version__

logger = LoggerClient("manifest")

MANIFEST_NAME = "manifest.json"


class RunManifest(BaseModel):
    command: List[str]
    config_digest: Optional[str] = None
    seeds: List[int] = Field(default_factory=list)
    version: str = __version__
    phase_seconds: Dict[str, float] = Field(default_factory=dict)


def config_digest(config: Union[BaseModel, dict, str, None]) -> Optional[str]:
    """sha256 over the canonical JSON form of a config."""
    if config is None:
        return None
    if isinstance(config, BaseModel):
        config = config.model_dump(mode="json")
    if not isinstance(config, str):
        config = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(config.encode("utf-8")).hexdigest()


def write_manifest(directory: Union[str, pathlib.Path], manifest: RunManifest) -> pathlib.Path:
    """Write the single manifest of a results directory, replacing any earlier one."""
    directory = pathlib.Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / MANIFEST_NAME
    path.write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
    logger.debug("Manifest written", {"path": str(path)})
    return path
