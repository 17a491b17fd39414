"""
Result store for BankSpill runs
Writes structured JSON results, delimited numeric sidecars and the run manifest
"""

import hashlib
import json
import logging
import os
import platform
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from .paths import ensure_dir, file_checksum

LOGGER = logging.getLogger(__name__)

PACKAGE_VERSION = "1.0.0"


def to_jsonable(value):
    """Convert numpy containers and scalars into plain JSON types"""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        if np.isnan(value):
            return None
        if np.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


def dumps(payload) -> str:
    """Deterministic JSON text (sorted keys, fixed indentation)"""
    return json.dumps(to_jsonable(payload), sort_keys=True, indent=2) + "\n"


def config_hash(params: Dict) -> str:
    return hashlib.sha256(dumps(params).encode("utf-8")).hexdigest()


def library_versions() -> Dict[str, str]:
    """Versions of the numerical stack recorded in every manifest"""
    import joblib
    import networkx
    import scipy
    import statsmodels

    return {
        "bankspill": PACKAGE_VERSION,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
        "statsmodels": statsmodels.__version__,
        "networkx": networkx.__version__,
        "joblib": joblib.__version__,
    }


class ResultStore:
    """Manages the files written by a single run under its output directory"""

    def __init__(self, output_dir: Optional[str] = None):
        """Create the output directory if needed"""
        if output_dir is None:
            output_dir = os.path.join(os.getcwd(), "results")
        self.output_dir = ensure_dir(output_dir)
        self.written: List[str] = []

    def path(self, name: str) -> str:
        return os.path.join(self.output_dir, name)

    def track(self, path: str) -> str:
        """Register a file written by another writer under the output directory"""
        self.written.append(os.path.abspath(path))
        return path

    def record_json(self, name: str, payload: Dict) -> str:
        """Write a structured result file"""
        target = self.path(name)
        with open(target, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(dumps(payload))
        self.written.append(target)
        LOGGER.info("Wrote %s", target)
        return target

    def record_table(self, name: str, table: pd.DataFrame, sep: str = ",", index: bool = False) -> str:
        """Write a delimited numeric sidecar"""
        target = self.path(name)
        table.to_csv(target, sep=sep, index=index, float_format="%.12g", lineterminator="\n")
        self.written.append(target)
        LOGGER.info("Wrote %s", target)
        return target

    def record_manifest(self, command: str, params: Dict, inputs: Optional[List[str]] = None) -> str:
        """Write manifest.json: config hash, input checksums and versions"""
        inputs = [p for p in (inputs or []) if p]
        manifest = {
            "command": command,
            "config": params,
            "config_hash": config_hash({"command": command, "config": params}),
            "inputs": {os.path.basename(p): file_checksum(p) for p in inputs},
            "outputs": sorted(os.path.basename(p) for p in self.written),
            "versions": library_versions(),
        }
        return self.record_json("manifest.json", manifest)


def read_json(path: str) -> Dict:
    with open(path, "r", encoding="utf-8") as handle:
        return json.load(handle)
