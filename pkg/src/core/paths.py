import hashlib
import os
from typing import Optional


def project_root() -> str:
    """Return absolute path to the project root directory.

    Assumes this file lives at src/core/paths.py → project root is two levels up from here.
    """
    return os.path.abspath(os.path.join(os.path.dirname(__file__), os.pardir, os.pardir))


def asset_path(*parts: str) -> Optional[str]:
    """Resolve a bundled data file by trying common bases.

    Tries these bases in order:
    1) project_root()/
    2) project_root()/src/
    Returns absolute path if found, else None.
    """
    candidates = [
        os.path.join(project_root(), *parts),
        os.path.join(project_root(), 'src', *parts),
    ]
    for p in candidates:
        if os.path.exists(p):
            return os.path.abspath(p)
    return None


def ensure_dir(path: str) -> str:
    """Create an output directory if needed and return its absolute path"""
    path = os.path.abspath(path)
    os.makedirs(path, exist_ok=True)
    return path


def file_checksum(path: str) -> str:
    """sha256 of a file's bytes"""
    digest = hashlib.sha256()
    with open(path, 'rb') as handle:
        for block in iter(lambda: handle.read(1 << 16), b''):
            digest.update(block)
    return digest.hexdigest()
