import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Iterator, Mapping, Union

import pandas as pd

PathLike = Union[str, Path]


def ensure_directory(path: PathLike) -> Path:
    """Create a directory (and parents) if missing and return it as a Path"""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def read_file_chunks(file_path: Path, chunk_size: int = 8192) -> Iterator[bytes]:
    """Read file in chunks for memory-efficient processing"""
    with open(file_path, 'rb') as f:
        while True:
            chunk = f.read(chunk_size)
            if not chunk:
                break
            yield chunk


def calculate_file_hash(file_path: PathLike, algorithm: str = 'sha256', chunk_size: int = 8192) -> str:
    """Hash of file content, used to compare outputs across runs"""
    file_path = Path(file_path)
    if not file_path.exists():
        raise FileNotFoundError(f"File not found: {file_path}")

    if algorithm.lower() not in ('sha1', 'sha256', 'md5'):
        raise ValueError(f"Unsupported hash algorithm: {algorithm}")
    hash_obj = hashlib.new(algorithm.lower())

    for chunk in read_file_chunks(file_path, chunk_size):
        hash_obj.update(chunk)
    return hash_obj.hexdigest()


def safe_rename(source: Path, target: Path, overwrite: bool = False) -> bool:
    """Safely rename a file with error handling and optional overwrite"""
    if not source.exists():
        raise FileNotFoundError(f"Source file not found: {source}")

    if target.exists() and not overwrite:
        raise FileExistsError(f"Target file already exists: {target}")

    try:
        os.replace(source, target)
        return True
    except OSError as e:
        raise OSError(f"Failed to rename {source} to {target}: {e}")


def atomic_write(file_path: PathLike, content: Union[bytes, str]) -> bool:
    """Atomically write to a file using temporary file and rename"""
    file_path = Path(file_path)
    ensure_directory(file_path.parent)
    temp_file = None
    try:
        # Temporary file must live on the same filesystem as the target
        temp_file = tempfile.NamedTemporaryFile(
            mode='wb',
            dir=file_path.parent,
            delete=False,
            prefix=f".{file_path.name}.tmp."
        )

        if isinstance(content, str):
            content = content.encode('utf-8')
        temp_file.write(content)
        temp_file.flush()
        os.fsync(temp_file.fileno())
        temp_file.close()

        safe_rename(Path(temp_file.name), file_path, overwrite=True)
        return True

    except Exception:
        if temp_file is not None:
            temp_file.close()
            if Path(temp_file.name).exists():
                try:
                    Path(temp_file.name).unlink()
                except OSError:
                    pass
        raise


def write_file_text(file_path: PathLike, content: str) -> None:
    """Write UTF-8 text atomically, creating parent directories"""
    atomic_write(file_path, content.encode('utf-8'))


def write_json(file_path: PathLike, payload: Mapping[str, Any]) -> None:
    """Write a JSON document with sorted keys so reruns are byte-identical"""
    text = json.dumps(payload, indent=2, sort_keys=True, allow_nan=False)
    write_file_text(file_path, text + "\n")


def read_json(file_path: PathLike) -> Any:
    file_path = Path(file_path)
    if not file_path.exists():
        raise FileNotFoundError(f"File not found: {file_path}")
    return json.loads(file_path.read_text(encoding='utf-8'))


def write_frame(file_path: PathLike, frame: pd.DataFrame) -> None:
    """Write a DataFrame as CSV (no index, '\\n' line endings) atomically"""
    text = frame.to_csv(index=False, lineterminator="\n", float_format=None)
    write_file_text(file_path, text)
