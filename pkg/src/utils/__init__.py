"""
Utility helpers shared by the pipeline stages.

- file_utils: atomic file output (text, JSON, CSV frames), directory
  creation and content hashing
"""

from .file_utils import (
    atomic_write,
    calculate_file_hash,
    ensure_directory,
    read_json,
    write_file_text,
    write_frame,
    write_json,
)

__all__ = [
    'atomic_write',
    'calculate_file_hash',
    'ensure_directory',
    'read_json',
    'write_file_text',
    'write_frame',
    'write_json',
]
