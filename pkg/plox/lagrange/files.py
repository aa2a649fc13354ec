"""Local file system helpers: scenario discovery, output directories and trajectory CSVs.

If it reads or writes something on local disk, it is a good bet it belongs in this module.

.. code-block:: python

    from plox.lagrange import files
"""

from __future__ import annotations

import csv
from collections.abc import Iterable, Sequence
from logging import getLogger
from os import PathLike, listdir, makedirs
from os.path import exists, isdir, isfile
from os.path import join as path_join
from os.path import split as path_split
from pathlib import Path
from typing import Union

FilePath = Union[PathLike[str], Path, str]
"""Represent one of many formats for a local file on disk."""

logger = getLogger(__name__)

REAL_FORMAT = ".17g"
"""Seventeen significant digits: enough for every double to survive a text round trip."""


def file_contents(path: FilePath) -> str:
    """Read and return a local file path's contents as a string.

    Args:
        path (FilePath): Path on local disk to file.

    Returns:
        str: Contents of file
    """
    with open(path, encoding="utf-8") as infile:
        return infile.read().rstrip()


def ensure_dir(path: str) -> None:
    """Ensure the parent directory of a file path exists, making it when needed.

    Args:
        path: File path whose directory should exist.
    """
    dirpath, _ = path_split(path)
    if len(dirpath) != 0 and not isdir(dirpath):
        makedirs(dirpath)


def list_files(directory_path: str, suffix: str = "", sort: bool = True) -> list[str]:
    """Return the files in a directory, optionally restricted to a suffix.

    Args:
        directory_path: The path to the local directory on disk.
        suffix: Only names ending with this are returned (e.g. ``.toml``).
        sort: Whether or not the results should be alphabetically sorted. Default
            ``True``, so batch runs are deterministic.
    """
    found = [
        path_join(directory_path, f)
        for f in listdir(directory_path)
        if isfile(path_join(directory_path, f)) and f.endswith(suffix)
    ]
    return sorted(found) if sort else found


def write_text(path: str, content: str) -> str:
    """Write text to ``path`` (parents created); warns when replacing an existing file."""
    ensure_dir(path)
    if exists(path):
        logger.warning(f"Overwriting {path}")
    with open(path, "w", encoding="utf-8", newline="\n") as outfile:
        outfile.write(content if content.endswith("\n") else content + "\n")
    return path


def format_real(value: float) -> str:
    return format(float(value), REAL_FORMAT)


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence[float]]) -> str:
    """Write a header row and real valued rows with 17 significant digits.

    Example:

        >>> write_csv("out/traj.csv", ["t", "q1"], [[0.0, 1.0], [0.1, 0.995]])
        'out/traj.csv'

    Args:
        path: Destination file.
        header: Column names.
        rows: Rows of reals; each must match the header length.

    Raises:
        ValueError: A row length differs from the header length.

    Returns:
        str: ``path``.
    """
    ensure_dir(path)
    if exists(path):
        logger.warning(f"Overwriting {path}")
    with open(path, "w", encoding="utf-8", newline="") as outfile:
        writer = csv.writer(outfile, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f"row of {len(row)} values for {len(header)} columns")
            writer.writerow([format_real(v) for v in row])
    return path


def read_csv(path: FilePath) -> tuple[list[str], list[list[float]]]:
    """Read a file written by :func:`write_csv` back into a header and float rows."""
    with open(path, encoding="utf-8", newline="") as infile:
        reader = csv.reader(infile)
        header = next(reader)
        return header, [[float(v) for v in row] for row in reader]
