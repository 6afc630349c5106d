import shutil
from collections.abc import Iterable
from pathlib import Path

from loguru import logger

from bosefield.exceptions import BFFileExists, BFIOError


def delete_if_exists(path: Path) -> bool:
    """Delete a file or directory if it exists.

    Parameters
    ----------
    path : Path
        The path to the file or directory to delete.

    Returns
    -------
    bool
        True if the file or directory was deleted, False otherwise.
    """
    if path.exists():
        if path.is_dir():
            shutil.rmtree(path)
        else:
            path.unlink()
        return True
    return False


def prepare_directory(
    directory: Path, filenames: Iterable[str] = (), overwrite: bool = False
) -> Path:
    """Create the output directory and clear the way for `filenames` inside it.

    Files already present under one of `filenames` are an error unless `overwrite` is set,
    in which case only those files are removed. Anything else in the directory is kept.
    """
    directory = Path(directory)
    if directory.exists() and not directory.is_dir():
        msg = f"{directory} exists and is not a directory"
        raise BFIOError(msg)
    collisions = [directory / name for name in filenames if (directory / name).exists()]
    if collisions and not overwrite:
        names = ", ".join(path.name for path in collisions)
        msg = f"{directory=} already holds {names}. Choose a different path or set overwrite=True."
        raise BFFileExists(msg)
    for path in collisions:
        delete_if_exists(path)
        logger.info("Removed previous result {}", path)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        msg = f"Cannot create {directory}: {e}"
        raise BFIOError(msg) from e
    return directory
