# utils/output_manager.py
"""
Manages the artifacts a command writes into its output directory.

Files are staged as hidden temporary files next to their destination and
only renamed into place by `commit()`, so a failed run leaves no partial
outputs behind. Used as a context manager, the manager commits on success
and discards every staged file on any exception.
"""

import logging
import os
from pathlib import Path
from typing import Callable, Dict, List, Optional

from ..core.errors import ShiftLabError

logger = logging.getLogger(__name__)

STAGING_PREFIX = ".partial-"


class OutputError(ShiftLabError):
    """Custom exception for output-writing errors."""

    pass


class OutputManager:
    """Stages and atomically publishes the files of one command run."""

    def __init__(self, output_dir: Path):
        """
        Initializes the OutputManager.

        Args:
            output_dir: Directory receiving the final files; created if needed.

        Raises:
            OutputError: If the directory cannot be created.
        """
        self.output_dir = Path(output_dir)
        self._staged: Dict[Path, Path] = {}
        self._ensure_output_dir_exists()

    def _ensure_output_dir_exists(self):
        """Ensures the output directory exists, creating it if necessary."""
        try:
            self.output_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise OutputError(f"Could not create output directory {self.output_dir}: {e}")
        if not self.output_dir.is_dir():
            raise OutputError(f"Output path {self.output_dir} is not a directory.")

    def _get_final_path(self, name: str) -> Path:
        """
        Resolves a file name inside the output directory.

        Raises:
            OutputError: If the name is empty or escapes the directory.
        """
        if not name or "/" in name or "\\" in name or name in (".", ".."):
            raise OutputError(f"Invalid output file name: '{name}'")
        return self.output_dir / name

    def stage(self, name: str, writer: Callable[[Path], None]) -> Path:
        """
        Writes one file to its staging path.

        Args:
            name: Final file name inside the output directory.
            writer: Callable writing the content to the path it is given.

        Returns:
            The final path the file will have after `commit()`.

        Raises:
            OutputError: If the name was already staged or writing fails.
        """
        final_path = self._get_final_path(name)
        if final_path in self._staged:
            raise OutputError(f"Output file '{name}' was staged twice.")
        staging_path = self.output_dir / f"{STAGING_PREFIX}{name}"
        try:
            writer(staging_path)
        except OSError as e:
            self._remove(staging_path)
            raise OutputError(f"Could not write {final_path}: {e}")
        except Exception:
            self._remove(staging_path)
            raise
        self._staged[final_path] = staging_path
        logger.debug("Staged %s", final_path)
        return final_path

    def stage_text(self, name: str, text: str) -> Path:
        """Stages a UTF-8 text file with Unix line endings."""
        return self.stage(
            name, lambda path: path.write_text(text, encoding="utf-8", newline="\n")
        )

    def commit(self) -> List[Path]:
        """
        Renames every staged file into place, in staging order.

        Returns:
            The final paths written.

        Raises:
            OutputError: If a rename fails; files renamed so far are removed.
        """
        written: List[Path] = []
        try:
            for final_path, staging_path in self._staged.items():
                os.replace(staging_path, final_path)
                written.append(final_path)
        except OSError as e:
            for path in written:
                self._remove(path)
            self.discard()
            raise OutputError(f"Could not finalize outputs in {self.output_dir}: {e}")
        self._staged.clear()
        logger.info("Wrote %d file(s) to %s", len(written), self.output_dir)
        return written

    def discard(self):
        """Removes every staged file without publishing it."""
        for staging_path in self._staged.values():
            self._remove(staging_path)
        self._staged.clear()

    @staticmethod
    def _remove(path: Optional[Path]):
        if path is None:
            return
        try:
            path.unlink()
        except FileNotFoundError:
            pass
        except OSError as e:
            logger.warning("Could not remove %s: %s", path, e)

    def __enter__(self) -> "OutputManager":
        return self

    def __exit__(self, exc_type, exc, tb) -> bool:
        if exc_type is None:
            self.commit()
        else:
            self.discard()
        return False
