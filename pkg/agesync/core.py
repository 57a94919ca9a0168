"""Core functionalities for agesync: the catalog of runs and their directories."""
import logging
from collections.abc import Iterable
from pathlib import Path
from typing import Dict, Optional, Union

from peewee import DoesNotExist
from slugify import slugify

from .catalog import Run
from .config import Configuration
from .errors import RunExistsError
from .helpers import DatabaseHelper, FileHelper

logger = logging.getLogger(__name__)


class RunsManager(Iterable):
    """Manages catalogued runs and their output directories.

    The catalog is informational: numerical code never reads it, so results
    only depend on the configuration and seed.
    """

    def __init__(
        self,
        dir_base_data: Optional[Union[str, Path]] = None,
        dir_base_logs: Optional[Union[str, Path]] = None,
        database_name: str = "runs.db",
        max_repr_len: int = 25,
        config: Optional[Configuration] = None,
    ) -> None:
        if config is None:
            config = Configuration()
        self.file_helper = FileHelper(dir_base_data, dir_base_logs, config)
        self.max_repr_len = max_repr_len
        DatabaseHelper.init_db(self.file_helper.dir_base_data / database_name)

    def __iter__(self):
        for run in DatabaseHelper.get_runs():
            yield run

    def __contains__(self, name: str) -> bool:
        return DatabaseHelper.run_exists(self.get_clean_run_name(name))

    def __len__(self) -> int:
        return DatabaseHelper.get_runs_count()

    def __repr__(self) -> str:
        runs = sorted(run.name for run in self)[: self.max_repr_len]
        runs_fmt = "".join(f"\n\t{run}" for run in runs)
        repr_str = f"agesync runs manager with {len(self)} runs, including:{runs_fmt}"
        if len(self) > self.max_repr_len:
            repr_str += "\n\t...\nTo get full list of runs, use `list(RunsManager)`."
        return repr_str

    @staticmethod
    def get_clean_run_name(name: str) -> str:
        """Changes a run name to a file-friendly name."""
        clean = slugify(name)
        if not clean:
            raise ValueError(f"run name {name!r} has no usable characters")
        return clean

    @property
    def dir_base_data(self) -> Path:
        """Root of default run directories."""
        return self.file_helper.dir_base_data

    def log_file(self, name: str) -> Path:
        """Log file path of the given run."""
        return self.file_helper.get_run_log_file(self.get_clean_run_name(name))

    def get_run(self, name: str) -> Run:
        """Returns the catalogued run with the given name."""
        return DatabaseHelper.get_run(self.get_clean_run_name(name))

    def create_run(
        self,
        name: str,
        kind: str,
        attributes: Optional[Dict] = None,
        exist_ok: bool = False,
        dir_output: Optional[Union[str, Path]] = None,
    ) -> Run:
        """Catalogs a run and creates its output directory.

        ``dir_output`` defaults to ``<data root>/<slug of name>``. With
        ``exist_ok`` an existing entry is replaced.
        """
        if attributes is None:
            attributes = {}

        run_name = self.get_clean_run_name(name)
        if DatabaseHelper.run_exists(run_name):
            if not exist_ok:
                raise RunExistsError(f"run {run_name!r} already exists")
            DatabaseHelper.delete_run(run_name)

        if dir_output is None:
            dir_output = self.file_helper.get_run_output_directory(run_name)
        output_path = self.file_helper.create_run_directory(dir_output, exist_ok=True)
        run = DatabaseHelper.create_run(
            run_name,
            kind,
            str(output_path),
            str(self.file_helper.dir_base_logs),
            attributes,
        )
        logger.debug("catalogued %s run %s at %s", kind, run_name, output_path)
        return run

    def delete_run(self, name: str, not_exist_ok: bool = False, delete_dir: bool = True) -> None:
        """Removes a run from the catalog, and its output directory if asked."""
        run_name = self.get_clean_run_name(name)
        if not DatabaseHelper.run_exists(run_name):
            if not not_exist_ok:
                raise DoesNotExist(run_name)
            return
        run = DatabaseHelper.get_run(run_name)
        DatabaseHelper.delete_run(run_name)
        if delete_dir:
            self.file_helper.delete_run_directory(run.dir_output)
