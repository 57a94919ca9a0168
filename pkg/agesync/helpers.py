"""Helper classes for the run catalog."""
import datetime
import shutil
from pathlib import Path
from typing import Dict, List, Optional, Union

from .catalog import SQLITE_DATABASE, Run
from .config import Configuration


class DatabaseHelper:
    """Helper class for catalog operations."""

    @staticmethod
    def init_db(database_name: Union[str, Path]) -> None:
        """Initializes the catalog database."""
        SQLITE_DATABASE.init(str(database_name))
        SQLITE_DATABASE.create_tables([Run])

    @staticmethod
    def create_run(
        name: str, kind: str, output_path: str, logs_path: str, attributes: Dict
    ) -> Run:
        """Records a run with the given name."""
        return Run.create(
            name=name,
            kind=kind,
            dir_output=output_path,
            dir_logs=logs_path,
            created=datetime.datetime.now(datetime.timezone.utc),
            attributes=attributes,
        )

    @staticmethod
    def delete_run(name: str) -> None:
        """Removes the run with the given name from the catalog."""
        Run.delete().where(Run.name == name).execute()

    @staticmethod
    def get_run(name: str) -> Run:
        """Returns the run with the given name."""
        return Run.get(Run.name == name)

    @staticmethod
    def get_runs() -> List[Run]:
        """Returns every catalogued run, by name."""
        return list(Run.select().order_by(Run.name))

    @staticmethod
    def get_runs_count() -> int:
        """Returns the number of runs."""
        return Run.select().count()

    @staticmethod
    def run_exists(name: str) -> bool:
        """Checks if a run with the given name exists."""
        return Run.select().where(Run.name == name).count() > 0


class FileHelper:
    """Helper class for run directories and log files."""

    def __init__(
        self,
        dir_base_data: Optional[Union[str, Path]],
        dir_base_logs: Optional[Union[str, Path]],
        config: Configuration,
    ) -> None:
        if dir_base_data is None:
            self.dir_base_data = config.dir_base_data
        else:
            self.dir_base_data = Path(dir_base_data)

        if dir_base_logs is None:
            self.dir_base_logs = config.dir_base_logs
        else:
            self.dir_base_logs = Path(dir_base_logs)

        self.dir_base_data.mkdir(parents=True, exist_ok=True)
        self.dir_base_logs.mkdir(parents=True, exist_ok=True)

    def get_run_output_directory(self, name: str) -> Path:
        """Default output directory of the given run."""
        return self.dir_base_data / name

    def get_run_log_file(self, name: str) -> Path:
        """Log file of the given run."""
        return self.dir_base_logs / f"{name}.log"

    def create_run_directory(self, output_path: Path, exist_ok: bool) -> Path:
        """Creates the output directory of a run."""
        output_path = Path(output_path)
        output_path.mkdir(parents=True, exist_ok=exist_ok)
        return output_path

    @staticmethod
    def delete_run_directory(output_path: Union[str, Path]) -> None:
        """Deletes a run's output directory if it exists."""
        shutil.rmtree(output_path, ignore_errors=True)
