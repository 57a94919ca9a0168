"""Run catalog models for agesync."""
import json
from typing import Dict

from peewee import DateTimeField, Model, SqliteDatabase, TextField
from playhouse.sqlite_ext import JSONField

SQLITE_DATABASE: SqliteDatabase = SqliteDatabase(None)


def _attributes_dumps(value: Dict[str, object]) -> str:
    if value is not None and not isinstance(value, Dict):
        raise TypeError(value)
    return json.dumps(value, sort_keys=True)


class BaseModel(Model):
    """Base model class for all catalog models."""

    class Meta:
        """Meta class for all models."""

        database = SQLITE_DATABASE


class Run(BaseModel):
    """One align, simulate or evaluate run and where it wrote its files."""

    name = TextField(index=True, unique=True)
    kind = TextField()
    dir_output = TextField()
    dir_logs = TextField()
    created = DateTimeField()
    attributes = JSONField(json_dumps=_attributes_dumps)

    def __lt__(self, other):
        return self.name < other.name
