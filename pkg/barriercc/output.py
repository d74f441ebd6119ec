import sys
from pathlib import Path
from typing import Any, Callable, Optional, Union

import pandas as pd
from msgspec import json

from .config import OutputFormat


def _float(value: float) -> str:
    return repr(float(value))


class Output:
    """
    A class for rendering a result record and writing it out.

    Data goes to standard output unless a path is given; nothing else is ever written there.
    """

    charset = "utf-8"

    def __init__(self, content: Any) -> None:
        self.body = self.render(content)

    def render(self, content: Any) -> bytes:
        if content is None:
            return b""
        if isinstance(content, bytes):
            return content
        return str(content).encode(self.charset)

    def write(self, out: Optional[Union[str, Path]] = None) -> bytes:
        if out is None or str(out) == "-":
            sys.stdout.buffer.write(self.body)
            sys.stdout.flush()
        else:
            path = Path(out)
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(self.body)
        return self.body


class JSONOutput(Output):
    encode_hook: Optional[Callable[[Any], Any]] = None

    def render(self, content: Any) -> bytes:
        return json.format(json.encode(content, enc_hook=self.encode_hook), indent=2) + b"\n"


class CSVOutput(Output):
    """
    Records with a `table()` method returning `(header, rows)`. Columns keep the header order,
    floats are printed with `repr` and missing values as empty cells.
    """

    def render(self, content: Any) -> bytes:
        table = getattr(content, "table", None)
        if table is None:
            raise TypeError(f"{type(content).__name__} has no tabular form")
        header, rows = table()
        frame = pd.DataFrame.from_records(rows, columns=header)
        body = frame.to_csv(index=False, lineterminator="\n", na_rep="", float_format=_float)
        return body.encode(self.charset)


OUTPUT_CLASSES: dict[str, type[Output]] = {
    "json": JSONOutput,
    "csv": CSVOutput,
}


def write_output(record: Any, fmt: OutputFormat = "json", out: Optional[Union[str, Path]] = None) -> bytes:
    return OUTPUT_CLASSES[fmt](record).write(out)
