from typing import Optional

import pytest
from msgspec import Struct, json

from barriercc.output import CSVOutput, JSONOutput, write_output


class Row(Struct):
    n: int
    price: float
    note: Optional[str] = None


class Record(Struct):
    rows: list[Row]

    def table(self):
        return ["n", "price", "note"], [[r.n, r.price, r.note] for r in self.rows]


RECORD = Record(rows=[Row(5, 0.1), Row(10, 14.193, "x")])


def test_csv_rendering():
    body = CSVOutput(RECORD).body.decode()
    assert body == "n,price,note\n5,0.1,\n10,14.193,x\n"


def test_csv_keeps_full_float_precision():
    body = CSVOutput(Record(rows=[Row(1, 0.1 + 0.2), Row(2, 1e-20, "a,b")])).body.decode()
    assert body == "n,price,note\n1,0.30000000000000004,\n2,1e-20,\"a,b\"\n"


def test_csv_needs_a_table():
    with pytest.raises(TypeError):
        CSVOutput(Row(1, 1.0))


def test_json_rendering_is_stable():
    body = JSONOutput(RECORD).body
    assert body.endswith(b"\n")
    assert json.decode(body, type=Record) == RECORD
    assert JSONOutput(RECORD).body == body


def test_write_to_file(tmp_path):
    path = tmp_path / "nested" / "table.csv"
    write_output(RECORD, "csv", str(path))
    assert path.read_text().startswith("n,price,note\n")


def test_write_to_stdout(capsys):
    write_output(RECORD, "json", "-")
    out = capsys.readouterr().out
    assert json.decode(out.encode(), type=Record) == RECORD
