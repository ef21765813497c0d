#!/usr/bin/env python3
# Copyright 2026 The mawiprep Authors
# SPDX-License-Identifier: Apache-2.0
"""Reads every Parquet file written by export_tables with pyarrow and checks
it against its CSV twin: same column names, types and values."""

import csv
import math
import pathlib
import subprocess
import sys
import tempfile

import pyarrow.parquet as pq


def same(cell, value):
    if cell == "":
        return value is None
    if isinstance(value, bool) or value is None:
        return False
    if isinstance(value, int):
        return int(cell) == value
    if isinstance(value, float):
        return float(cell) == value or (math.isnan(value) and cell.lower() == "nan")
    return cell == value


def main():
    exporter = sys.argv[1]
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run([exporter, tmp], check=True)
        files = sorted(pathlib.Path(tmp).glob("*.parquet"))
        assert files, "exporter wrote no parquet files"
        for pq_path in files:
            table = pq.read_table(pq_path)
            with open(pq_path.with_suffix(".csv"), newline="", encoding="utf-8") as fh:
                rows = list(csv.reader(fh))
            header, body = rows[0], rows[1:]
            assert table.column_names == header, f"{pq_path.name}: header differs"
            assert table.num_rows == len(body), f"{pq_path.name}: {table.num_rows} rows vs {len(body)}"
            columns = [table.column(i).to_pylist() for i in range(table.num_columns)]
            for r, row in enumerate(body):
                for c, cell in enumerate(row):
                    if not same(cell, columns[c][r]):
                        raise AssertionError(f"{pq_path.name} row {r} column {header[c]}: {cell!r} vs {columns[c][r]!r}")
            print(f"ok {pq_path.name}: {table.num_rows} rows x {table.num_columns} columns")


if __name__ == "__main__":
    main()
