"""
Scenario return files: ``label,<asset names...>`` header, one row per scenario.

The first column holds row labels (years in the bundled data set); every
other cell must parse as a finite decimal. Parse failures raise
DatasetError naming the file line (header = line 1) and the column.
"""

import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple, Union

import numpy as np
import pandas as pd

from fsd_reshaping.errors import DatasetError
from fsd_reshaping.tools.distribution import ScenarioMatrix, riskless_column

logger = logging.getLogger(__name__)

BUNDLED = "bundled"
BUNDLED_PATH = Path(__file__).resolve().parent.parent / "data" / "markowitz_returns.csv"


@dataclass(frozen=True)
class Dataset:
    scenarios: ScenarioMatrix
    row_labels: Tuple[str, ...]
    label_header: str = "label"
    source: str = ""

    @property
    def m(self) -> int:
        return self.scenarios.m

    @property
    def n(self) -> int:
        return self.scenarios.n

    def summary(self) -> dict:
        constant = [
            self.scenarios.asset_labels[j]
            for j in np.flatnonzero(np.ptp(self.scenarios.returns, axis=0) == 0.0)
        ]
        return {
            "source": self.source,
            "m": self.m,
            "n": self.n,
            "labels": list(self.scenarios.asset_labels),
            "rows": [self.row_labels[0], self.row_labels[-1]],
            "constant_columns": constant,
            "riskless_column": riskless_column(self.scenarios),
        }


def resolve_path(path: Union[str, os.PathLike]) -> Path:
    if str(path) == BUNDLED:
        return BUNDLED_PATH
    return Path(path)


def load_csv(path: Union[str, os.PathLike] = BUNDLED) -> Dataset:
    """Read a return file into a Dataset.

    Raises:
        DatasetError: missing, empty, ragged or non-numeric file
    """
    file_path = resolve_path(path)
    try:
        frame = pd.read_csv(file_path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except FileNotFoundError as exc:
        raise DatasetError(f"no such file: {file_path}") from exc
    except pd.errors.EmptyDataError as exc:
        raise DatasetError(f"empty file: {file_path}") from exc
    except pd.errors.ParserError as exc:
        # too many fields on some line
        raise DatasetError(f"ragged file {file_path}: {exc}") from exc

    if frame.shape[1] < 2:
        raise DatasetError(f"{file_path} needs a label column and at least one asset column")
    if frame.shape[0] == 0:
        raise DatasetError(f"{file_path} has a header but no data rows")

    label_header, asset_columns = frame.columns[0], list(frame.columns[1:])

    # Step 1: locate short rows, unparseable and non-finite cells
    for column in asset_columns:
        raw = frame[column].str.strip()
        numeric = pd.to_numeric(raw, errors="coerce")
        bad = raw.eq("") | numeric.isna() | ~np.isfinite(numeric.fillna(0.0))
        if bad.any():
            i = int(np.flatnonzero(bad.to_numpy())[0])
            what = "missing value" if raw.iloc[i] == "" else f"not a finite number: '{raw.iloc[i]}'"
            raise DatasetError(f"{file_path}: {what}", row=i + 2, column=column)

    # Step 2: exact conversion
    values = frame[asset_columns].apply(lambda col: col.str.strip()).to_numpy(dtype=str).astype(float)
    dataset = Dataset(
        scenarios=ScenarioMatrix(values, tuple(str(c) for c in asset_columns)),
        row_labels=tuple(frame[label_header].astype(str)),
        label_header=str(label_header),
        source=str(file_path),
    )
    logger.debug("dataset loaded", extra={"path": str(file_path)})
    return dataset


def write_csv(dataset: Dataset, path: Union[str, os.PathLike]) -> Path:
    """Write the dataset back in the same layout; floats keep full precision."""
    frame = pd.DataFrame(dataset.scenarios.returns, columns=list(dataset.scenarios.asset_labels))
    frame.insert(0, dataset.label_header, list(dataset.row_labels))
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(out, index=False)
    return out
