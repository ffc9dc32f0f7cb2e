"""CSV, JSON and SVG persistence for the CLI, the harness and the API."""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Optional, Type, TypeVar

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
from pydantic import BaseModel, ValidationError  # noqa: E402

from ..config import get_settings  # noqa: E402
from ..errors import InputError  # noqa: E402
from ..schemas import SeriesSpec, parse_series_spec  # noqa: E402
from .series import Series  # noqa: E402

logger = logging.getLogger(__name__)

Model = TypeVar("Model", bound=BaseModel)


# ---------- JSON ----------

def load_json(path: str | Path) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON in {path}: {exc.msg} (line {exc.lineno})") from exc


def load_model(path: str | Path, model: Type[Model]) -> Model:
    """Validate a JSON file into ``model``."""

    try:
        return model.model_validate(load_json(path))
    except ValidationError as exc:
        raise InputError(f"invalid {model.__name__} in {path}: {exc.errors()[0]['msg']}") from exc


def load_spec(path: str | Path) -> SeriesSpec:
    try:
        return parse_series_spec(load_json(path))
    except ValidationError as exc:
        raise InputError(f"invalid series spec in {path}: {exc.errors()[0]['msg']}") from exc


# ---------- CSV ----------

def _prepare(path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def write_table(df: pd.DataFrame, path: str | Path) -> Path:
    """Every float with 17 significant digits (settings.float_format)."""

    path = _prepare(path)
    df.to_csv(path, index=False, float_format=get_settings().float_format, lineterminator="\n")
    logger.info("wrote %s", path)
    return path


def write_series(series: Series | np.ndarray, path: str | Path) -> Path:
    values = np.asarray(getattr(series, "values", series), dtype=float)
    return write_table(pd.DataFrame({"index": np.arange(values.size), "value": values}), path)


def read_series(path: str | Path) -> Series:
    """Series from an ``index,value`` CSV or a single unnamed column."""

    try:
        df = pd.read_csv(path, float_precision="round_trip")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise InputError(f"cannot read series CSV {path}: {exc}") from exc
    if "value" in df.columns:
        column = df["value"]
    elif df.shape[1] == 1:
        headerless = pd.to_numeric(pd.Series([df.columns[0]]), errors="coerce").notna().iloc[0]
        column = pd.read_csv(path, header=None, float_precision="round_trip").iloc[:, 0] if headerless else df.iloc[:, 0]
    else:
        raise InputError(f"{path} needs a 'value' column")
    values = pd.to_numeric(column, errors="coerce").to_numpy()
    if values.size == 0 or np.isnan(values).any():
        raise InputError(f"{path} contains non-numeric values")
    return Series(values)


def write_matrix(m: np.ndarray, path: str | Path) -> Path:
    return write_table(pd.DataFrame(np.atleast_2d(m)), path)


# ---------- SVG ----------

def plot_lines(
    df: pd.DataFrame,
    x: str,
    ys: list[str],
    path: str | Path,
    log: Optional[str] = None,
    title: Optional[str] = None,
) -> Path:
    """Line plot of ``ys`` against ``x``; ``log`` is None, "y" or "xy"."""

    path = _prepare(path)
    fig, ax = plt.subplots(figsize=(8, 4))
    for y in ys:
        data = df[[x, y]].dropna()
        if log and (data[y] <= 0).any():
            data = data[data[y] > 0]
        ax.plot(data[x], data[y], label=y)
    if log == "xy":
        ax.set_xscale("log")
    if log:
        ax.set_yscale("log")
    ax.set_xlabel(x)
    if title:
        ax.set_title(title)
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.savefig(path, format="svg", bbox_inches="tight")
    plt.close(fig)
    logger.info("wrote %s", path)
    return path
