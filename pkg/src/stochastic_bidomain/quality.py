# src/stochastic_bidomain/quality.py - Ledger schema and finite-state checks.
from __future__ import annotations

from collections.abc import Sequence

import numpy as np
import pandas as pd

LEDGER_COLUMNS: list[str] = [
    "t",
    "norm_u_H2",
    "norm_w_H2",
    "norm_u_V2",
    "u_L4_4",
    "a_uu",
    "c3_residual",
]

BLOWUP_THRESHOLD = 1e12


def require_columns(df: pd.DataFrame, cols: Sequence[str]) -> None:
    missing = [c for c in cols if c not in df.columns]
    if missing:
        raise ValueError(f"Missing required columns: {missing}")


def state_ok(*arrays: np.ndarray, threshold: float = BLOWUP_THRESHOLD) -> bool:
    for arr in arrays:
        a = np.asarray(arr)
        if not np.all(np.isfinite(a)) or np.any(np.abs(a) > threshold):
            return False
    return True


def ledger_checks(df: pd.DataFrame, threshold: float = BLOWUP_THRESHOLD) -> pd.DataFrame:
    require_columns(df, LEDGER_COLUMNS)
    out = df.copy()
    values = out[LEDGER_COLUMNS[1:]].to_numpy(dtype=float)
    out["flag_non_finite"] = ~np.isfinite(values).all(axis=1)
    # squared H norms: an RMS state beyond threshold
    energy = out[["norm_u_H2", "norm_w_H2"]].to_numpy(dtype=float)
    out["flag_blowup"] = np.nan_to_num(energy, nan=np.inf).max(axis=1) > threshold**2
    return out


def first_bad_row(df: pd.DataFrame, threshold: float = BLOWUP_THRESHOLD) -> int | None:
    flags = ledger_checks(df, threshold)
    bad = flags["flag_non_finite"] | flags["flag_blowup"]
    return int(np.argmax(bad.to_numpy())) if bad.any() else None


__all__ = [
    "LEDGER_COLUMNS",
    "BLOWUP_THRESHOLD",
    "require_columns",
    "state_ok",
    "ledger_checks",
    "first_bad_row",
]
