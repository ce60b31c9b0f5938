import io
import logging
import math
import re
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import stats

from stochastic import block_generator

logger = logging.getLogger(__name__)

# Exponents quoted for the reference media, with the frequency window they hold in
MEDIA_EXPONENTS: Dict[str, Dict] = {
    "granite": {"mu": 1.0, "range": (140.0, 2.2e6)},
    "bovine_liver": {"mu": 1.3, "range": (1e6, 1e8)},
    "yig": {"mu": 2.0, "range": None},
}

MIN_FREQUENCIES = 3
_PANDAS_LINE = re.compile(r"line (\d+)")


class DatasetError(ValueError):
    """Malformed attenuation data; line and column are 1-based when known"""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)


@dataclass(frozen=True, eq=False)
class AttenuationDataset:
    """Rows of (omega, alpha, label) with unit metadata"""

    frame: pd.DataFrame
    frequency_unit: str = "Hz"
    attenuation_unit: str = "dB/cm"

    def __post_init__(self):
        frame = self.frame.copy()
        for column in ("omega", "alpha"):
            if column not in frame.columns:
                raise ValueError(f"dataset is missing the {column!r} column")
        if "label" not in frame.columns:
            frame["label"] = ""
        frame = frame[["omega", "alpha", "label"]].reset_index(drop=True)
        frame["omega"] = frame["omega"].astype(float)
        frame["alpha"] = frame["alpha"].astype(float)
        frame["label"] = frame["label"].fillna("").astype(str)
        if not np.all(np.isfinite(frame[["omega", "alpha"]].to_numpy())):
            raise ValueError("omega and alpha must be finite")
        if (frame["omega"] <= 0).any() or (frame["alpha"] <= 0).any():
            raise ValueError("omega and alpha must be positive for log-log fitting")
        if frame["omega"].nunique() < MIN_FREQUENCIES:
            raise ValueError(f"need at least {MIN_FREQUENCIES} distinct frequencies, got {frame['omega'].nunique()}")
        object.__setattr__(self, "frame", frame)

    @property
    def omega(self) -> np.ndarray:
        return self.frame["omega"].to_numpy()

    @property
    def alpha(self) -> np.ndarray:
        return self.frame["alpha"].to_numpy()

    def __len__(self) -> int:
        return len(self.frame)


@dataclass(frozen=True)
class PowerLawFit:
    alpha0: float
    mu_exp: float
    r_squared: float
    ci_halfwidth: float
    decades_spanned: float
    n_points: int = 0
    frequency_range: Optional[Tuple[float, float]] = field(default=None)


def dataset_from_arrays(
    omega: Sequence[float],
    alpha: Sequence[float],
    label: str = "",
    frequency_unit: str = "Hz",
    attenuation_unit: str = "dB/cm",
) -> AttenuationDataset:
    frame = pd.DataFrame({"omega": np.asarray(omega, dtype=float), "alpha": np.asarray(alpha, dtype=float)})
    frame["label"] = label
    return AttenuationDataset(frame, frequency_unit, attenuation_unit)


def synthesize_power_law(
    alpha0: float,
    mu: float,
    omega_min: float,
    omega_max: float,
    n: int = 50,
    noise_sigma: float = 0.0,
    seed: int = 0,
    label: str = "synthetic",
) -> AttenuationDataset:
    """alpha = alpha0 * omega^mu on log-spaced frequencies, with optional log-normal noise"""
    if not 0 < omega_min < omega_max:
        raise ValueError(f"need 0 < omega_min < omega_max, got {omega_min}, {omega_max}")
    if noise_sigma < 0:
        raise ValueError(f"noise_sigma must be nonnegative, got {noise_sigma}")
    omega = np.geomspace(omega_min, omega_max, int(n))
    alpha = alpha0 * omega ** mu
    if noise_sigma > 0:
        alpha = alpha * np.exp(noise_sigma * block_generator(seed, 0).standard_normal(omega.size))
    return dataset_from_arrays(omega, alpha, label)


def fit_power_law(data: AttenuationDataset, frequency_range: Optional[Tuple[float, float]] = None) -> PowerLawFit:
    """Least squares on (ln omega, ln alpha) with a 95% t-interval on the slope"""
    omega = data.omega
    alpha = data.alpha
    if frequency_range is not None:
        low, high = frequency_range
        if not 0 < low < high:
            raise ValueError(f"invalid frequency range {frequency_range}")
        keep = (omega >= low) & (omega <= high)
        omega, alpha = omega[keep], alpha[keep]
    if np.unique(omega).size < MIN_FREQUENCIES:
        raise ValueError(
            f"only {np.unique(omega).size} distinct frequencies left in range {frequency_range}, "
            f"need {MIN_FREQUENCIES}"
        )

    regression = stats.linregress(np.log(omega), np.log(alpha))
    halfwidth = stats.t.ppf(0.975, omega.size - 2) * regression.stderr
    fit = PowerLawFit(
        alpha0=float(np.exp(regression.intercept)),
        mu_exp=float(regression.slope),
        r_squared=float(regression.rvalue ** 2),
        ci_halfwidth=float(halfwidth),
        decades_spanned=float(math.log10(omega.max() / omega.min())),
        n_points=int(omega.size),
        frequency_range=None if frequency_range is None else (float(frequency_range[0]), float(frequency_range[1])),
    )
    logger.info(
        f"Power-law fit: mu={fit.mu_exp:.6g} +/- {fit.ci_halfwidth:.3g}, alpha0={fit.alpha0:.6g}, "
        f"R^2={fit.r_squared:.6f} over {fit.decades_spanned:.2f} decades ({fit.n_points} points)"
    )
    return fit


def predict_attenuation(fit: PowerLawFit, omegas) -> np.ndarray:
    omegas = np.asarray(omegas, dtype=float)
    if np.any(omegas <= 0):
        raise ValueError("frequencies must be positive")
    return fit.alpha0 * omegas ** fit.mu_exp


def fit_report(fit: PowerLawFit) -> Dict:
    return {
        "alpha0": fit.alpha0,
        "mu": fit.mu_exp,
        "r2": fit.r_squared,
        "ci": fit.ci_halfwidth,
        "n": fit.n_points,
        "range": None if fit.frequency_range is None else list(fit.frequency_range),
        "decades": fit.decades_spanned,
    }


def _read_frame(source) -> pd.DataFrame:
    try:
        frame = pd.read_csv(source, dtype=str, keep_default_na=False, skipinitialspace=True, skip_blank_lines=False)
    except pd.errors.EmptyDataError:
        raise DatasetError("file is empty")
    except pd.errors.ParserError as e:
        match = _PANDAS_LINE.search(str(e))
        raise DatasetError(f"malformed CSV ({str(e).strip()})", line=int(match.group(1)) if match else None)
    except UnicodeDecodeError as e:
        raise DatasetError(f"file is not UTF-8 ({str(e)})")
    # index labels stay physical line numbers minus two
    frame = frame.fillna("")
    blank = (np.char.strip(frame.to_numpy(dtype=str)) == "").all(axis=1)
    return frame[~blank]


def ingest_csv(source: Union[str, io.TextIOBase], frequency_unit: str = "Hz", attenuation_unit: str = "dB/cm") -> AttenuationDataset:
    """Parse an 'omega,alpha[,label]' CSV into a validated dataset"""
    try:
        frame = _read_frame(source)
        frame.columns = [str(column).strip() for column in frame.columns]
        for column in ("omega", "alpha"):
            if column not in frame.columns:
                raise DatasetError(f"header must contain {column!r}, found {list(frame.columns)}", line=1)
        if frame.empty:
            raise DatasetError("no data rows after the header")

        parsed = {}
        for column in ("omega", "alpha"):
            values = pd.to_numeric(frame[column].str.strip(), errors="coerce")
            position = frame.columns.get_loc(column) + 1
            bad = values.isna() | ~np.isfinite(values)
            if bad.any():
                row = bad.idxmax()
                raise DatasetError(f"{column} value {frame[column].loc[row]!r} is not a number", line=int(row) + 2, column=position)
            nonpositive = values <= 0
            if nonpositive.any():
                row = nonpositive.idxmax()
                raise DatasetError(f"{column} must be positive, got {values.loc[row]}", line=int(row) + 2, column=position)
            parsed[column] = values.astype(float)
        parsed["label"] = frame["label"] if "label" in frame.columns else ""

        dataset = AttenuationDataset(pd.DataFrame(parsed), frequency_unit, attenuation_unit)
        logger.info(f"Ingested {len(dataset)} attenuation rows")
        return dataset
    except DatasetError as e:
        logger.error(f"Error ingesting attenuation CSV: {str(e)}")
        raise
