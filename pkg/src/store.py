import json
import logging
import os
from dataclasses import asdict
from datetime import datetime, timezone
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd

from fracops import ComplexField, GridSpec

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
FORMATS = ("csv", "json")


def _path_for(output_dir: str, name: str, fmt: str) -> str:
    return os.path.join(output_dir, f"{name}.{fmt}")


def read_table(path: str) -> pd.DataFrame:
    """Read a table written by ArtifactStore, in either format"""
    try:
        if path.endswith(".json"):
            with open(path, "r") as f:
                return pd.DataFrame.from_records(json.load(f))
        return pd.read_csv(path, float_precision="round_trip")
    except Exception as e:
        logger.error(f"Error reading table {path}: {str(e)}")
        raise


def require_columns(frame: pd.DataFrame, columns: Sequence[str], path: str) -> None:
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise ValueError(f"{path}: missing column(s) {', '.join(missing)}")


def read_json(path: str) -> Dict:
    with open(path, "r") as f:
        return json.load(f)


class ArtifactStore:
    """Writes run artifacts (tables, headers, manifest) into one output directory"""

    def __init__(self, output_dir: str, fmt: str = "csv"):
        if fmt not in FORMATS:
            raise ValueError(f"format must be one of {FORMATS}, got {fmt!r}")
        self.output_dir = output_dir
        self.fmt = fmt
        self.written: List[str] = []
        try:
            os.makedirs(output_dir, exist_ok=True)
            logger.info(f"Writing artifacts to {output_dir} as {fmt}")
        except Exception as e:
            logger.error(f"Error creating output directory {output_dir}: {str(e)}")
            raise

    def save_table(self, name: str, frame: pd.DataFrame) -> str:
        """Save a table as CSV (17 significant digits) or as a JSON record list"""
        path = _path_for(self.output_dir, name, self.fmt)
        try:
            if self.fmt == "csv":
                frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
            else:
                with open(path, "w") as f:
                    json.dump(frame.to_dict(orient="records"), f)
            self.written.append(os.path.basename(path))
            logger.debug(f"Saved {len(frame)} rows to {path}")
            return path
        except Exception as e:
            logger.error(f"Error saving table {name}: {str(e)}")
            raise

    def save_json(self, name: str, payload: Dict) -> str:
        path = _path_for(self.output_dir, name, "json")
        try:
            with open(path, "w") as f:
                json.dump(payload, f, indent=2, sort_keys=True)
            self.written.append(os.path.basename(path))
            return path
        except Exception as e:
            logger.error(f"Error saving {name}: {str(e)}")
            raise

    def save_snapshots(self, times: Sequence[float], snapshots: Sequence[ComplexField], header: Dict, prefix: str = "snapshot") -> List[str]:
        """One (x, re, im) table per snapshot plus a JSON header listing grid and times"""
        paths = []
        for i, field in enumerate(snapshots):
            frame = pd.DataFrame({"x": field.grid.points, "re": field.values.real, "im": field.values.imag})
            paths.append(self.save_table(f"{prefix}_{i:04d}", frame))
        grid = snapshots[0].grid
        header = dict(header)
        header.update(
            {
                "grid": asdict(grid),
                "times": [float(t) for t in times],
                "files": [os.path.basename(p) for p in paths],
            }
        )
        self.save_json(prefix + "s", header)
        logger.info(f"Saved {len(paths)} snapshots")
        return paths

    def save_bands(self, q_values: np.ndarray, bands: np.ndarray, header: Dict, name: str = "bands") -> str:
        frame = pd.DataFrame({"q": q_values})
        for n in range(bands.shape[1]):
            frame[f"E_{n}"] = bands[:, n]
        path = self.save_table(name, frame)
        self.save_json(name + "_header", header)
        return path

    def save_ensemble(self, times: np.ndarray, positions: np.ndarray, header: Dict) -> str:
        """Long table of (path, time, position)"""
        n_paths, n_times = positions.shape
        frame = pd.DataFrame(
            {
                "path": np.repeat(np.arange(n_paths), n_times),
                "time": np.tile(times, n_paths),
                "position": positions.ravel(),
            }
        )
        path = self.save_table("ensemble", frame)
        self.save_json("ensemble_header", header)
        return path

    def save_manifest(self, config: Dict) -> str:
        """Resolved run configuration plus the only timestamp of the run"""
        payload = dict(config)
        payload["created_at"] = datetime.now(timezone.utc).isoformat()
        payload["artifacts"] = list(self.written)
        return self.save_json("manifest", payload)


def read_snapshots(output_dir: str, prefix: str = "snapshot") -> Tuple[np.ndarray, List[ComplexField]]:
    header = read_json(os.path.join(output_dir, prefix + "s.json"))
    grid = GridSpec(**header["grid"])
    fields = []
    for name in header["files"]:
        frame = read_table(os.path.join(output_dir, name))
        require_columns(frame, ("re", "im"), name)
        fields.append(ComplexField(grid, frame["re"].to_numpy() + 1j * frame["im"].to_numpy()))
    return np.array(header["times"]), fields


def read_bands(path: str) -> Tuple[np.ndarray, np.ndarray]:
    frame = read_table(path)
    require_columns(frame, ("q",), path)
    columns = [c for c in frame.columns if c.startswith("E_")]
    columns.sort(key=lambda c: int(c[2:]))
    return frame["q"].to_numpy(), frame[columns].to_numpy()


def read_ensemble(path: str) -> Tuple[np.ndarray, np.ndarray]:
    """Times and the n_paths x n_times position matrix"""
    frame = read_table(path)
    require_columns(frame, ("path", "time", "position"), path)
    frame = frame.sort_values(["path", "time"], kind="stable")
    n_paths = int(frame["path"].max()) + 1
    positions = frame["position"].to_numpy().reshape(n_paths, -1)
    times = frame["time"].to_numpy()[: positions.shape[1]]
    return times, positions
