import json
import logging
from typing import Dict, List, Optional, Tuple

logger = logging.getLogger(__name__)


def load_config(config_file: Optional[str] = None) -> Dict:
    """
    Load default subcommand parameters from a JSON file
    """
    if config_file is None:
        return {}
    try:
        with open(config_file, "r") as f:
            config = json.load(f)
    except FileNotFoundError:
        logger.warning(f"Config file {config_file} not found, using defaults")
        return {}
    except json.JSONDecodeError as e:
        logger.error(f"Error parsing config file: {str(e)}")
        raise ValueError(f"config file {config_file} is not valid JSON: {str(e)}")
    if not isinstance(config, dict):
        raise ValueError(f"config file {config_file} must hold a JSON object")
    return config


def parse_range(text: str) -> Tuple[float, float]:
    """
    Parse 'lo:hi' into a positive interval
    """
    try:
        low, high = (float(part) for part in text.split(":"))
    except ValueError:
        raise ValueError(f"range must look like lo:hi, got {text!r}")
    if not 0 < low < high:
        raise ValueError(f"range needs 0 < lo < hi, got {text!r}")
    return low, high


def parse_float_list(text: str) -> List[float]:
    """'0.1,1,10' -> [0.1, 1.0, 10.0]"""
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ValueError(f"expected comma-separated numbers, got {text!r}")
    if not values:
        raise ValueError("expected at least one number")
    return values
