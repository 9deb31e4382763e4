"""Shipped reference data: "true" parameter cards for the eight
variant/polarity devices and the default extraction bounds.

Set ``MIVCELLKIT_DATA_DIR`` to point at a directory with the same layout
(``models/<variant>_<polarity>.model`` and ``default_bounds.txt``) to use
other fixtures.
"""

import os
from pathlib import Path

from .characterization import VARIANTS
from .device_model import POLARITIES, read_model

ENV_VAR = "MIVCELLKIT_DATA_DIR"


def data_dir():
    override = os.environ.get(ENV_VAR)
    if override:
        return Path(override)
    return Path(__file__).resolve().parent / "data"


def device_keys():
    return [(v, p) for v in VARIANTS for p in POLARITIES]


def model_path(variant, polarity, root=None):
    root = Path(root) if root is not None else data_dir() / "models"
    return root / f"{variant}_{polarity}.model"


def load_fixture_models(root=None):
    """Return ``{(variant, polarity): (ModelParams, ModelConstants)}``."""
    return {key: read_model(model_path(*key, root=root)) for key in device_keys()}


def default_bounds_path():
    return data_dir() / "default_bounds.txt"
