# Copyright 2026 The s2m Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Joint-class sampling from generators trained on single positive labels.

Configs, worlds and reports are plain dicts (the JSON documents the C++ core
reads and writes). Spec index sets are lists of class indices.
"""

import json
import os

from . import _core
from ._core import (
    ConfigError,
    Error,
    InvalidSpec,
    artifact_version,
    enumerate_joint_classes,
    format_spec,
    joint_density_value,
    parse_spec,
)

__all__ = [
    "ConfigError",
    "Error",
    "InvalidSpec",
    "artifact_version",
    "builtin_world",
    "config_hash",
    "enumerate_joint_classes",
    "format_spec",
    "joint_density_value",
    "load_config",
    "normalize_config",
    "parse_spec",
    "render_report",
    "run",
    "run_and_write",
    "sweep",
    "validate_config",
]

__version__ = artifact_version


def _text(config):
    return config if isinstance(config, str) else json.dumps(config)


def load_config(path):
    """Reads a config file; returns (config dict, directory for relative paths)."""
    with open(path, encoding="utf-8") as f:
        return json.load(f), os.path.dirname(os.path.abspath(path))


def builtin_world(name, **params):
    return json.loads(_core.builtin_world(name, json.dumps(params)))


def normalize_config(config):
    """The config with every default filled in."""
    return json.loads(_core.normalize_config(_text(config)))


def validate_config(config, base_dir="."):
    _core.validate_config(_text(config), base_dir)


def config_hash(config):
    return _core.config_hash(_text(config))


def run(config, base_dir="."):
    """Runs in memory. Returns (report dict, per-spec sample dicts with
    "spec", "points" (samples x dim array), "log_r" and "chain")."""
    report, samples = _core.run(_text(config), base_dir)
    return json.loads(report), samples


def run_and_write(config, base_dir="."):
    """Runs and writes the artifacts to the config's output_dir; returns the manifest."""
    return json.loads(_core.run_and_write(_text(config), base_dir))


def sweep(config, base_dir="."):
    """Runs the config's grid; returns the sweep table as CSV text."""
    return _core.sweep(_text(config), base_dir)


def render_report(report):
    return _core.render_report(_text(report))
