#!/usr/bin/env python3
"""
Run configuration

Settings resolve in three layers: the JSON defaults shipped beside this
module, an optional plain-text key=value file (--config), then command-line
flags. The seed falls back to the DPQ_SEED environment variable when no flag
gives it. Every key must be known; values take the type of their default.
"""

import json
import os
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, Mapping, Optional, Set

from quantization.model_quantizer import BITS_TO_D
from quantization.quantizers import DEFAULT_K, PRESET_DIMS
from utils.errors import UsageError

CONFIG_PATH = os.path.join(os.path.dirname(os.path.abspath(__file__)), "dpq_config.json")
SEED_ENV = "DPQ_SEED"
TRUE_WORDS = ('1', 'true', 'yes', 'on')
FALSE_WORDS = ('0', 'false', 'no', 'off')
UNIFORM_BITS = (1, 8)


@dataclass
class RunConfig:
    """Parsed subcommand, its positional paths, and the resolved settings"""
    command: str
    settings: Dict[str, Any]
    paths: Dict[str, Optional[str]] = field(default_factory=dict)
    explicit: Set[str] = field(default_factory=set)

    def __getitem__(self, key: str):
        return self.settings[key]

    def resolved_line(self) -> str:
        """One log line with the command, paths and resolved settings"""
        record = {'command': self.command, 'paths': self.paths, 'settings': self.settings}
        return "resolved config: " + json.dumps(record, sort_keys=True)


def load_config(path: str = None) -> Dict[str, Any]:
    """Load the JSON defaults"""
    path = CONFIG_PATH if path is None else path
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return json.load(f)
    except FileNotFoundError:
        raise UsageError(f"Config file not found: {path}")
    except json.JSONDecodeError as e:
        raise UsageError(f"Invalid JSON in config file {path}: {e}")


def coerce(key: str, raw: str, default: Any) -> Any:
    """Convert a text value to the type of its default"""
    text = raw.strip()
    try:
        if isinstance(default, bool):
            lowered = text.lower()
            if lowered in TRUE_WORDS:
                return True
            if lowered in FALSE_WORDS:
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError:
        raise UsageError(f"Bad value for '{key}': {raw!r} (expected {type(default).__name__})")
    return text


def parse_key_values(lines: Iterable[str], defaults: Mapping[str, Any], source: str = "<config>") -> Dict[str, Any]:
    """Parse key=value lines; '#' starts a comment"""
    values = {}
    for number, line in enumerate(lines, start=1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise UsageError(f"{source}:{number}: expected key=value, got {line!r}")
        key, raw = line.split('=', 1)
        key = key.strip()
        if key not in defaults:
            raise UsageError(f"{source}:{number}: unknown key '{key}'")
        values[key] = coerce(key, raw, defaults[key])
    return values


def read_config_file(path: str, defaults: Mapping[str, Any]) -> Dict[str, Any]:
    """Parse a key=value config file against the known keys"""
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return parse_key_values(f, defaults, source=path)
    except FileNotFoundError:
        raise UsageError(f"Config file not found: {path}")


def resolve_seed(flag_seed: Optional[int], env: Mapping[str, str], fallback: int) -> int:
    """Flag seed, else DPQ_SEED, else the configured seed"""
    if flag_seed is not None:
        return flag_seed
    raw = env.get(SEED_ENV)
    if raw is None or raw.strip() == '':
        return fallback
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}")


def apply_bit_preset(settings: Dict[str, Any], explicit: Set[str]):
    """--bits picks d (k = 256) unless d or k were given explicitly

    For the uniform method bits is the bit-width itself and must lie in [1, 8].
    """
    bits = settings.get('bits')
    if settings.get('method') == 'uniform':
        if not UNIFORM_BITS[0] <= bits <= UNIFORM_BITS[1]:
            raise UsageError(f"--bits for uniform quantization must be in [1, 8], got {bits}")
        return
    if 'bits' not in explicit:
        return
    if bits not in BITS_TO_D:
        raise UsageError(f"--bits must be one of {sorted(BITS_TO_D)}, got {bits}")
    if 'd' not in explicit:
        settings['d'] = BITS_TO_D[bits]
    if 'k' not in explicit:
        settings['k'] = DEFAULT_K


def check_group_dim(d: int, width: int):
    """d must be a preset or divide the layer width"""
    if d < 1 or (d not in PRESET_DIMS and width % d != 0):
        raise UsageError(f"d={d} is not one of {PRESET_DIMS} and does not divide width {width}")


def resolve(command: str, flags: Mapping[str, Any], paths: Mapping[str, Optional[str]] = None,
            config_file: str = None, env: Mapping[str, str] = None,
            defaults: Mapping[str, Any] = None) -> RunConfig:
    """Merge defaults, the key=value file and flags (None means not given)"""
    defaults = load_config() if defaults is None else dict(defaults)
    env = os.environ if env is None else env

    settings = dict(defaults)
    explicit: Set[str] = set()
    if config_file:
        from_file = read_config_file(config_file, defaults)
        settings.update(from_file)
        explicit.update(from_file)

    for key, value in flags.items():
        if value is None or key == 'seed':
            continue
        if key not in defaults:
            raise UsageError(f"Unknown setting '{key}'")
        settings[key] = value
        explicit.add(key)

    settings['seed'] = resolve_seed(flags.get('seed'), env, settings['seed'])
    apply_bit_preset(settings, explicit)
    return RunConfig(command=command, settings=settings, paths=dict(paths or {}), explicit=explicit)
