import json

try:
    import importlib.resources as pkg_resources
except ImportError:
    import importlib_resources as pkg_resources  # type: ignore
from . import presets

__all__ = ['PRESET_NAMES', 'load_preset']

PRESET_NAMES = ('tiny', 'small')

preset_cache: dict = {}


def load_preset(name: str) -> dict:
    if name not in PRESET_NAMES:
        raise KeyError(name)
    if name not in preset_cache:
        text = pkg_resources.files(presets).joinpath(f'{name}.json').read_text()
        preset_cache[name] = json.loads(text)
    return preset_cache[name]
