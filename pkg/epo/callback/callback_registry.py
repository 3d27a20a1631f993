import importlib.util
import logging
import os
from typing import Optional

import pluggy

from .specs import TrainingHookSpec

logger = logging.getLogger(__name__)

CALLBACK_FILE_ENV = "EPO_CALLBACK_FILE"


class TrainingCallbackRegistry:
    """Plugin manager for training lifecycle hooks"""

    def __init__(self):
        self.pm = pluggy.PluginManager("epo")
        self.pm.add_hookspecs(TrainingHookSpec)

    @property
    def hook(self):
        return self.pm.hook

    def register_plugin(self, plugin, name: Optional[str] = None):
        self.pm.register(plugin, name=name)

    def unregister_plugin(self, plugin):
        self.pm.unregister(plugin)

    def load_from_file(self, filepath: str):
        """Register a Python file's module-level hook implementations as one plugin"""
        try:
            spec = importlib.util.spec_from_file_location("epo_user_callbacks", filepath)
            module = importlib.util.module_from_spec(spec)
            spec.loader.exec_module(module)
            self.register_plugin(module, name=f"file:{filepath}")
            logger.info(f"Loaded callbacks from {filepath}")
        except Exception as e:
            logger.error(f"Failed to load callbacks from {filepath}: {e}", exc_info=True)
            raise

    def load_from_env(self):
        filepath = os.environ.get(CALLBACK_FILE_ENV)
        if filepath:
            self.load_from_file(filepath)
