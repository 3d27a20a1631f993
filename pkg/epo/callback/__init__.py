from .specs import TrainingHookSpec, hookimpl, hookspec
from .callback_registry import CALLBACK_FILE_ENV, TrainingCallbackRegistry
