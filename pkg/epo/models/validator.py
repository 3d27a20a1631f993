import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence
import logging

from pydantic import ValidationError

from epo.exceptions import ConfigError
from .models import TrainConfig, TriggerMode

logger = logging.getLogger(__name__)


class ConfigValidator:
    """Cross-field checks that a single pydantic field cannot express"""

    def __init__(self, config: TrainConfig):
        self.config = config
        self.errors: List[tuple] = []
        self.warnings: List[str] = []

    def validate(self) -> bool:
        cfg = self.config
        pop = cfg.population
        k = pop.num_agents

        if cfg.env.num_envs % k != 0:
            self.errors.append(("env.num_envs", f"{cfg.env.num_envs} environments cannot be split evenly across K={k} agents"))
            return False

        batch = cfg.on_policy_batch_size
        if batch % cfg.effective_minibatch_size != 0:
            self.errors.append(("ppo.minibatch_size", f"{cfg.effective_minibatch_size} does not divide the on-policy batch of {batch}"))

        if pop.fitness_min_episodes > pop.fitness_window:
            self.errors.append(("population.fitness_min_episodes", "must not exceed population.fitness_window"))

        if cfg.opt.lr_min > cfg.opt.lr_max:
            self.errors.append(("opt.lr_min", "must not exceed opt.lr_max"))

        if pop.trigger_mode != TriggerMode.OFF and k < 4:
            if k > 1:
                self.warnings.append(f"Evolution disabled: K={k} leaves no room for two elites and a child")
        elif pop.evolution_enabled:
            x = pop.elites
            if x < 2 or x > k - 2:
                self.errors.append(("population.x_elites", f"x={x} must lie in [2, K-2] = [2, {k - 2}]"))

        if pop.trigger_mode == TriggerMode.FIXED_INTERVAL and pop.evolve_interval is None:
            self.warnings.append("fixed_interval trigger without population.evolve_interval never fires")

        return len(self.errors) == 0

    def get_report(self) -> str:
        """Generate a validation report"""
        report = ["=" * 60, "CONFIG VALIDATION REPORT", "=" * 60]

        if self.errors:
            report.append(f"\nERRORS ({len(self.errors)}):")
            for key, message in self.errors:
                report.append(f"  {key}: {message}")

        if self.warnings:
            report.append(f"\nWARNINGS ({len(self.warnings)}):")
            for warning in self.warnings:
                report.append(f"  {warning}")

        if not self.errors and not self.warnings:
            report.append("\nAll validations passed")

        report.append("=" * 60)
        return "\n".join(report)


def parse_override(item: str) -> tuple:
    """Split KEY=VALUE; the value is read as a JSON literal when it parses as one"""
    if "=" not in item:
        raise ConfigError(item, "override must look like KEY=VALUE")
    key, raw = item.split("=", 1)
    key = key.strip()
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def apply_overrides(data: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    defaults = TrainConfig().snapshot()
    for item in overrides:
        key, value = parse_override(item)
        parts = key.split(".")
        node, known = data, defaults
        for part in parts[:-1]:
            if not isinstance(known, dict) or part not in known:
                raise ConfigError(key, "unknown configuration key")
            known = known[part]
            node = node.setdefault(part, {})
        leaf = _canonical_key(parts[-1], known)
        if leaf is None:
            raise ConfigError(key, "unknown configuration key")
        node.pop(_alternate_key(leaf), None)
        node[leaf] = value
    return data


# population fields are dumped by alias; overrides may use either spelling
_ALIASES = {"K": "num_agents", "N_lat": "latent_dim"}


def _canonical_key(name: str, known: Any) -> Optional[str]:
    if not isinstance(known, dict):
        return None
    if name in known:
        return name
    for alias, field in _ALIASES.items():
        if name == field and alias in known:
            return alias
    return None


def _alternate_key(name: str) -> str:
    return _ALIASES.get(name, {v: k for k, v in _ALIASES.items()}.get(name, name))


def validate_config(data: Dict[str, Any]) -> TrainConfig:
    try:
        config = TrainConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        key = ".".join(str(part) for part in first["loc"])
        raise ConfigError(key, first["msg"]) from e

    validator = ConfigValidator(config)
    if not validator.validate():
        logger.error(validator.get_report())
        key, message = validator.errors[0]
        raise ConfigError(key, message)
    for warning in validator.warnings:
        logger.warning(warning)
    return config


def load_config(path: Optional[str] = None, overrides: Sequence[str] = ()) -> TrainConfig:
    """Read a JSON config (or start from defaults), apply dotted overrides and validate"""
    data: Dict[str, Any] = {}
    if path is not None:
        config_path = Path(path)
        if not config_path.is_file():
            raise ConfigError("--config", f"config file does not exist: {config_path}")
        try:
            data = json.loads(config_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError("--config", f"{config_path} is not valid JSON: {e}") from e
        logger.info(f"Loaded config from {config_path}")
    return validate_config(apply_overrides(data, overrides))
