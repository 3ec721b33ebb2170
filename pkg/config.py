import os
from pathlib import Path
from typing import Optional

import yaml
from dotenv import load_dotenv

ROOT_DIR = Path(__file__).resolve().parent


class Config:
    _instance = None
    _config = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super(Config, cls).__new__(cls)
        return cls._instance

    def __init__(self):
        if self._config is None:
            self.load_config()

    def load_config(self):
        """Load config based on environment"""
        load_dotenv(ROOT_DIR / '.env')
        env = os.getenv('ENVIRONMENT', 'local')
        config_path = ROOT_DIR / 'configs' / f'config.{env}.yaml'

        if not config_path.exists():
            config_path = ROOT_DIR / 'configs' / 'config.local.yaml'

        with open(config_path, 'r') as f:
            self._config = yaml.safe_load(f) or {}

    def get(self, key: str, default=None):
        """Get config value by dot notation"""
        keys = key.split('.')
        value = self._config

        for k in keys:
            if isinstance(value, dict):
                value = value.get(k)
            else:
                return default

        return value if value is not None else default

    def grid_step_for(self, k: int) -> float:
        """Default deviation-grid step for a game with k sources"""
        if k == 2:
            return float(self.get('grids.k2_step', 0.002))
        return float(self.get('grids.default_step', 0.01))

    def ell_max_step_for(self, k: int) -> float:
        if k == 2:
            return float(self.get('grids.ell_max_k2_step', 0.002))
        return float(self.get('grids.ell_max_step', 0.01))

    def threads(self, override: Optional[int] = None) -> int:
        """Worker cap: explicit flag, then HDGAME_THREADS, then YAML"""
        if override:
            return max(1, int(override))
        env_value = os.getenv('HDGAME_THREADS')
        if env_value:
            try:
                return max(1, int(env_value))
            except ValueError:
                pass
        return max(1, int(self.get('threads', 1)))


# Singleton instance
config = Config()
