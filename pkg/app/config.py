from pydantic_settings import BaseSettings
from functools import lru_cache


class Settings(BaseSettings):
    data_dir: str = "."
    log_level: str = "INFO"
    # upper bound on bootstrap trials a single report request may ask for
    max_bootstrap_trials: int = 10_000

    class Config:
        env_file = ".env"
        env_file_encoding = "utf-8"
        env_prefix = "BSA_"


@lru_cache
def get_settings() -> Settings:
    return Settings()
