from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """
    Environment-level settings, read from `MYOSELECT_*` variables or a `.env` file.

    Attributes:
        seed (int | None): Fallback seed for commands invoked without `--seed`.
        jobs (int): Default worker count for parallel sections.
        log_level (str): Minimum level emitted by the stderr log sink.
    """

    model_config = SettingsConfigDict(
        env_file=".env", env_prefix="MYOSELECT_", extra="ignore", env_file_encoding="utf-8"
    )

    seed: int | None = None
    jobs: int = 1
    log_level: str = "INFO"


settings = Settings()
