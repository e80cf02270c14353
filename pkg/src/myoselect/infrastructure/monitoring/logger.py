import sys

from loguru import logger as _root_logger

from myoselect.config import settings

_FORMAT = "{time:YYYY-MM-DD HH:mm:ss} - {extra[name]} - {level} - {message}"


class Logger:
    """
    Logger utility class to configure and provide a logger instance.

    Responsibilities:
    - Configures a single stderr sink with format and level
    - Binds each returned logger to the requesting module name
    """

    _sink_id: int | None = None

    @staticmethod
    def _configure(level: str) -> None:
        if Logger._sink_id is not None:
            _root_logger.remove(Logger._sink_id)
        else:
            # Drop loguru's default handler, it does not know about extra[name]
            _root_logger.remove()
            _root_logger.configure(extra={"name": "myoselect"})
        Logger._sink_id = _root_logger.add(sys.stderr, level=level.upper(), format=_FORMAT)

    @staticmethod
    def get_logger(name: str):
        """
        Get a configured logger instance for the given name.

        Args:
            name (str): The name of the logger.

        Returns:
            loguru.Logger: Logger bound to `name`.
        """
        if Logger._sink_id is None:
            Logger._configure(settings.log_level)
        return _root_logger.bind(name=name)

    @staticmethod
    def set_level(level: str) -> None:
        """
        Change the level of the stderr sink.

        Args:
            level (str): Level name, e.g. "DEBUG" or "WARNING".
        """
        Logger._configure(level)
