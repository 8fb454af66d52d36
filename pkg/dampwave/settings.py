"""
Process-level settings for dampwave
"""
import os
import logging

from dotenv import load_dotenv

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


class Settings:
    """Settings read from the environment (optionally seeded from a .env file)."""

    def __init__(self):
        """Load settings from the environment."""
        load_dotenv()

        self.log_level = os.environ.get("DAMPWAVE_LOG_LEVEL", "info").upper()
        self.output_dir = os.environ.get("DAMPWAVE_OUTPUT_DIR", "out")

        parallel = os.environ.get("DAMPWAVE_PARALLEL", "1")
        try:
            self.parallel = max(1, int(parallel))
        except ValueError:
            logger.warning(f"Ignoring non-integer DAMPWAVE_PARALLEL={parallel!r}")
            self.parallel = 1

    def configure_logging(self):
        """Configure the root logger once for the process."""
        level = getattr(logging, self.log_level, logging.INFO)
        logging.basicConfig(level=level, format=LOG_FORMAT)
