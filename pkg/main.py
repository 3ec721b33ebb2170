import logging
import sys

from config import config
from app.create_app import run

logging.basicConfig(
    level=config.get('logging.level', 'INFO'),
    format=config.get('logging.format', '%(asctime)s [%(levelname)s] %(name)s: %(message)s'),
    stream=sys.stderr,
)

if __name__ == '__main__':
    sys.exit(run())
