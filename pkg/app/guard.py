import json
import logging
import sys
from functools import wraps

from game.errors import HDGameError, InputError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_INPUT = 2


def exit_code_for(error: Exception) -> int:
    """Input, file and JSON problems exit 2; every other failure exits 1."""
    if isinstance(error, (InputError, OSError, json.JSONDecodeError)):
        return EXIT_INPUT
    return EXIT_DOMAIN


def handle_errors(f):
    """Decorator turning a command handler's exceptions into an exit status and a one-line diagnostic."""
    @wraps(f)
    def decorated_function(*args, **kwargs):
        try:
            status = f(*args, **kwargs)
            return EXIT_OK if status is None else status
        except HDGameError as e:
            print(f"error: {e}", file=sys.stderr)
            return exit_code_for(e)
        except OSError as e:
            print(f"error: {e.filename or ''}: {e.strerror or e}", file=sys.stderr)
            return EXIT_INPUT
        except Exception as e:
            # Catch any other unexpected errors so the CLI still exits cleanly
            logger.exception(f"Unexpected error in {f.__name__}")
            print(f"error: unexpected failure: {e}", file=sys.stderr)
            return EXIT_DOMAIN

    return decorated_function
