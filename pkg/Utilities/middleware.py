from functools import wraps

from Utilities.errors import ModeScatterError
from Utilities.logger import get_logger

logger = get_logger('middleware')


def tool_envelope(func):
    """Decorator wrapping a tool's payload in the result envelope"""
    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            payload = func(*args, **kwargs)
        except ModeScatterError as exc:
            logger.warning(exc.message, extra={"error": type(exc).__name__, "tool": func.__name__})
            return {
                "result": {
                    "status": "error",
                    "message": exc.message,
                    "error": type(exc).__name__,
                    "exit_code": exc.exit_code,
                }
            }
        except (ValueError, TypeError) as exc:
            return {
                "result": {
                    "status": "error",
                    "message": str(exc),
                    "error": type(exc).__name__,
                }
            }

        return {
            "result": {
                "status": "success",
                "message": payload.pop("message", f"{func.__name__} completed"),
                **payload,
            }
        }

    return wrapper
