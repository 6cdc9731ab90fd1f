from .app import create_app
from .schemas import ApiError

__all__ = ["create_app", "ApiError"]
