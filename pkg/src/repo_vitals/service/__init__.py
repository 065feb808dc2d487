from .app import BadgeService, ServiceState, badge_schema, create_app
from .schemas import BadgePayload, ErrorBody, Health

__all__ = ["BadgePayload", "BadgeService", "ErrorBody", "Health", "ServiceState", "badge_schema", "create_app"]
