from vmtunet.config.config import DIVERGENCE_LIMIT, REGION_EPS, VERSION

__all__ = ["DIVERGENCE_LIMIT", "REGION_EPS", "VERSION"]
