from vmtunet.config.config import VERSION

__version__ = VERSION
