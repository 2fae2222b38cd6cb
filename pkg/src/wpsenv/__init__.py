"""Distributed geoprocessing service orchestration over OGC WPS 1.0.0.

Subsystems:

- ``wps_protocol``: WPS 1.0.0 document encoding and decoding
- ``catalog``: the service catalog, registration flow and widget model
- ``chaining``: type-based service chaining analysis
- ``datastore``: per-user file stores and one-time download links
- ``executor``: execution instances, status tracking and remote polling
- ``script``: the scenario scripting language (lexer, parser, interpreter)
- ``scenario``: scenario compilation, publication and runtime
- ``mock_services``: built-in raster services used for tests and demos
- ``gateway``: the HTTP front door (WPS + REST + file links)
- ``cli``: operator command line
"""

from .config import ApiConfig
from .env import Environment
from .errors import WpsEnvError

__all__ = ["ApiConfig", "Environment", "WpsEnvError"]
__version__ = "0.1.0"
