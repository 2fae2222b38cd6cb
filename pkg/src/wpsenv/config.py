"""Runtime configuration, sourced from WPSENV_* environment variables."""

from __future__ import annotations

import os
from dataclasses import dataclass


@dataclass
class ApiConfig:
    bind_addr: str = "127.0.0.1:8080"
    data_dir: str = "./data"
    public_base_url: str = ""  # defaults to http://<bind_addr>
    poll_interval_ms: int = 1000
    link_max_downloads: int = 3
    job_timeout_s: float = 86400.0
    user_quota_bytes: int = 256 * 1024 * 1024

    def __post_init__(self):
        if not self.public_base_url:
            self.public_base_url = f"http://{self.bind_addr}"
        self.public_base_url = self.public_base_url.rstrip("/")

    @property
    def host(self) -> str:
        return self.bind_addr.rsplit(":", 1)[0]

    @property
    def port(self) -> int:
        return int(self.bind_addr.rsplit(":", 1)[1])

    @classmethod
    def from_env(cls, **overrides) -> "ApiConfig":
        env = os.environ
        kwargs = dict(
            bind_addr=env.get("WPSENV_BIND_ADDR", "127.0.0.1:8080"),
            data_dir=env.get("WPSENV_DATA_DIR", "./data"),
            public_base_url=env.get("WPSENV_PUBLIC_BASE_URL", ""),
            poll_interval_ms=int(env.get("WPSENV_POLL_INTERVAL_MS", "1000")),
            link_max_downloads=int(env.get("WPSENV_LINK_MAX_DOWNLOADS", "3")),
            job_timeout_s=float(env.get("WPSENV_JOB_TIMEOUT_S", "86400")),
        )
        kwargs.update(overrides)
        return cls(**kwargs)
