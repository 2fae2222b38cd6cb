"""Per-user file storage with quotas and one-time download links.

Every user owns a directory subtree under `<data_dir>/users/<user>/`;
all paths are user-relative and strictly confined to that subtree.
One-time links expose single files to remote WPS services: each link is
count-limited, optionally bound to an execution instance, and dies the
moment that instance reaches a terminal state.
"""

from __future__ import annotations

import os
import secrets
import threading
import time
from dataclasses import dataclass
from typing import Callable, Optional

import requests

from .catalog import normalize_user_path
from .errors import (
    GoneError,
    IllegalStateError,
    NetworkError,
    NotFoundError,
    QuotaExceededError,
)

DEFAULT_QUOTA_BYTES = 256 * 1024 * 1024
DEFAULT_MAX_DOWNLOADS = 3
DEFAULT_LINK_TTL_S = 24 * 3600


@dataclass(frozen=True)
class FileStat:
    path: str
    size: int


class UserStore:
    """One user's quota-limited subtree. put/delete are serialized."""

    def __init__(self, user: str, root: str, quota_bytes: int = DEFAULT_QUOTA_BYTES):
        self.user = user
        self.root = os.path.abspath(root)
        self.quota_bytes = quota_bytes
        self._lock = threading.RLock()
        os.makedirs(self.root, exist_ok=True)
        self.used_bytes = self._scan()

    def _scan(self) -> int:
        total = 0
        for dirpath, _dirnames, filenames in os.walk(self.root):
            for name in filenames:
                total += os.path.getsize(os.path.join(dirpath, name))
        return total

    def abspath(self, path: str) -> str:
        rel = normalize_user_path(path)
        return os.path.join(self.root, *rel.split("/"))

    def exists(self, path: str) -> bool:
        try:
            return os.path.isfile(self.abspath(path))
        except Exception:
            return False

    def put_file(self, path: str, data: bytes) -> FileStat:
        rel = normalize_user_path(path)
        target = self.abspath(rel)
        with self._lock:
            old_size = os.path.getsize(target) if os.path.isfile(target) else 0
            if self.used_bytes - old_size + len(data) > self.quota_bytes:
                raise QuotaExceededError(
                    f"user {self.user!r}: writing {len(data)} bytes exceeds quota"
                )
            os.makedirs(os.path.dirname(target), exist_ok=True)
            tmp = f"{target}.tmp.{os.getpid()}.{threading.get_ident()}"
            with open(tmp, "wb") as fh:
                fh.write(data)
            os.replace(tmp, target)
            self.used_bytes += len(data) - old_size
        return FileStat(path=rel, size=len(data))

    def get_file(self, path: str) -> bytes:
        target = self.abspath(path)
        if not os.path.isfile(target):
            raise NotFoundError(f"no file {path!r} for user {self.user!r}")
        with open(target, "rb") as fh:
            return fh.read()

    def delete_file(self, path: str) -> None:
        target = self.abspath(path)
        with self._lock:
            if not os.path.isfile(target):
                raise NotFoundError(f"no file {path!r} for user {self.user!r}")
            size = os.path.getsize(target)
            os.remove(target)
            self.used_bytes -= size

    def list_files(self, subdir: str = "") -> list[FileStat]:
        base = self.root if not subdir else self.abspath(subdir)
        if not os.path.isdir(base):
            return []
        stats = []
        for dirpath, _dirnames, filenames in os.walk(base):
            for name in sorted(filenames):
                full = os.path.join(dirpath, name)
                rel = os.path.relpath(full, self.root).replace(os.sep, "/")
                stats.append(FileStat(path=rel, size=os.path.getsize(full)))
        return sorted(stats, key=lambda s: s.path)


class DataStore:
    """Factory/registry of per-user stores under one data directory."""

    def __init__(self, data_dir: str, quota_bytes: int = DEFAULT_QUOTA_BYTES):
        self.users_root = os.path.join(data_dir, "users")
        self.quota_bytes = quota_bytes
        self._lock = threading.Lock()
        self._stores: dict[str, UserStore] = {}

    def store_for(self, user: str) -> UserStore:
        if not user or "/" in user or user.startswith("."):
            raise NotFoundError(f"bad user name {user!r}")
        with self._lock:
            store = self._stores.get(user)
            if store is None:
                store = UserStore(
                    user, os.path.join(self.users_root, user), self.quota_bytes
                )
                self._stores[user] = store
            return store

    def fetch_remote_result(self, url: str, user: str, dest_path: str) -> FileStat:
        """Download a result reference into the user's store (quota applies)."""
        try:
            resp = requests.get(url, timeout=60)
            resp.raise_for_status()
        except requests.RequestException as exc:
            raise NetworkError(f"GET {url}: {exc}") from exc
        store = self.store_for(user)
        if store.exists(dest_path):
            import logging

            logging.getLogger(__name__).warning(
                "overwriting existing result file %s for user %s", dest_path, user
            )
        return store.put_file(dest_path, resp.content)


# ---------------------------------------------------------------- links


LINK_ACTIVE = "active"
LINK_EXHAUSTED = "exhausted"
LINK_TERMINATED = "terminated"


@dataclass
class OneTimeLink:
    token: str
    user: str
    path: str
    remaining_downloads: int
    created_at: float
    state: str = LINK_ACTIVE
    instance_id: Optional[str] = None

    @property
    def url_path(self) -> str:
        return f"/files/{self.token}"


class LinkTable:
    """Tokenized download grants; admission check and decrement are atomic."""

    def __init__(
        self,
        store: DataStore,
        max_downloads: int = DEFAULT_MAX_DOWNLOADS,
        ttl_s: float = DEFAULT_LINK_TTL_S,
        instance_is_terminal: Callable[[str], bool] | None = None,
    ):
        self.store = store
        self.max_downloads = max_downloads
        self.ttl_s = ttl_s
        self.instance_is_terminal = instance_is_terminal
        self._lock = threading.Lock()
        self._links: dict[str, OneTimeLink] = {}

    def mint(
        self,
        user: str,
        path: str,
        instance_id: Optional[str] = None,
        max_downloads: Optional[int] = None,
    ) -> OneTimeLink:
        if not self.store.store_for(user).exists(path):
            raise NotFoundError(f"no file {path!r} for user {user!r}")
        if (
            instance_id is not None
            and self.instance_is_terminal is not None
            and self.instance_is_terminal(instance_id)
        ):
            raise IllegalStateError(f"instance {instance_id!r} already terminal")
        with self._lock:
            token = secrets.token_hex(16)
            while token in self._links:  # negligible, but enforced
                token = secrets.token_hex(16)
            link = OneTimeLink(
                token=token,
                user=user,
                path=path,
                instance_id=instance_id,
                remaining_downloads=(
                    max_downloads if max_downloads is not None else self.max_downloads
                ),
                created_at=time.monotonic(),
            )
            self._links[token] = link
            return link

    def serve(self, token: str) -> bytes:
        with self._lock:
            link = self._links.get(token)
            if link is None:
                raise NotFoundError("unknown token")
            if link.state != LINK_ACTIVE:
                raise GoneError(f"link {link.state}")
            if time.monotonic() - link.created_at > self.ttl_s:
                link.state = LINK_TERMINATED
                raise GoneError("link expired")
            if (
                link.instance_id is not None
                and self.instance_is_terminal is not None
                and self.instance_is_terminal(link.instance_id)
            ):
                link.state = LINK_TERMINATED
                raise GoneError("instance finished")
            link.remaining_downloads -= 1
            if link.remaining_downloads <= 0:
                link.state = LINK_EXHAUSTED
        # admission granted; the file itself is written atomically elsewhere
        return self.store.store_for(link.user).get_file(link.path)

    def terminate_instance(self, instance_id: str) -> int:
        count = 0
        with self._lock:
            for link in self._links.values():
                if link.instance_id == instance_id and link.state == LINK_ACTIVE:
                    link.state = LINK_TERMINATED
                    count += 1
        return count

    def get(self, token: str) -> Optional[OneTimeLink]:
        with self._lock:
            return self._links.get(token)
