"""Wiring: one Environment object owns every subsystem."""

from __future__ import annotations

import json
import os
from typing import Optional

from .catalog import Catalog
from .config import ApiConfig
from .datastore import DataStore, LinkTable
from .executor import Executor, InstanceRegistry
from .mock_services import builtin_processes

WPS_SCRATCH_USER = "_wps"  # server-side identity for WPS-initiated runs


class Environment:
    def __init__(self, config: ApiConfig):
        self.config = config
        os.makedirs(config.data_dir, exist_ok=True)
        self.store = DataStore(config.data_dir, config.user_quota_bytes)
        self.registry = InstanceRegistry(os.path.join(config.data_dir, "instances.jsonl"))
        self.links = LinkTable(
            self.store,
            max_downloads=config.link_max_downloads,
            instance_is_terminal=self.registry.is_terminal,
        )
        self.catalog = Catalog(os.path.join(config.data_dir, "catalog.json"))
        self.builtins = {bp.descriptor.local_id: bp for bp in builtin_processes()}
        existing = {d.local_id for d in self.catalog.all()}
        for bp in builtin_processes():
            if bp.descriptor.local_id not in existing:
                self.catalog.add(bp.descriptor)
        self.executor = Executor(
            catalog=self.catalog,
            store=self.store,
            links=self.links,
            registry=self.registry,
            config=config,
            builtins=self.builtins,
        )
        self._tokens = self._load_tokens()

    def _load_tokens(self) -> dict[str, str]:
        path = os.path.join(self.config.data_dir, "users.json")
        if not os.path.exists(path):
            return {}
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        return {str(k): str(v) for k, v in doc.items()}

    def user_for_token(self, token: str) -> Optional[str]:
        return self._tokens.get(token)
