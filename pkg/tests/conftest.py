"""Shared fixtures: a live gateway over a temp data dir, and small helpers."""

from __future__ import annotations

import json
import os

import pytest
import requests

from wpsenv.catalog import bound_param_from_json
from wpsenv.config import ApiConfig
from wpsenv.env import Environment
from wpsenv.gateway import GatewayServer

TOKEN = "test-token-alice"
USER = "alice"

# 2x2 grid over (0,0)-(10,10); three points totaling q=9, one road with q=8.
GRID_SPEC = "ncols=2 nrows=2 xllcorner=0 yllcorner=0 cellsize=5"
POINTS_CSV = "x,y,q\n2,2,3\n7,7,5\n2,8,1\n"
ROADS_CSV = 'id,wkt,q\nr1,"LINESTRING(0 2.5, 10 2.5)",8\n'
# hand binning: points -> [[1,5],[3,0]], road -> [[0,0],[4,4]], sum below
EXPECTED_COMMON = [[1.0, 5.0], [7.0, 4.0]]
EXPECTED_MASS = 17.0

ROAD_PNT_POL_PORT = """
function road_pnt_pol(housefile, roadsources, gridspec, sumpol, commonresult) {
    var houseresult = "tmp/hr.asc";
    var roadResult = "tmp/rr.asc";
    vector2grid(housefile, gridspec, houseresult);
    road2grid(roadsources, gridspec, sumpol, roadResult);
    g_sum(roadResult, houseresult, commonresult);
    return true;
}
"""

ASC = {"kind": "complex", "mime": "text/plain", "encoding": None, "schema": None}
LIT_STR = {"kind": "literal", "base": "string"}
LIT_NUM = {"kind": "literal", "base": "double"}


def param_json(pid: str, widget_kind: str, dtype: dict, wmin=None, wmax=None) -> dict:
    return {
        "identifier": pid,
        "title": pid,
        "dtype": dtype,
        "widget": {"kind": widget_kind, "min": wmin, "max": wmax, "default": None},
        "human_name": pid,
        "human_description": "",
    }


def param(pid: str, widget_kind: str, dtype: dict, wmin=None, wmax=None):
    return bound_param_from_json(param_json(pid, widget_kind, dtype, wmin, wmax))


def road_pnt_pol_package() -> dict:
    return {
        "name": "Road and point pollution",
        "description": "Combines rasterized point and road emissions onto one grid",
        "wrapper_name": "road_pnt_pol",
        "entry_function": "road_pnt_pol",
        "inputs": [
            param_json("housefile", "file", ASC),
            param_json("roadsources", "file", ASC),
            param_json("gridspec", "edit", LIT_STR),
            param_json("sumpol", "number", LIT_NUM, wmin=0),
        ],
        "outputs": [param_json("commonresult", "file_save", ASC)],
        "source": ROAD_PNT_POL_PORT,
    }


class Stack:
    """A running gateway plus conveniences for talking to it."""

    def __init__(self, env: Environment, server: GatewayServer):
        self.env = env
        self.server = server
        self.base = server.base_url
        self.session = requests.Session()
        self.session.headers["Authorization"] = f"Bearer {TOKEN}"

    def get(self, path, **kw):
        kw.setdefault("timeout", 30)
        return self.session.get(self.base + path, **kw)

    def post(self, path, **kw):
        kw.setdefault("timeout", 30)
        return self.session.post(self.base + path, **kw)

    def put(self, path, **kw):
        kw.setdefault("timeout", 30)
        return self.session.put(self.base + path, **kw)

    def delete(self, path, **kw):
        kw.setdefault("timeout", 30)
        return self.session.delete(self.base + path, **kw)

    def put_fixture_files(self):
        self.put("/api/files/in/points.csv", data=POINTS_CSV)
        self.put("/api/files/in/roads.csv", data=ROADS_CSV)

    def run_sync(self, service_id: str, values: dict) -> dict:
        resp = self.post(
            "/api/executions",
            json={"service_id": service_id, "values": values, "mode": "sync"},
        )
        assert resp.status_code == 200, resp.text
        return resp.json()


def make_stack(tmp_path, **config_overrides) -> Stack:
    data_dir = os.path.join(str(tmp_path), "data")
    os.makedirs(data_dir, exist_ok=True)
    with open(os.path.join(data_dir, "users.json"), "w", encoding="utf-8") as fh:
        json.dump({TOKEN: USER}, fh)
    config = ApiConfig(bind_addr="127.0.0.1:0", data_dir=data_dir, **config_overrides)
    env = Environment(config)
    server = GatewayServer(env).start()
    return Stack(env, server)


@pytest.fixture()
def stack(tmp_path):
    s = make_stack(tmp_path)
    yield s
    s.server.stop()


@pytest.fixture()
def fast_stack(tmp_path):
    # short poll interval keeps remote-execution tests quick
    s = make_stack(tmp_path, poll_interval_ms=200)
    yield s
    s.server.stop()
