"""Records golden captures: an asyncua client talks to `uaserver record`.

Run from the repository root after `cargo build -p uaserver`:
    python3 tools/oracle/record_capture.py
"""

import asyncio
import os
import shutil
import signal
import subprocess
import sys
import tempfile
import threading
import time
from pathlib import Path

from asyncua import Client, ua

ROOT = Path(__file__).resolve().parents[2]
SERVER = ROOT / "target/debug/uaserver"
OUT = ROOT / "crates/core/tests/captures"
PORT = 48401
URL = f"opc.tcp://127.0.0.1:{PORT}/"
LAST_NODE = "ns=1;i=1003"


async def read_write(client):
    node = client.get_node(LAST_NODE)
    for _ in range(100):
        await node.read_value()
    for k in range(100):
        await node.write_value(ua.DataValue(ua.Variant(k, ua.VariantType.Int32)))


async def connect_only(client):
    pass


async def session(workload):
    client = Client(URL, timeout=5)
    client.session_timeout = 60000
    async with client:
        await workload(client)


def start_server(cfg, out):
    proc = subprocess.Popen([SERVER, "record", "-c", cfg, "-o", out], stderr=subprocess.PIPE, text=True)
    for line in proc.stderr:
        sys.stderr.write(line)
        if "event=listening" in line:
            break
    else:
        sys.exit("server did not start")
    threading.Thread(target=lambda: [sys.stderr.write(l) for l in proc.stderr], daemon=True).start()
    return proc


def record(name, workload):
    dest = OUT / name
    with tempfile.TemporaryDirectory() as tmp:
        cfg = Path(tmp) / "server.conf"
        cfg.write_text(f"host = 127.0.0.1\nport = {PORT}\nendpoint_host = 127.0.0.1\nseed = 24301\n")
        out = Path(tmp) / "capture"
        proc = start_server(cfg, out)
        try:
            asyncio.run(session(workload))
            time.sleep(0.2)
        finally:
            proc.send_signal(signal.SIGINT)
            proc.wait(5)
        if proc.returncode != 0:
            sys.exit(f"server exited with {proc.returncode}")
        if dest.exists():
            shutil.rmtree(dest)
        shutil.copytree(out, dest)
        print(f"{name}: {sum(1 for _ in (dest / 'manifest.txt').open()) - 1} events")


if __name__ == "__main__":
    os.chdir(ROOT)
    OUT.mkdir(parents=True, exist_ok=True)
    record("read_write_last_node", read_write)
    record("connect_only", connect_only)
