"""Text persistence: trajectories as CSV, reports and manifests as JSON."""
import contextlib
import csv
import hashlib
import json
import os
import platform
import time

import numpy as np

from . import __version__
from .particles import Trajectory


@contextlib.contextmanager
def _open_sink(sink, mode):
    if hasattr(sink, "write") or hasattr(sink, "read"):
        yield sink
        return
    try:
        fh = open(sink, mode, newline="" if "b" not in mode else None)
    except OSError as exc:
        raise OSError(f"cannot open {os.fspath(sink)!r}: {exc.strerror}") from exc
    with fh:
        yield fh


def _fmt(x):
    return format(float(x), ".17g")


def write_trajectory(traj, sink):
    """One row per (time, particle): ``time,index,x_1..x_d,v_1..v_d``."""
    s, n, d = traj.positions.shape
    header = (["time", "index"] + [f"x_{k + 1}" for k in range(d)]
              + [f"v_{k + 1}" for k in range(d)])
    with _open_sink(sink, "w") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for k in range(s):
            t = _fmt(traj.times[k])
            for i in range(n):
                w.writerow([t, i] + [_fmt(v) for v in traj.positions[k, i]]
                           + [_fmt(v) for v in traj.velocities[k, i]])


def read_trajectory(source, params=None):
    with _open_sink(source, "r") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    d = (len(header) - 2) // 2
    data = np.array([[float(c) for c in r] for r in body])
    times = np.unique(data[:, 0])
    n = int(data[:, 1].max()) + 1
    data = data.reshape(len(times), n, 2 + 2 * d)
    dt = float(times[1] - times[0]) if len(times) > 1 else 0.0
    return Trajectory(params=params, dt=dt, times=data[:, 0, 0].copy(),
                      positions=data[:, :, 2:2 + d].copy(), velocities=data[:, :, 2 + d:].copy())


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if hasattr(obj, "as_dict"):
        return obj.as_dict()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _residuals(d):
    """Collect schedule identity residuals wherever a schedule is embedded."""
    if isinstance(d, dict):
        if "schedule" in d and isinstance(d["schedule"], dict):
            s = d["schedule"]
            d["schedule_identity_residual"] = abs(
                s["delta"] ** 2 * s["nu"] ** 4 * s["eps"] ** (4 * s["d"] + 2) * s["budget"] - 1.0)
        for v in d.values():
            _residuals(v)
    elif isinstance(d, list):
        for v in d:
            _residuals(v)
    return d


def report_document(report):
    doc = report.as_dict() if hasattr(report, "as_dict") else dict(report)
    doc = json.loads(json.dumps(doc, default=_jsonable))
    return _residuals(doc)


def write_report(report, sink):
    doc = report_document(report)
    with _open_sink(sink, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, config, files, started, schedule=None, command=None):
    """Manifest with config echo, version, schedule, timing and checksums."""
    doc = {
        "command": command,
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "config": config.as_dict() if hasattr(config, "as_dict") else config,
        "schedule": schedule.as_dict() if schedule is not None else None,
        "started": time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(started)),
        "wall_clock_s": time.time() - started,
        "files": {os.path.basename(f): sha256(f) for f in files},
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(json.loads(json.dumps(doc, default=_jsonable)), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
