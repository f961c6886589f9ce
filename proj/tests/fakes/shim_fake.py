"""Stand-in for the runner shim, speaking the same stdio protocol.

Each job runs in a forked child so user code never shares state across
jobs; the parent only routes messages and enforces the hard deadline.
"""

import ast
import io
import json
import math
import os
import resource
import select
import signal
import sys
import tempfile
import time

PROTOCOL = {"protocol": "reasonbench-shim", "version": 1}
COUNTERS = "__reasonbench_loops__"
KINDS = ("call", "stdin_run", "test", "trace")

_out = os.fdopen(os.dup(1), "w", encoding="utf-8")
_in = os.fdopen(os.dup(0), "r", encoding="utf-8")


class _SoftTimeout(BaseException):
    pass


def send(obj):
    _out.write(json.dumps(obj) + "\n")
    _out.flush()


def render(v, depth=0):
    if depth > 200:
        return "..."
    if v is None or isinstance(v, (bool, int)):
        return repr(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (str, bytes, complex)):
        return repr(v)
    if isinstance(v, list):
        return "[" + ", ".join(render(x, depth + 1) for x in v) + "]"
    if isinstance(v, tuple):
        inner = ", ".join(render(x, depth + 1) for x in v)
        return "(" + inner + ("," if len(v) == 1 else "") + ")"
    if isinstance(v, (set, frozenset)):
        if not v:
            return "set()" if isinstance(v, set) else "frozenset()"
        body = "{" + ", ".join(sorted(render(x, depth + 1) for x in v)) + "}"
        return body if isinstance(v, set) else "frozenset(" + body + ")"
    if isinstance(v, dict):
        items = sorted((render(k, depth + 1), render(x, depth + 1)) for k, x in v.items())
        return "{" + ", ".join(k + ": " + x for k, x in items) + "}"
    if hasattr(v, "tolist") and callable(v.tolist):
        try:
            return render(v.tolist(), depth + 1)
        except Exception:
            pass
    return repr(v)


class _Instrument(ast.NodeTransformer):
    def __init__(self, sites):
        self.sites = sites

    def _count(self, node, kind):
        self.generic_visit(node)
        index = self.sites[(node.lineno, node.col_offset)]
        bump = ast.parse(f"{COUNTERS}[{index}] += 1").body[0]
        node.body.insert(0, bump)
        return node

    def visit_For(self, node):
        return self._count(node, "for")

    def visit_AsyncFor(self, node):
        return self._count(node, "for")

    def visit_While(self, node):
        return self._count(node, "while")


def instrument(source):
    tree = ast.parse(source)
    loops = [n for n in ast.walk(tree) if isinstance(n, (ast.For, ast.AsyncFor, ast.While))]
    loops.sort(key=lambda n: (n.lineno, n.col_offset))
    sites = {(n.lineno, n.col_offset): i for i, n in enumerate(loops)}
    table = [
        {"id": f"L{i + 1}", "line": n.lineno, "kind": "while" if isinstance(n, ast.While) else "for"}
        for i, n in enumerate(loops)
    ]
    tree = _Instrument(sites).visit(tree)
    ast.fix_missing_locations(tree)
    return tree, table


def disable_network():
    import socket

    def refuse(*_a, **_k):
        raise OSError("network disabled in sandbox")

    socket.socket.connect = refuse
    socket.socket.connect_ex = refuse
    socket.create_connection = refuse
    socket.getaddrinfo = refuse


def limit_memory(mb):
    try:
        with open("/proc/self/statm") as f:
            pages = int(f.read().split()[0])
        base = pages * os.sysconf("SC_PAGE_SIZE")
        cap = base + mb * 1024 * 1024
        resource.setrlimit(resource.RLIMIT_AS, (cap, cap))
    except (OSError, ValueError):
        pass


def resolve_entry(g, entry):
    if "." in entry:
        cls_name, meth = entry.split(".", 1)
        return getattr(g[cls_name](), meth)
    return g[entry]


def run_child(job, wfd):
    limits = job.get("limits") or {}
    timeout_ms = int(limits.get("timeout_ms", 10000))
    limit_memory(int(limits.get("memory_mb", 512)))
    if not limits.get("network", False):
        disable_network()

    out_f = tempfile.TemporaryFile()
    err_f = tempfile.TemporaryFile()
    os.dup2(out_f.fileno(), 1)
    os.dup2(err_f.fileno(), 2)
    sys.stdout = io.TextIOWrapper(os.fdopen(1, "wb", closefd=False), encoding="utf-8", write_through=True)
    sys.stderr = io.TextIOWrapper(os.fdopen(2, "wb", closefd=False), encoding="utf-8", write_through=True)

    kind = job["kind"]
    run_kind = job.get("traced", "call") if kind == "trace" else kind
    payload = job.get("payload") or ""
    if run_kind == "stdin_run":
        in_f = tempfile.TemporaryFile()
        in_f.write(payload.encode("utf-8"))
        in_f.seek(0)
        os.dup2(in_f.fileno(), 0)
    else:
        os.dup2(os.open(os.devnull, os.O_RDONLY), 0)
    sys.stdin = io.TextIOWrapper(os.fdopen(0, "rb", closefd=False), encoding="utf-8")

    result = {"id": job.get("id"), "status": "value", "value_repr": None, "exception_type": None,
              "detail": "", "phase": "load", "loop_counts": None, "sites": None}
    counts = None
    g = {"__name__": "__main__" if run_kind == "stdin_run" else "__subject__", "__builtins__": __builtins__}

    def on_alarm(_sig, _frame):
        raise _SoftTimeout()

    signal.signal(signal.SIGALRM, on_alarm)
    start = time.monotonic()
    try:
        if kind == "trace":
            tree, table = instrument(job["source"])
            counts = [0] * len(table)
            g[COUNTERS] = counts
            result["sites"] = table
            code = compile(tree, "<subject>", "exec")
        else:
            code = compile(job["source"], "<subject>", "exec")
        signal.setitimer(signal.ITIMER_REAL, timeout_ms / 1000.0)
        try:
            if run_kind == "stdin_run":
                result["phase"] = "run"
                try:
                    exec(code, g)
                except SystemExit as e:
                    if e.code not in (None, 0):
                        raise
                result["value_repr"] = "None"
            else:
                exec(code, g)
                result["phase"] = "run"
                if run_kind == "call":
                    fn = resolve_entry(g, job["entry_point"])
                    args, kwargs = eval("(lambda *a, **k: (a, k))(" + payload + ")", dict(g))
                    result["value_repr"] = render(fn(*args, **kwargs))
                else:
                    exec(compile(payload, "<test>", "exec"), g)
                    result["value_repr"] = "None"
        finally:
            signal.setitimer(signal.ITIMER_REAL, 0)
    except _SoftTimeout:
        result["status"] = "timeout"
        result["detail"] = "soft limit"
    except MemoryError:
        result["status"] = "resource_kill"
        result["detail"] = "memory limit"
    except RecursionError as e:
        result["status"] = "exception"
        result["exception_type"] = "RecursionError"
        result["detail"] = str(e)[:500]
    except BaseException as e:  # noqa: B036 - user code may raise anything
        result["status"] = "exception"
        result["exception_type"] = type(e).__name__
        result["detail"] = str(e)[:500]
    result["wall_time_ms"] = (time.monotonic() - start) * 1000.0
    if result["status"] != "value":
        result["value_repr"] = None
    if counts is not None:
        result["loop_counts"] = {site["id"]: counts[i] for i, site in enumerate(result["sites"])}

    try:
        sys.stdout.flush()
        sys.stderr.flush()
    except Exception:
        pass
    out_f.seek(0)
    err_f.seek(0)
    result["stdout"] = out_f.read().decode("utf-8", "replace")
    result["stderr"] = err_f.read().decode("utf-8", "replace")[-4000:]
    data = json.dumps(result).encode("utf-8")
    view = memoryview(data)
    while view:
        n = os.write(wfd, view)
        view = view[n:]
    os.close(wfd)
    os._exit(0)


def run_job(job):
    timeout_ms = int((job.get("limits") or {}).get("timeout_ms", 10000))
    rfd, wfd = os.pipe()
    pid = os.fork()
    if pid == 0:
        os.close(rfd)
        try:
            run_child(job, wfd)
        finally:
            os._exit(3)
    os.close(wfd)
    deadline = time.monotonic() + timeout_ms / 1000.0 + 0.5
    chunks = []
    timed_out = False
    while True:
        left = deadline - time.monotonic()
        if left <= 0:
            timed_out = True
            break
        ready, _, _ = select.select([rfd], [], [], left)
        if not ready:
            continue
        chunk = os.read(rfd, 65536)
        if not chunk:
            break
        chunks.append(chunk)
    os.close(rfd)
    if timed_out:
        os.kill(pid, signal.SIGKILL)
    _, status = os.waitpid(pid, 0)
    if timed_out:
        return {"id": job.get("id"), "status": "timeout", "detail": "killed at deadline",
                "wall_time_ms": float(timeout_ms), "stdout": "", "stderr": ""}
    if chunks:
        try:
            return json.loads(b"".join(chunks).decode("utf-8"))
        except ValueError:
            pass
    detail = "child died"
    if os.WIFSIGNALED(status):
        detail = f"killed by signal {os.WTERMSIG(status)}"
    return {"id": job.get("id"), "status": "resource_kill", "detail": detail, "stdout": "", "stderr": ""}


def check_job(job):
    if not isinstance(job, dict):
        return "job is not an object"
    if job.get("kind") not in KINDS:
        return "unknown job kind"
    if not isinstance(job.get("source"), str):
        return "source must be a string"
    if not isinstance(job.get("payload", ""), str):
        return "payload must be a string"
    run_kind = job.get("traced", "call") if job["kind"] == "trace" else job["kind"]
    if run_kind not in ("call", "stdin_run", "test"):
        return "unknown traced kind"
    if run_kind == "call" and not isinstance(job.get("entry_point"), str):
        return "call job needs entry_point"
    return None


def read_message():
    line = _in.readline()
    if not line:
        return None
    if line.startswith("@"):
        n = int(line[1:].strip() or 0)
        return _in.read(n)
    return line


def main():
    for module in filter(None, os.environ.get("REASONBENCH_SHIM_PRELOAD", "").split(",")):
        try:
            __import__(module)
        except Exception:
            pass
    send(PROTOCOL)
    while True:
        msg = read_message()
        if msg is None:
            return
        if not msg.strip():
            continue
        try:
            job = json.loads(msg)
        except ValueError:
            send({"id": None, "status": "protocol_error", "detail": "job is not JSON"})
            continue
        problem = check_job(job)
        if problem:
            send({"id": job.get("id") if isinstance(job, dict) else None, "status": "protocol_error",
                  "detail": problem})
            continue
        result = run_job(job)
        result["id"] = job.get("id")
        send(result)


if __name__ == "__main__":
    main()
