"""Thin command-line client over the service layer.

Reads a JSON config (the service request schema plus "task" and
"output_dir"), runs the task either in-process or against a remote service
(--url), and writes the CSV/binary artifacts.
"""

from __future__ import annotations

import argparse
import json
import sys
import urllib.request
from pathlib import Path

from pydantic import ValidationError

TASKS = ("solve", "mie-check", "reciprocity", "cond-sweep",
         "counterexample", "near-field")

EXIT_OK = 0
EXIT_BAD_CONFIG = 2
EXIT_INFEASIBLE = 3


def _run_local(task: str, payload: dict):
    from . import service

    req = service.REQUEST_TYPES[task](**payload)
    return service.HANDLERS[task](req).model_dump()


def _run_remote(task: str, payload: dict, url: str):
    body = json.dumps(payload).encode()
    req = urllib.request.Request(f"{url.rstrip('/')}/{task}", data=body,
                                 headers={"Content-Type": "application/json"})
    with urllib.request.urlopen(req) as resp:
        return json.loads(resp.read().decode())


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v) -> str:
    if isinstance(v, float):
        if v == float("-inf"):
            return "-inf"
        return f"{v:.17g}"
    return str(v)


def _write_artifacts(task: str, result: dict, outdir: Path) -> list[str]:
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    if task == "solve":
        path = outdir / "rcs.csv"
        _write_csv(path, ["theta_deg", "sigma_HH_dB", "sigma_VV_dB"],
                   zip(result["theta_deg"], result["sigma_hh_db"],
                       result["sigma_vv_db"]))
        written.append(str(path))
        if result.get("coefficients"):
            import numpy as np

            from .driver import _MAGIC  # same layout as dump_solution
            import struct
            coeffs = np.array([complex(re, im) for re, im in result["coefficients"]])
            n = result["n"]
            path = outdir / "solution.bin"
            with open(path, "wb") as fh:
                fh.write(_MAGIC)
                fh.write(struct.pack("<II", 1, n))
                fh.write(coeffs.astype(np.complex128).tobytes())
            written.append(str(path))
    elif task == "mie-check":
        path = outdir / "errors.csv"
        _write_csv(path, ["n", "err"],
                   ((r["n"], r["err"]) for r in result["rows"]))
        written.append(str(path))
    elif task == "reciprocity":
        path = outdir / "errors.csv"
        _write_csv(path, ["n", "err"], [(result["n"], result["err_rp"])])
        written.append(str(path))
    elif task == "cond-sweep":
        path = outdir / "sweep.csv"
        _write_csv(path, ["omega", "kappa_stab", "kappa_unstab"],
                   ((r["omega"], r["kappa_stab"], r["kappa_unstab"])
                    for r in result["rows"]))
        written.append(str(path))
    elif task == "counterexample":
        path = outdir / "counterexample.json"
        path.write_text(json.dumps(result, indent=2) + "\n")
        written.append(str(path))
    elif task == "near-field":
        path = outdir / "nearfield.csv"
        header = ["x", "y", "z", "Ex_re", "Ex_im", "Ey_re", "Ey_im",
                  "Ez_re", "Ez_im", "surface_distance"]
        rows = (tuple(p) + tuple(v) + (d,)
                for p, v, d in zip(result["points"], result["values"],
                                   result["surface_distance"]))
        _write_csv(path, header, rows)
        written.append(str(path))
    return written


def _execute(task: str, cfg: dict, url: str | None) -> int:
    outdir = Path(cfg.pop("output_dir", "."))
    cfg.pop("task", None)
    try:
        if url:
            result = _run_remote(task, cfg, url)
        else:
            result = _run_local(task, cfg)
    except ValidationError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    written = _write_artifacts(task, result, outdir)
    for path in written:
        print(f"wrote {path}")
    if task == "solve":
        print(f"constraint residual: {result['constraint_residual']:.3e}")
    elif task == "mie-check":
        for row in result["rows"]:
            print(f"n={row['n']}: ERR_Mie = {row['err']:.3e}")
    elif task == "reciprocity":
        print(f"ERR_RP = {result['err_rp']:.3e}")
    return EXIT_OK


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SystemExit(f"error: cannot read config {path}: {exc}")
    if not isinstance(cfg, dict):
        raise SystemExit("error: config must be a JSON object")
    return cfg


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="emscat",
        description="Surface-integral electromagnetic scattering solver")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the task named in the config")
    run.add_argument("config")
    run.add_argument("--url", help="remote service URL (default: in-process)")

    for task in TASKS:
        sp = sub.add_parser(task, help=f"run the {task} task")
        sp.add_argument("--config", required=True)
        sp.add_argument("--url")

    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)

    args = parser.parse_args(argv)

    if args.command == "serve":
        import uvicorn

        from .service import app
        uvicorn.run(app, host=args.host, port=args.port)
        return EXIT_OK

    cfg = _load_config(args.config)
    if args.command == "run":
        task = cfg.get("task")
        if task not in TASKS:
            print(f"error: config task must be one of {TASKS}", file=sys.stderr)
            return EXIT_BAD_CONFIG
    else:
        task = args.command
    return _execute(task, cfg, args.url)


if __name__ == "__main__":
    sys.exit(main())
