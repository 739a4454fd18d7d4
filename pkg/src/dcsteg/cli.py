"""Command-line interface: ``dcsteg <command> ...`` (also ``python -m dcsteg``).

Exit codes: 0 success, 1 usage error, 2 data error.  With ``--json`` a
summary object (see ``schemas/summary.schema.json``) is printed on stdout.

Settings resolve as command-line flag, then environment, then the JSON
config file given by ``--config`` or ``DCSTEG_CONFIG``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .attacks import STOCHASTIC, attack_sources, external_compress, parse_spec
from .codec import (KEY_BYTES, TransmissionHistory, bits_to_bytes,
                    bytes_to_bits, extract, hide, open_payload, payload_widths, seal_payload)
from .dct import PartitionConfig
from .deletion import DEFAULT_K1, DEFAULT_K2, detect_deletions, remap_locations
from .errors import DcstegError
from .frames import IMAGE_DIR, RAW_YUV420, Y4M, discover_sources, write_y4m
from .hashing import MAX_DC, METHODS, truncate
from .index import audit, build_index, hash_video, load, occupancy_csv
from .metrics import (accuracy_csv, array_accuracy, capacity_csv, change_rates, effective_capacity,
                      emit_pdf_curve, fit_gaussian, pdf_csv, to_csv, video_capacities)
from .samples import write_sample_set

log = logging.getLogger("dcsteg")

ENV_KEY_FILE = "DCSTEG_KEY_FILE"
ENV_CONFIG = "DCSTEG_CONFIG"
ENV_THREADS = "DCSTEG_THREADS"
ENV_SEED = "DCSTEG_SEED"

DEFAULTS = {"m": 13, "n": 7, "L": 6, "method": MAX_DC, "threshold": "auto",
            "format": Y4M, "seed": 0, "threads": None}

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with status 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------- settings

class Settings:
    def __init__(self, args: argparse.Namespace):
        self.args = args
        path = getattr(args, "config", None) or os.environ.get(ENV_CONFIG)
        self.file: dict = {}
        if path:
            try:
                self.file = json.loads(Path(path).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise UsageError(f"cannot read config file {path}: {exc}") from exc
            if not isinstance(self.file, dict):
                raise UsageError(f"config file {path} must hold a JSON object")

    def get(self, name: str, env: str | None = None, default=None):
        value = getattr(self.args, name, None)
        if value is not None:
            return value
        if env and os.environ.get(env):
            return os.environ[env]
        if name in self.file:
            return self.file[name]
        return DEFAULTS.get(name, default)

    def require(self, name: str, env: str | None = None):
        value = self.get(name, env)
        if value is None:
            hint = f" (or set {env})" if env else ""
            raise UsageError(f"--{name.replace('_', '-')} is required{hint}")
        return value

    @property
    def seed(self) -> int:
        return int(self.get("seed", ENV_SEED))

    @property
    def threads(self) -> int | None:
        t = self.get("threads", ENV_THREADS)
        return None if t is None else int(t)

    def config(self) -> PartitionConfig:
        T = self.get("threshold")
        T = 0.85 if T in (None, "auto") else float(T)
        return PartitionConfig(int(self.get("m")), int(self.get("n")), int(self.get("L")), T)

    @property
    def calibrate(self) -> bool:
        return self.get("threshold") in (None, "auto")


def read_key(path) -> bytes:
    data = Path(path).read_bytes()
    if len(data) == KEY_BYTES:
        return data
    text = data.strip()
    if len(text) == 2 * KEY_BYTES:
        try:
            return bytes.fromhex(text.decode("ascii"))
        except ValueError:
            pass
    raise UsageError(f"{path}: key must be {KEY_BYTES} raw bytes or {2 * KEY_BYTES} hex digits")


def _sources(st: Settings, directory):
    fmt = st.get("format")
    return discover_sources(directory, fmt, getattr(st.args, "width", None),
                            getattr(st.args, "height", None))


def _write(path, data) -> str:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        path.write_text(data)
    else:
        path.write_bytes(data)
    return str(path)


# ---------------------------------------------------------------- commands

def cmd_samples(st: Settings) -> dict:
    paths = write_sample_set(st.args.output, st.seed)
    return {"outputs": {p.stem: str(p) for p in paths}, "seed": st.seed}


def cmd_keygen(st: Settings) -> dict:
    out = Path(st.args.output)
    if out.exists() and not st.args.force:
        raise UsageError(f"{out} exists; pass --force to overwrite")
    _write(out, os.urandom(KEY_BYTES))
    os.chmod(out, 0o600)
    return {"outputs": {"key": str(out)}}


def cmd_index_build(st: Settings) -> dict:
    sources = _sources(st, st.require("input"))
    method = st.get("method")
    db = build_index(sources, st.config(), method, st.threads, calibrate=st.calibrate)
    out = _write(st.require("output"), db.to_bytes())
    cap = effective_capacity(db, db.config.L)
    return {"outputs": {"index": out},
            "metrics": {"videos": len(db.video_meta), "locations": len(db), "T": db.config.T,
                        "m": db.config.m, "n": db.config.n, "L": db.config.L, "method": method,
                        "effective_capacity": cap.distinct_values,
                        "fingerprint": f"{db.fingerprint():08x}"}}


def cmd_index_audit(st: Settings) -> dict:
    db = load(st.args.index)
    report = audit(db, _sources(st, st.require("input")), st.args.sample, st.seed)
    for loc, want, got in report.mismatches[:20]:
        log.warning("mismatch at %s: indexed %d, recomputed %d", loc, want, got)
    result = {"metrics": {"checked": report.checked, "mismatches": len(report.mismatches),
                          "mismatch_rate": report.mismatch_rate}, "seed": st.seed}
    if report.mismatches:
        result["exit_code"] = EXIT_DATA
        result["error"] = f"{len(report.mismatches)} of {report.checked} locations disagree"
    return result


def cmd_index_stats(st: Settings) -> dict:
    db = load(st.args.index)
    csv_text = occupancy_csv(db)
    outputs = {}
    if st.args.output:
        outputs["csv"] = _write(st.args.output, csv_text)
    elif not st.args.json:
        sys.stdout.write(csv_text)
    occ = db.occupancy()
    return {"outputs": outputs,
            "metrics": {"buckets": int(occ.size), "non_empty": int(np.count_nonzero(occ)),
                        "locations": int(occ.sum()), "max_occupancy": int(occ.max())}}


def cmd_hide(st: Settings) -> dict:
    db = load(st.args.index)
    key = read_key(st.require("key", ENV_KEY_FILE))
    secret = Path(st.args.secret).read_bytes()
    if not secret:
        raise DcstegError(f"{st.args.secret} is empty")
    history = TransmissionHistory.load(st.args.history) if st.args.history else None
    payload, selected = hide(bytes_to_bits(secret), db, history)
    outputs = {"payload": _write(st.args.output, seal_payload(payload, key))}
    if st.args.plaintext:
        outputs["plaintext"] = _write(st.args.plaintext, payload.to_bytes())
    if st.args.history:
        history.save(st.args.history)
        outputs["history"] = st.args.history
    return {"outputs": outputs,
            "metrics": {"segments": payload.S, "padding_zeros": payload.padding_zeros,
                        "aux_bits_per_segment": payload.record_bits,
                        "selected_videos": ";".join(selected)}}


def _default_index(videos: Path):
    candidate = videos / "index.bin"
    if candidate.exists():
        return candidate
    raise UsageError("--index is required (no index.bin next to the videos)")


def cmd_extract(st: Settings) -> dict:
    videos = Path(st.args.videos)
    db = load(st.args.index or _default_index(videos))
    key = read_key(st.require("key", ENV_KEY_FILE))
    payload = open_payload(Path(st.args.payload).read_bytes(), key)
    sources = _sources(st, videos)
    reports = {}
    if not st.args.no_deletion_check:
        for src in sources:
            original = db.video_meta.get(src.id)
            if original is not None and src.frame_count < original:
                reports[src.id] = detect_deletions(list(src.frames()), st.args.k1, st.args.k2,
                                                   original_count=original)
    lost = []
    if reports:
        payload, lost = remap_locations(payload, reports, db.video_meta)
        if lost:
            log.warning("%d segments sat on deleted frames and are unrecoverable", len(lost))
    bits = extract(payload, db, sources, lost)
    out = _write(st.args.output, bits_to_bytes(bits))
    return {"outputs": {"recovered": out},
            "metrics": {"bits": len(bits), "segments": payload.S, "lost_segments": len(lost),
                        "deletions_detected": sum(r.total_deleted for r in reports.values())}}


def cmd_attack(st: Settings) -> dict:
    spec = parse_spec(st.args.spec)
    sources = _sources(st, st.require("input"))
    out_dir = Path(st.args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    failures = {}
    if spec.kind == "external-compress":
        results = external_compress(sources, spec.params["command"])
        attacked = [r.source for r in results if r.ok]
        failures = {r.video_id: r.error or str(r.returncode) for r in results if not r.ok}
    else:
        attacked = attack_sources(sources, spec, st.seed)
    outputs = {}
    for src in attacked:
        path = out_dir / f"{src.id}.y4m"
        write_y4m(path, src.to_array())
        outputs[src.id] = str(path)
    meta = {"spec": str(spec), "seed": st.seed, "stochastic": spec.kind in STOCHASTIC,
            "videos": sorted(outputs), "failures": failures}
    outputs["metadata"] = _write(out_dir / "attack.json", json.dumps(meta, indent=1, sort_keys=True) + "\n")
    result = {"outputs": outputs, "seed": st.seed, "metrics": {"attack": str(spec),
                                                               "failed_videos": len(failures)}}
    if failures:
        result["exit_code"] = EXIT_DATA
        result["error"] = "; ".join(f"{k}: {v}" for k, v in sorted(failures.items()))
    return result


def cmd_eval_capacity(st: Settings) -> dict:
    db = load(st.args.index)
    la = sum(payload_widths(db))
    reports = [effective_capacity(db, db.config.L, la, "dataset")]
    reports += video_capacities(db, la).values()
    text = capacity_csv(reports)
    outputs = {}
    if st.args.output:
        outputs["csv"] = _write(st.args.output, text)
    elif not st.args.json:
        sys.stdout.write(text)
    return {"outputs": outputs,
            "metrics": {"L": db.config.L, "C_E": reports[0].distinct_values, "L_a": la,
                        "C_RE": reports[0].relative}}


def cmd_eval_accuracy(st: Settings) -> dict:
    sources = _sources(st, st.require("input"))
    cfg = st.config()
    methods = st.args.methods or [st.get("method")]
    rows = []
    for method in methods:
        if st.calibrate:
            cfg = build_index(sources, cfg, method, st.threads, calibrate=True).config
        original = np.concatenate([truncate(hash_video(s, cfg, method, st.threads), cfg.L).ravel()
                                   for s in sources])
        for text in st.args.spec:
            spec = parse_spec(text)
            if spec.kind in ("frame-delete", "external-compress"):
                raise UsageError(f"{spec.kind} changes the frame set; use the pipeline command")
            attacked = attack_sources(sources, spec, st.seed)
            got = np.concatenate([truncate(hash_video(s, cfg, method, st.threads), cfg.L).ravel()
                                  for s in attacked])
            params = ";".join(f"{k}={v}" for k, v in spec.params.items())
            rows.append((spec.kind, params, f"{cfg.m}x{cfg.n}", method, st.seed,
                         array_accuracy(original, got)))
    text = accuracy_csv(rows)
    outputs = {}
    if st.args.output:
        outputs["csv"] = _write(st.args.output, text)
    elif not st.args.json:
        sys.stdout.write(text)
    return {"outputs": outputs, "seed": st.seed,
            "metrics": {f"{r[0]}[{r[1]}]/{r[3]}": r[5] for r in rows}}


def cmd_eval_model(st: Settings) -> dict:
    sources = _sources(st, st.require("input"))
    cfg = st.config()
    spec = parse_spec(st.args.spec)
    attacked = attack_sources(sources, spec, st.seed)
    r1, r2, excluded = [], [], 0
    for a, b in zip(sources, attacked):
        rs = change_rates(a.frames(), b.frames(), cfg)
        r1.append(rs.rate1)
        r2.append(rs.rate2)
        excluded += rs.excluded_count
    fit1, fit2 = fit_gaussian(np.concatenate(r1)), fit_gaussian(np.concatenate(r2))
    lo = min(fit1.mu - 6 * fit1.sigma, fit2.mu - 6 * fit2.sigma)
    hi = max(fit1.mu + 6 * fit1.sigma, fit2.mu + 6 * fit2.sigma)
    curves = {"rate1": emit_pdf_curve(fit1, (lo, hi), st.args.steps),
              "rate2": emit_pdf_curve(fit2, (lo, hi), st.args.steps)}
    fits_text = to_csv(["series", "mu", "sigma", "n", "excluded", "attack", "seed"],
                       [("rate1", fit1.mu, fit1.sigma, fit1.n, excluded, str(spec), st.seed),
                        ("rate2", fit2.mu, fit2.sigma, fit2.n, excluded, str(spec), st.seed)])
    outputs = {}
    if st.args.output:
        outputs["pdf_csv"] = _write(st.args.output, pdf_csv(curves))
    if st.args.fits:
        outputs["fits_csv"] = _write(st.args.fits, fits_text)
    if not outputs and not st.args.json:
        sys.stdout.write(fits_text)
    return {"outputs": outputs, "seed": st.seed,
            "metrics": {"mu_rate1": fit1.mu, "sigma_rate1": fit1.sigma,
                        "mu_rate2": fit2.mu, "sigma_rate2": fit2.sigma,
                        "n_rate1": fit1.n, "n_rate2": fit2.n, "excluded": excluded}}


def cmd_pipeline(st: Settings) -> dict:
    from .pipeline import pipeline_demo

    key = read_key(st.require("key", ENV_KEY_FILE))
    secret = Path(st.args.secret).read_bytes()
    if not secret:
        raise DcstegError(f"{st.args.secret} is empty")
    report = pipeline_demo(st.require("input"), secret, key, st.config(), st.get("method"),
                           st.args.attack, st.seed, st.calibrate, st.threads,
                           fmt=st.get("format"))
    outputs = {}
    if st.args.out_dir:
        d = Path(st.args.out_dir)
        outputs = {
            "index": _write(d / "index.bin", report.index.to_bytes()),
            "payload_plain": _write(d / "payload.plain", report.payload.to_bytes()),
            "payload": _write(d / "payload.enc", report.sealed),
            "recovered": _write(d / "recovered.bin", report.recovered),
            "report_csv": _write(d / "report.csv", report.to_csv()),
            "report": _write(d / "report.txt", report.text()),
        }
    if not st.args.json:
        sys.stdout.write(report.text())
    return {"outputs": outputs, "seed": st.seed, "metrics": report.summary()}


# ---------------------------------------------------------------- parser

def _common() -> argparse.ArgumentParser:
    # SUPPRESS keeps subcommand copies from clobbering values given before the subcommand
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--json", action="store_true", default=argparse.SUPPRESS,
                   help="print a JSON summary on stdout")
    g.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                   help="worker threads (default: available parallelism)")
    g.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                   help="seed for stochastic steps (recorded in outputs)")
    g.add_argument("--config", default=argparse.SUPPRESS, help="JSON config file")
    g.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS)
    return p


def _grid(p):
    p.add_argument("-m", type=int, help="blocks per row (default 13)")
    p.add_argument("-n", type=int, help="blocks per column (default 7)")
    p.add_argument("-L", type=int, help="hash bits per block, 1..15 (default 6)")
    p.add_argument("--threshold", help="'auto' (calibrate on the input) or a value in (0, 1)")


def _inputs(p, flag="--input", required=True):
    p.add_argument(flag, required=required, dest=flag.lstrip("-"))
    p.add_argument("--format", choices=[Y4M, RAW_YUV420, IMAGE_DIR])
    p.add_argument("--width", type=int, help="frame width for raw yuv")
    p.add_argument("--height", type=int, help="frame height for raw yuv")


def build_parser() -> Parser:
    common = _common()
    parser = Parser(prog="dcsteg", parents=[common],
                    description="Coverless video hiding by maximum-DC block hashing.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    def leaf(container, name, fn, **kw):
        p = container.add_parser(name, parents=[common], **kw)
        p.set_defaults(func=fn, cmd_name=name)
        return p

    p = leaf(sub, "samples", cmd_samples, help="write the bundled synthetic videos")
    p.add_argument("-o", "--output", required=True)

    p = leaf(sub, "keygen", cmd_keygen, help="create a random 256-bit key file")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--force", action="store_true")

    idx = sub.add_parser("index", help="build, audit or inspect an index")
    isub = idx.add_subparsers(dest="index_command", metavar="ACTION", required=True)
    p = leaf(isub, "build", cmd_index_build, help="hash a video directory into an index")
    _inputs(p)
    _grid(p)
    p.add_argument("--method", choices=sorted(METHODS))
    p.add_argument("-o", "--output", required=True)
    p = leaf(isub, "audit", cmd_index_audit, help="recompute indexed hashes from the videos")
    p.add_argument("--index", required=True)
    _inputs(p)
    p.add_argument("--sample", type=int, help="check a random sample of this many locations")
    p = leaf(isub, "stats", cmd_index_stats, help="per-bucket occupancy CSV")
    p.add_argument("--index", required=True)
    p.add_argument("-o", "--output")

    p = leaf(sub, "hide", cmd_hide, help="select carriers for a secret file")
    p.add_argument("--index", required=True)
    p.add_argument("--secret", required=True)
    p.add_argument("--key", help=f"key file (or ${ENV_KEY_FILE})")
    p.add_argument("--history", help="transmission history file, updated in place")
    p.add_argument("--plaintext", help="also write the unencrypted payload here")
    p.add_argument("-o", "--output", required=True)

    p = leaf(sub, "extract", cmd_extract, help="recover a secret from received videos")
    p.add_argument("--payload", required=True)
    p.add_argument("--key", help=f"key file (or ${ENV_KEY_FILE})")
    _inputs(p, "--videos")
    p.add_argument("--index", help="index file (default: <videos>/index.bin)")
    p.add_argument("--no-deletion-check", action="store_true",
                   help="skip frame-deletion detection when frame counts shrank")
    p.add_argument("--k1", type=float, default=DEFAULT_K1)
    p.add_argument("--k2", type=float, default=DEFAULT_K2)
    p.add_argument("-o", "--output", required=True)

    p = leaf(sub, "attack", cmd_attack, help="apply an attack to every video")
    _inputs(p)
    p.add_argument("--spec", required=True, help="e.g. 'gauss-noise:sigma=0.005'")
    p.add_argument("-o", "--output", required=True)

    ev = sub.add_parser("evaluate", help="capacity, accuracy and change-rate model")
    esub = ev.add_subparsers(dest="eval_command", metavar="WHAT", required=True)
    p = leaf(esub, "capacity", cmd_eval_capacity, help="effective capacity table")
    p.add_argument("--index", required=True)
    p.add_argument("-o", "--output")
    p = leaf(esub, "accuracy", cmd_eval_accuracy, help="accuracy matrix over attacks")
    _inputs(p)
    _grid(p)
    p.add_argument("--method", action="append", dest="methods", choices=sorted(METHODS))
    p.add_argument("--spec", action="append", required=True)
    p.add_argument("-o", "--output")
    p = leaf(esub, "model", cmd_eval_model, help="Gaussian fit of DC change rates")
    _model_args(p)
    p = leaf(sub, "model", cmd_eval_model, help="same as 'evaluate model'")
    _model_args(p)

    p = leaf(sub, "pipeline", cmd_pipeline, help="build, hide, attack, extract, score")
    _inputs(p)
    _grid(p)
    p.add_argument("--method", choices=sorted(METHODS))
    p.add_argument("--secret", required=True)
    p.add_argument("--key", help=f"key file (or ${ENV_KEY_FILE})")
    p.add_argument("--attack", help="optional attack spec")
    p.add_argument("--out-dir", help="write index, payload, recovered secret and reports here")
    return parser


def _model_args(p):
    _inputs(p)
    _grid(p)
    p.add_argument("--spec", default="quantize-dct:step=64", help="degradation to model")
    p.add_argument("--steps", type=int, default=1201, help="points per PDF curve")
    p.add_argument("-o", "--output", help="PDF curves CSV")
    p.add_argument("--fits", help="fit parameters CSV")


def load_schema() -> dict:
    return json.loads(resources.files("dcsteg").joinpath("schemas/summary.schema.json").read_text())


def _emit(args, summary: dict) -> None:
    if getattr(args, "json", False):
        sys.stdout.write(json.dumps(summary, sort_keys=True, default=str) + "\n")


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    for name in ("json", "threads", "seed", "config", "verbose"):
        if not hasattr(args, name):
            setattr(args, name, None if name != "json" else False)
    level = logging.WARNING - 10 * min(args.verbose or 0, 2)
    logging.basicConfig(level=level, format="%(levelname)s: %(message)s", stream=sys.stderr)
    command = " ".join(c for c in (args.command, getattr(args, "index_command", None),
                                   getattr(args, "eval_command", None)) if c)
    summary = {"command": command, "status": "ok", "exit_code": EXIT_OK}
    try:
        st = Settings(args)
        result = args.func(st)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"dcsteg: error: {exc}", file=sys.stderr)
        summary.update(status="error", exit_code=EXIT_USAGE, error=str(exc))
        _emit(args, summary)
        return EXIT_USAGE
    except (DcstegError, OSError, ValueError) as exc:
        print(f"dcsteg: {exc}", file=sys.stderr)
        summary.update(status="error", exit_code=EXIT_DATA, error=str(exc))
        _emit(args, summary)
        return EXIT_DATA
    code = result.pop("exit_code", EXIT_OK)
    summary.update(result)
    if code != EXIT_OK:
        summary["status"] = "error"
        summary["exit_code"] = code
        print(f"dcsteg: {summary.get('error', 'failed')}", file=sys.stderr)
    _emit(args, summary)
    return code


def main() -> None:
    sys.exit(run())
