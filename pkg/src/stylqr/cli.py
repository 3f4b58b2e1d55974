"""Command-line entry point: encode, stylize and verify.

Settings come from built-in defaults, then an optional flat ``key = value``
config file, then command-line flags (flags win).
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import optim, qr
from .featnet import FeatureNet, WeightsError, load_weights, vgg_chain
from .imgio import ImageIOError, load_png, save_png, to_rgb
from .scanner import DecodeFailure, degrade, robustness_report, scan

EXIT_OK, EXIT_USAGE, EXIT_CAPACITY, EXIT_DECODE, EXIT_IO = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


def _floats(s):
    return tuple(float(x) for x in str(s).split(",") if x.strip())


def _ints(s):
    return tuple(int(x) for x in str(s).split(",") if x.strip())


def _bool(s):
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _opt_float(s):
    return None if str(s).strip().lower() in ("", "none") else float(s)


# key -> (parser, default). Order is the order of config.echo.
SETTINGS = {
    "version": (int, 5),
    "ec": (str, "H"),
    "mask": (int, 0),
    "module_px": (int, 16),
    "message": (str, None),
    "content": (str, None),
    "style": (str, None),
    "image": (str, None),
    "out": (str, None),
    "eta": (float, 0.6),
    "threshold": (float, 127.5),
    "lambda1": (float, 1e15),
    "lambda2": (float, 1e7),
    "lambda3": (float, 1e20),
    "lr": (float, 0.001),
    "iterations": (int, 10_000),
    "seed": (int, 0),
    "sigma": (_opt_float, None),
    "init": (str, "content"),
    "early_stop": (_bool, False),
    "stop_when_robust": (_bool, False),
    "snapshot_every": (int, 0),
    "widths": (_ints, (16, 32, 64, 128)),
    "weights_manifest": (str, None),
    "weights_blob": (str, None),
    "report_etas": (_floats, (0.0, 0.2, 0.4, 0.6, 0.8)),
    "degrade": (str, None),
}


def read_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc.strerror}") from exc
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        # whole-line comments only, so values may contain '#'
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in SETTINGS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            out[key] = SETTINGS[key][0](value)
        except ValueError as exc:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return out


def _fmt(v):
    if v is None:
        return "none"
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, tuple):
        return ",".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def echo_config(settings: dict) -> str:
    return "".join(f"{k} = {_fmt(settings[k])}\n" for k in SETTINGS if k in settings)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="stylqr", description="Stylized, scan-robust QR codes.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="flat key = value file; flags override it")
        sp.add_argument("--version", type=int, help="QR version 1-5")
        sp.add_argument("--ec", choices=qr.EC_LEVELS, help="error correction level")
        sp.add_argument("--mask", type=int, help="mask pattern 0-7")
        sp.add_argument("--module-px", dest="module_px", type=int, help="pixels per module side")
        sp.add_argument("--message")
        sp.add_argument("--out")
        sp.add_argument("--eta", type=float)
        sp.add_argument("--threshold", type=float)
        sp.add_argument("--sigma", type=_opt_float)
        sp.add_argument("--seed", type=int)

    enc = sub.add_parser("encode", help="render the plain code of a message")
    common(enc)

    sty = sub.add_parser("stylize", help="generate a stylized code")
    common(sty)
    sty.add_argument("--content")
    sty.add_argument("--style")
    sty.add_argument("--lambda1", type=float, help="style weight")
    sty.add_argument("--lambda2", type=float, help="content weight")
    sty.add_argument("--lambda3", type=float, help="code weight")
    sty.add_argument("--lr", type=float)
    sty.add_argument("--iterations", type=int)
    sty.add_argument("--init", choices=("content", "random", "code"))
    sty.add_argument("--early-stop", dest="early_stop", type=_bool)
    sty.add_argument("--stop-when-robust", dest="stop_when_robust", type=_bool)
    sty.add_argument("--snapshot-every", dest="snapshot_every", type=int)
    sty.add_argument("--widths", type=_ints, help="feature widths, e.g. 16,32,64,128")
    sty.add_argument("--weights-manifest", dest="weights_manifest")
    sty.add_argument("--weights-blob", dest="weights_blob")
    sty.add_argument("--report-etas", dest="report_etas", type=_floats)

    ver = sub.add_parser("verify", help="decode an image and report robustness")
    common(ver)
    ver.add_argument("--image")
    ver.add_argument("image_pos", nargs="?", metavar="IMAGE")
    ver.add_argument("--report-etas", dest="report_etas", type=_floats)
    ver.add_argument("--degrade", help="apply kind=param first, e.g. gaussian_blur=1")
    return p


def resolve(args) -> tuple[dict, set]:
    """Effective settings and the keys set explicitly (config file or flag)."""
    settings = {k: d for k, (_, d) in SETTINGS.items()}
    given = set()
    if args.config:
        cfg = read_config(args.config)
        settings.update(cfg)
        given.update(cfg)
    for key in SETTINGS:
        val = getattr(args, key, None)
        if val is not None:
            settings[key] = val
            given.add(key)
    if getattr(args, "image_pos", None):
        settings["image"] = args.image_pos
        given.add("image")
    return settings, given


def _spec(s) -> qr.QrSpec:
    try:
        return qr.QrSpec(s["version"], s["ec"], s["mask"], s["module_px"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _require(s, *keys):
    missing = [k for k in keys if not s.get(k)]
    if missing:
        raise UsageError("missing " + ", ".join("--" + k.replace("_", "-") for k in missing))


def cmd_encode(s, given) -> int:
    _require(s, "out")
    if s["message"] is None:
        raise UsageError("missing --message")
    spec = _spec(s)
    grid = qr.build_code_target(s["message"], spec)
    save_png(s["out"], qr.render(grid, spec))
    print(f"wrote {s['out']} ({spec.side_px}x{spec.side_px}, version {spec.version}-{spec.ec_level})")
    return EXIT_OK


def _feature_net(s):
    manifest, blob = s["weights_manifest"], s["weights_blob"]
    if bool(manifest) != bool(blob):
        raise UsageError("--weights-manifest and --weights-blob go together")
    if manifest:
        bundle = load_weights(manifest, blob)
        try:
            widths = tuple(bundle.kernels[f"conv{b}_1"].shape[0] for b in range(1, 5))
        except KeyError as exc:
            raise WeightsError(f"weights file lacks {exc.args[0]}") from None
        return FeatureNet(vgg_chain(widths), bundle)
    return FeatureNet(vgg_chain(s["widths"]), seed=s["seed"])


def cmd_stylize(s, given) -> int:
    _require(s, "content", "style", "out")
    if s["message"] is None:
        raise UsageError("missing --message")
    spec = _spec(s)
    try:
        cfg = optim.OptimConfig(
            learning_rate=s["lr"], iterations=s["iterations"], eta=s["eta"], threshold=s["threshold"],
            lambdas=(s["lambda1"], s["lambda2"], s["lambda3"]), seed=s["seed"], sigma=s["sigma"],
            snapshot_every=s["snapshot_every"], early_stop=s["early_stop"], init=s["init"],
            stop_when_robust=s["stop_when_robust"])
        cfg.weights  # validates the lambdas
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    content = to_rgb(load_png(s["content"]))
    style = to_rgb(load_png(s["style"]))
    qr.encode_data_codewords(s["message"], spec)  # fail on capacity before building the net
    net = _feature_net(s) if (cfg.lambdas[0] > 0 or cfg.lambdas[1] > 0) else None

    out = Path(s["out"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.echo").write_text(echo_config(s))
    callback = None
    if cfg.snapshot_every > 0:
        (out / "snapshots").mkdir(exist_ok=True)

        def callback(it, image, ev):
            if it % cfg.snapshot_every == 0:
                save_png(out / "snapshots" / f"iter_{it:06d}.png", image)

    res = optim.stylize(content, style, s["message"], spec, cfg, net=net, callback=callback)
    save_png(out / "final.png", res.image)
    (out / "trace.tsv").write_text(res.trace.table())
    # judge the saved (8-bit) image, not the float one
    saved = load_png(out / "final.png")
    report = robustness_report(saved, spec, res.target, s["report_etas"], s["threshold"], s["sigma"])
    (out / "report.tsv").write_text(report.table())
    (out / "report.kv").write_text(report.key_values())
    sys.stdout.write(report.key_values())
    if report.decode_success and report.message == s["message"]:
        return EXIT_OK
    print(f"error: final image does not decode to the message ({report.failure or 'wrong message'})",
          file=sys.stderr)
    return EXIT_DECODE


def _infer_spec(s, given, img):
    """Module size comes from the image side; the version is tried 1-5 unless given."""
    side = img.shape[-1]
    if img.shape[-2] != side:
        raise UsageError(f"image is not square: {img.shape[-2]}x{side}")
    versions = [s["version"]] if "version" in given else range(1, 6)
    fits = []
    for v in versions:
        m = 17 + 4 * v
        if side % m == 0 and side // m >= 4:
            fits.append(qr.QrSpec(v, s["ec"], s["mask"], side // m))
    if not fits:
        raise UsageError(f"{side} px does not match any supported version/module size")
    for spec in fits:
        try:
            scan(img, spec, s["threshold"])
            return spec
        except (DecodeFailure, qr.QrError):
            continue
    return fits[0]


def cmd_verify(s, given) -> int:
    _require(s, "image")
    img = load_png(s["image"])
    if s["degrade"]:
        try:
            kind, param = s["degrade"].split("=")
            img = degrade(img, kind.strip(), float(param))
        except ValueError as exc:
            raise UsageError(f"bad --degrade {s['degrade']!r}: {exc}") from None
    spec = _infer_spec(s, given, img)
    report = robustness_report(img, spec, None, s["report_etas"], s["threshold"], s["sigma"])
    sys.stdout.write(report.table())
    sys.stdout.write(report.key_values())
    if not report.decode_success:
        print(f"error: decode failed: {report.failure}", file=sys.stderr)
        return EXIT_DECODE
    if s["message"] is not None and report.message != s["message"]:
        print(f"error: decoded {report.message!r}, expected {s['message']!r}", file=sys.stderr)
        return EXIT_DECODE
    return EXIT_OK


COMMANDS = {"encode": cmd_encode, "stylize": cmd_stylize, "verify": cmd_verify}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](*resolve(args))
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except qr.CapacityExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except DecodeFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DECODE
    except (ImageIOError, WeightsError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
