"""Command-line entry point.

Subcommands: synth, train, eval, classify, detect, run, receive. Frames come
from files rather than a camera so every run is reproducible; a live capture
adapter is a documented extension point. GC_LOG_LEVEL (error|info|debug)
controls stderr verbosity.
"""

from __future__ import annotations

import argparse
import logging
import os
import queue
import sys
import threading
import time

import numpy as np

from . import announce, classifier, pipeline, synth
from .imaging import read_pnm, write_pnm
from .handgeom import draw_overlay
from .segmentation import DEFAULT_SKIN_MODEL, HandNotFound, SkinModel, load_skin_model

log = logging.getLogger("gesturecare")


def _setup_logging() -> None:
    level = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}.get(
        os.environ.get("GC_LOG_LEVEL", "error"), logging.ERROR
    )
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def _parse_size(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise argparse.ArgumentTypeError(f"size must look like 320x240, got {text!r}") from None


def _parse_dest(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise argparse.ArgumentTypeError(f"dest must look like host:port, got {text!r}")
    return host, int(port)


def _skin(args) -> SkinModel:
    return load_skin_model(args.skin) if getattr(args, "skin", None) else DEFAULT_SKIN_MODEL


def _registry(args) -> pipeline.GestureRegistry:
    if getattr(args, "gestures", None):
        return pipeline.load_registry(args.gestures)
    return pipeline.default_registry()


def _corpus_features(corpus_dir, skin_model):
    """Feature vectors and labels for every frame with a detectable hand."""
    vecs, labels, skipped = [], [], 0
    for entry in synth.load_corpus(corpus_dir):
        try:
            vec, _, _ = pipeline.frame_features(entry.load_image(), skin_model)
        except HandNotFound:
            skipped += 1
            log.warning("no hand in %s, skipping", entry.filename)
            continue
        vecs.append(vec)
        labels.append(entry.label)
    if skipped:
        log.warning("%d frames skipped (no hand found)", skipped)
    return vecs, labels


def cmd_synth(args) -> int:
    samples = synth.generate_corpus(args.seed, args.per_class, args.size)
    synth.save_corpus(samples, args.out)
    print(f"wrote {len(samples)} frames to {args.out}")
    return 0


def cmd_train(args) -> int:
    skin_model = _skin(args)
    vecs, labels = _corpus_features(args.data, skin_model)
    if not vecs:
        print("error: no usable frames in the corpus", file=sys.stderr)
        return 1
    n_classes = max(labels) + 1
    cfg = classifier.TrainConfig(
        learning_rate=args.lr,
        epochs=args.epochs,
        batch_size=args.batch,
        seed=args.seed,
        target_loss=args.target_loss,
    )
    net, losses = classifier.train(
        list(zip(vecs, labels)), [len(vecs[0]), args.hidden, n_classes], cfg
    )
    classifier.write_model(args.model, net)
    preds = [int(np.argmax(classifier.mlp_forward(net, v))) for v in vecs]
    acc = sum(p == t for p, t in zip(preds, labels)) / len(labels)
    print(f"loss {losses[-1]:.6f}")
    print(f"accuracy {acc:.4f}")
    return 0


def cmd_eval(args) -> int:
    skin_model = _skin(args)
    vecs, labels = _corpus_features(args.data, skin_model)
    if not vecs:
        print("error: no usable frames in the corpus", file=sys.stderr)
        return 1
    if args.baseline:
        if not args.exemplars:
            print("error: --baseline needs --exemplars DIR", file=sys.stderr)
            return 2
        ex_vecs, ex_labels = _corpus_features(args.exemplars, skin_model)
        db = classifier.ExemplarDb(
            hists=np.asarray([v[:36] for v in ex_vecs]), labels=np.asarray(ex_labels)
        )
        preds = [classifier.nn_match(db, v[:36])[0] for v in vecs]
    else:
        net = classifier.read_model(args.model)
        preds = [int(np.argmax(classifier.mlp_forward(net, v))) for v in vecs]
    acc = sum(p == t for p, t in zip(preds, labels)) / len(labels)
    print(f"accuracy {acc:.4f}")
    return 0


def cmd_classify(args) -> int:
    net = classifier.read_model(args.model)
    registry = _registry(args)
    thresholds = pipeline.Thresholds()
    try:
        vec, _, _ = pipeline.frame_features(read_pnm(args.image), _skin(args))
    except HandNotFound:
        print("no-hand")
        return 0
    probs = classifier.mlp_forward(net, vec)
    label = int(np.argmax(probs))
    conf = float(probs[label])
    cls = registry.get(label)
    if conf < thresholds.conf_reject or cls is None:
        print(pipeline.WRONG_GESTURE_FEEDBACK)
        return 0
    print(f"{label} {cls.name} {conf:.3f}")
    return 0


def cmd_detect(args) -> int:
    frame = read_pnm(args.image)
    try:
        _, geom, bbox = pipeline.frame_features(frame, _skin(args))
    except HandNotFound:
        print("no-hand")
        return 0
    overlay = draw_overlay(frame, geom, offset=(bbox[0], bbox[1]))
    write_pnm(args.overlay, overlay)
    print(f"tips {len(geom.fingertips)}")
    for tip in geom.fingertips:
        print(f"tip r={tip.r:.2f} theta={tip.theta:.2f}")
    return 0


def _sender_loop(q, dest, policy, spool, results):
    while True:
        item = q.get()
        if item is None:
            return
        result = announce.send_with_retry(dest, item, policy, spool_path=spool)
        results.append(result)


def cmd_run(args) -> int:
    net = classifier.read_model(args.model)
    registry = _registry(args)
    skin_model = _skin(args)
    frames = sorted(
        f for f in os.listdir(args.frames) if f.endswith((".ppm", ".pgm", ".pnm"))
    )
    if not frames:
        print("error: no frames found", file=sys.stderr)
        return 1

    policy = announce.DEFAULT_RETRY_POLICY
    results: list = []
    if args.spool and os.path.exists(args.spool) and os.path.getsize(args.spool) > 0:
        delivered, failed = announce.replay_spool(args.dest, args.spool, policy)
        log.info("spool replay: %d delivered, %d still failing", delivered, failed)
        if failed:
            results.append(announce.Failed(cause="connect", spooled_to=args.spool))

    # frame processing never blocks on the network: emissions cross a bounded
    # queue, and on overflow the oldest unsent event is dropped with a warning
    q: queue.Queue = queue.Queue(maxsize=16)
    sender = threading.Thread(
        target=_sender_loop, args=(q, args.dest, policy, args.spool, results), daemon=True
    )
    sender.start()

    state = pipeline.PipelineState()
    seq = 0
    period = 1.0 / args.fps if args.fps else 0.0
    for name in frames:
        started = time.monotonic()
        frame = read_pnm(os.path.join(args.frames, name))
        state, outcome = pipeline.process_frame(state, registry, net, skin_model, frame)
        if isinstance(outcome, pipeline.NoHand):
            print(f"{name} no-hand")
        elif isinstance(outcome, pipeline.Tracking):
            print(f"{name} tracking {outcome.label} {outcome.confidence:.3f}")
        elif isinstance(outcome, pipeline.Rejected):
            print(f"{name} rejected {outcome.reason} ({outcome.feedback})")
        elif isinstance(outcome, pipeline.Emitted):
            print(f"{name} emitted {outcome.label} {outcome.confidence:.3f}")
            seq += 1
            event = announce.Announcement(
                seq=seq,
                ts=announce.utc_now_iso(),
                patient=args.patient,
                gesture=outcome.label,
                conf=outcome.confidence,
                msg=outcome.message,
            )
            try:
                q.put_nowait(event)
            except queue.Full:
                dropped = q.get_nowait()
                log.warning("send queue full, dropping seq=%d", dropped.seq)
                q.put_nowait(event)
        if period:
            elapsed = time.monotonic() - started
            if elapsed < period:
                time.sleep(period - elapsed)
    q.put(None)
    sender.join()
    failures = [r for r in results if isinstance(r, announce.Failed)]
    if failures:
        log.error("%d announcement(s) failed; spool %s", len(failures), args.spool)
        return 1
    return 0


def cmd_receive(args) -> int:
    try:
        announce.serve(args.port, args.log)
    except announce.PortInUse as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gesturecare")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a labeled synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--per-class", type=int, default=10, dest="per_class")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=_parse_size, default=(320, 240))
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("train", help="train the gesture classifier on a corpus")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--target-loss", type=float, default=0.01, dest="target_loss")
    p.add_argument("--skin")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="measure accuracy on a corpus")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--baseline", action="store_true", help="histogram nearest-neighbor instead of the net")
    p.add_argument("--exemplars", help="corpus dir providing the baseline's stored exemplars")
    p.add_argument("--skin")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("classify", help="classify one frame")
    p.add_argument("--model", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--gestures")
    p.add_argument("--skin")
    p.set_defaults(fn=cmd_classify)

    p = sub.add_parser("detect", help="fingertip overlay for one frame")
    p.add_argument("--image", required=True)
    p.add_argument("--overlay", required=True)
    p.add_argument("--skin")
    p.set_defaults(fn=cmd_detect)

    p = sub.add_parser("run", help="stream frames through the pipeline and announce")
    p.add_argument("--model", required=True)
    p.add_argument("--frames", required=True)
    p.add_argument("--dest", type=_parse_dest, required=True)
    p.add_argument("--patient", required=True)
    p.add_argument("--gestures")
    p.add_argument("--skin")
    p.add_argument("--fps", type=float, default=0.0)
    p.add_argument("--spool", default="announce.spool")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("receive", help="run the announcement receiver daemon")
    p.add_argument("--port", type=int, default=announce.DEFAULT_PORT)
    p.add_argument("--log", required=True)
    p.set_defaults(fn=cmd_receive)

    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
