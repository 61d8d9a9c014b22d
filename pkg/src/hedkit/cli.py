"""Pipeline driver: every stage from corpus synthesis to serving.

Exit codes: 0 success, 1 usage error, 2 data error. Outputs are written
to a temp path and renamed into place, so a failing run never leaves a
partial file or directory behind. Seeds resolve flag > config file >
HEDKIT_SEED > 0.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import shutil
import sys

import numpy as np

from . import __version__
from .alignment import parse_alignment_json, Phone, Segmentation, Word
from .corpus import SynthSpec, generate, load_corpus, save_corpus
from .editing import (
    EditCommand,
    apply_edit,
    intensity_sweep,
    load_edit_log,
    session_from_hed,
)
from .errors import HedkitError, InvalidInput
from .hed import extract, load_hed, mean_abs_diff, save_hed
from .metrics import contour_metrics, write_metrics_csv, write_metrics_json
from .neural import TrainConfig, init_mlp
from .predictor import (
    MULTI_STEP,
    SINGLE_STEP,
    encode,
    eval_predictor,
    load_predictor,
    new_predictor,
    predict,
    save_predictor,
    train_predictor,
)
from .ranker import RankTrainConfig, load_bundle, save_bundle, train_all
from .ranker import EmotionSet
from .renderer import (
    EXTERNAL,
    VA,
    RendererModel,
    aligned_from_ranges,
    build_speaker_table,
    load_renderer,
    new_renderer,
    render,
    save_contour,
    save_renderer,
    train_renderer,
)
from .signal import analyze, extract_segment_features, read_wav


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _atomic_write(path, writer) -> None:
    """writer(tmp_path); the result is renamed onto path afterward."""
    path = os.fspath(path)
    tmp = f"{path}.tmp{os.getpid()}"
    try:
        writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def _atomic_dir(path, builder) -> None:
    """builder(tmp_dir); swaps the finished directory onto path."""
    path = os.fspath(path).rstrip("/") or "."
    tmp = f"{path}.tmp{os.getpid()}"
    shutil.rmtree(tmp, ignore_errors=True)
    try:
        os.makedirs(tmp)
        builder(tmp)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    if os.path.exists(path):
        shutil.rmtree(path)
    os.replace(tmp, path)


def _parse_text(text: str):
    """Comma-separated words, whitespace-separated phone symbols."""
    words = tuple(tuple(chunk.split()) for chunk in text.split(",")
                  if chunk.strip())
    if not words:
        raise InvalidInput("empty text")
    return words


def _seg_from_words(words) -> Segmentation:
    """Placeholder timing (0.1 s per phone); used where only the
    word/phone structure matters."""
    phones = []
    word_objs = []
    t = 0.0
    for wi, word in enumerate(words):
        lo = len(phones)
        start = t
        for sym in word:
            phones.append(Phone(symbol=sym, start_s=t, end_s=t + 0.1,
                                word_index=wi))
            t += 0.1
        word_objs.append(Word(text="w%d" % wi, start_s=start, end_s=t,
                              phone_range=(lo, len(phones))))
    return Segmentation(utterance_span=(0.0, t), words=word_objs,
                        phones=phones)


def _build_parser() -> _Parser:
    parser = _Parser(prog="hedkit", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--seed", type=int, default=None,
                       help="RNG seed (default: config, HEDKIT_SEED, or 0)")
        p.add_argument("--config", default=None,
                       help="INI config file; flags override its values")
        return p

    p = add("gen-corpus", "synthesize a rule-based emotional corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=None, help="item count")
    p.add_argument("--speakers", default=None, help="comma-separated ids")
    p.add_argument("--no-audio", action="store_true")
    p.add_argument("--noise", type=float, default=None,
                   help="hierarchy noise sigma")
    p.add_argument("--independent-frac", type=float, default=None)

    p = add("train-ranker", "fit per-emotion intensity rankers on a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--reg", type=float, default=None)

    p = add("extract-hed", "score hierarchical EDs with trained rankers")
    p.add_argument("--ranker", required=True)
    p.add_argument("--corpus", default=None)
    p.add_argument("--wav", default=None)
    p.add_argument("--align", default=None, help="alignment JSON")
    p.add_argument("--out", required=True)

    p = add("train-predictor", "fit the text-to-ED predictor")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=[MULTI_STEP, SINGLE_STEP], default=None)
    p.add_argument("--hed-dir", default=None,
                   help="train on extracted EDs instead of corpus truth")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--hidden", type=int, default=None)
    p.add_argument("--k", type=int, default=None, help="embedding width")

    p = add("predict", "predict a hierarchical ED from text")
    p.add_argument("--predictor", required=True)
    p.add_argument("--text", required=True,
                   help='phones, e.g. "AA B, K IY N" (commas split words)')
    p.add_argument("--out", required=True)

    p = add("train-renderer", "fit the ED-conditioned prosody renderer")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=[VA, EXTERNAL], default=None)
    p.add_argument("--predictor", default=None,
                   help="embed this trained predictor (va mode)")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--hidden", type=int, default=None)
    p.add_argument("--va-weight", type=float, default=None)

    p = add("render", "render a prosody contour from text + ED")
    p.add_argument("--renderer", required=True)
    p.add_argument("--text", required=True)
    p.add_argument("--hed", required=True)
    p.add_argument("--speaker", default=None)
    p.add_argument("--out", required=True)

    p = add("edit", "apply an edit log to a hierarchical ED")
    p.add_argument("--hed", required=True)
    p.add_argument("--log", required=True, help="JSON-lines edit log")
    p.add_argument("--out", required=True)
    p.add_argument("--text", default=None)
    p.add_argument("--align", default=None)
    p.add_argument("--predictor", default=None,
                   help="needed when the log uses repredict")

    p = add("sweep", "intensity sweep -> contour stats CSV")
    p.add_argument("--renderer", required=True)
    p.add_argument("--hed", required=True)
    p.add_argument("--text", required=True)
    p.add_argument("--emotion", required=True)
    p.add_argument("--level", required=True,
                   choices=["utterance", "word", "phoneme"])
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--values", default=None, help="comma-separated, sorted")
    p.add_argument("--scope", default=None,
                   help='"utterance" or a word index (default: edited scope)')
    p.add_argument("--speaker", default=None)
    p.add_argument("--out", required=True)

    p = add("eval", "ED MAE, predictor accuracy, or renderer distortion")
    p.add_argument("--pred", default=None, help="predicted HED JSON")
    p.add_argument("--gt", default=None, help="reference HED JSON")
    p.add_argument("--corpus", default=None)
    p.add_argument("--predictor", default=None)
    p.add_argument("--renderer", default=None)
    p.add_argument("--teacher-forcing", default=None,
                   choices=["predicted", "ground_truth"])
    p.add_argument("--out", default=None, help="default: stdout")

    p = add("serve", "start the editing HTTP service")
    p.add_argument("--predictor", required=True)
    p.add_argument("--renderer", default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--snapshot-dir", default="snapshots")
    p.add_argument("--ttl", type=float, default=3600.0,
                   help="idle seconds before a session is evicted")

    return parser


def _load_config(args) -> dict:
    path = getattr(args, "config", None)
    if not path:
        return {}
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise _UsageError(f"config file not found: {path}")
    if parser.has_section(args.command):
        return dict(parser[args.command])
    return {}


def _get(args, config, name, builtin, cast=lambda v: v):
    value = getattr(args, name, None)
    if value is not None:
        return value
    key = name.replace("_", "-")
    if key in config:
        return cast(config[key])
    if name in config:
        return cast(config[name])
    return builtin


def _resolve_seed(args, config) -> int:
    if args.seed is not None:
        return args.seed
    if "seed" in config:
        return int(config["seed"])
    env = os.environ.get("HEDKIT_SEED")
    if env is not None:
        return int(env)
    return 0


def _bool_cast(v) -> bool:
    return str(v).strip().lower() in ("1", "true", "yes", "on")


def _cmd_gen_corpus(args, config) -> int:
    seed = _resolve_seed(args, config)
    speakers = _get(args, config, "speakers", None)
    spec = SynthSpec(
        seed=seed,
        n_items=int(_get(args, config, "n", 50, int)),
        speakers=tuple(s.strip() for s in speakers.split(","))
        if speakers else ("spk0", "spk1"),
        hier_noise=float(_get(args, config, "noise", 0.2, float)),
        independent_frac=float(
            _get(args, config, "independent_frac", 0.3, float)),
        with_audio=not (args.no_audio
                        or _bool_cast(config.get("no-audio", False))))
    items = generate(spec)
    _atomic_dir(args.out, lambda d: save_corpus(d, items, spec))
    print(f"wrote {len(items)} items to {args.out}")
    return 0


def _utterance_features(items):
    dataset = {}
    for item in items:
        if item.clip is None:
            raise InvalidInput(
                f"item {item.item_id} has no audio; regenerate the corpus "
                "without --no-audio")
        track = analyze(item.clip)
        feats = extract_segment_features(track, *item.seg.utterance_span)
        dataset.setdefault(item.label, []).append(feats.values)
    return dataset


def _cmd_train_ranker(args, config) -> int:
    spec, items = load_corpus(args.corpus)
    dataset = _utterance_features(items)
    cfg = RankTrainConfig(
        reg_lambda=float(_get(args, config, "reg", 1e-3, float)),
        epochs=int(_get(args, config, "epochs", 60, int)),
        learning_rate=float(_get(args, config, "lr", 0.5, float)),
        seed=_resolve_seed(args, config))
    models = train_all(dataset, emotions=spec.emotions, cfg=cfg)
    _atomic_write(args.out, lambda p: save_bundle(models, p))
    print(f"trained {len(models)} rankers -> {args.out}")
    return 0


def _cmd_extract_hed(args, config) -> int:
    models = load_bundle(args.ranker)
    emotions = EmotionSet(labels=tuple(sorted(models)))
    if args.corpus and (args.wav or args.align):
        raise _UsageError("use either --corpus or --wav/--align, not both")
    if args.corpus:
        _, items = load_corpus(args.corpus)

        def build(d):
            for item in items:
                if item.clip is None:
                    raise InvalidInput(f"item {item.item_id} has no audio")
                track = analyze(item.clip)
                hed = extract(track, item.seg, models, emotions)
                save_hed(hed, os.path.join(d, f"{item.item_id}.json"))

        _atomic_dir(args.out, build)
        print(f"extracted {len(items)} EDs -> {args.out}")
        return 0
    if not (args.wav and args.align):
        raise _UsageError("need --corpus, or both --wav and --align")
    clip = read_wav(args.wav)
    seg = parse_alignment_json(args.align)
    hed = extract(analyze(clip), seg, models, emotions)
    _atomic_write(args.out, lambda p: save_hed(hed, p))
    print(f"extracted ED -> {args.out}")
    return 0


def _load_hed_dir(path, items):
    pairs = []
    for item in items:
        hed = load_hed(os.path.join(path, f"{item.item_id}.json"))
        pairs.append((item.words, hed))
    return pairs


def _cmd_train_predictor(args, config) -> int:
    spec, items = load_corpus(args.corpus)
    seed = _resolve_seed(args, config)
    if args.hed_dir or config.get("hed-dir"):
        data = _load_hed_dir(args.hed_dir or config["hed-dir"], items)
    else:
        data = [(item.words, item.hed) for item in items]
    pred = new_predictor(
        spec.inventory,
        mode=_get(args, config, "mode", MULTI_STEP),
        emotions=spec.emotions,
        k=int(_get(args, config, "k", 16, int)),
        hidden=int(_get(args, config, "hidden", 24, int)),
        seed=seed)
    cfg = TrainConfig(
        learning_rate=float(_get(args, config, "lr", 0.1, float)),
        epochs=int(_get(args, config, "epochs", 200, int)),
        seed=seed)
    train_predictor(pred, data, cfg)
    _atomic_write(args.out, lambda p: save_predictor(pred, p))
    print(f"trained {pred.mode} predictor on {len(data)} items -> {args.out}")
    return 0


def _cmd_predict(args, config) -> int:
    pred = load_predictor(args.predictor)
    words = _parse_text(args.text)
    hed = predict(pred, encode(pred.table, words))
    _atomic_write(args.out, lambda p: save_hed(hed, p))
    print(f"predicted ED for {len(words)} words -> {args.out}")
    return 0


def _cmd_train_renderer(args, config) -> int:
    spec, items = load_corpus(args.corpus)
    seed = _resolve_seed(args, config)
    mode = _get(args, config, "mode", VA)
    hidden = int(_get(args, config, "hidden", 24, int))
    predictor_path = args.predictor or config.get("predictor")
    if predictor_path:
        if mode != VA:
            raise _UsageError("--predictor only applies to va mode")
        pred = load_predictor(predictor_path)
        speakers = build_speaker_table(spec.speakers, seed=seed + 10)
        e3 = 3 * spec.emotions.size
        model = RendererModel(
            mode=VA, emotions=spec.emotions, speakers=speakers,
            predictor=pred,
            prosody_net=init_mlp(
                [pred.table.k + e3 + speakers.s, hidden, 3],
                ["tanh", "identity"], seed=seed + 12))
    else:
        model = new_renderer(spec.inventory, spec.speakers, mode=mode,
                             emotions=spec.emotions, hidden=hidden, seed=seed)
    data = [(it.words, it.hed, it.contour, it.speaker_id) for it in items]
    cfg = TrainConfig(
        learning_rate=float(_get(args, config, "lr", 0.05, float)),
        epochs=int(_get(args, config, "epochs", 300, int)),
        seed=seed)
    weight = float(_get(args, config, "va_weight", 1.0, float))
    _, history = train_renderer(model, data, cfg, va_loss_weight=weight)
    _atomic_write(args.out, lambda p: save_renderer(model, p))
    print(f"trained {mode} renderer (final prosody MSE "
          f"{history['prosody'][-1]:.5f}) -> {args.out}")
    return 0


def _cmd_render(args, config) -> int:
    model = load_renderer(args.renderer)
    words = _parse_text(args.text)
    hed = load_hed(args.hed)
    enc = encode(model.table, words)
    aligned = aligned_from_ranges(hed, enc.word_phone_ranges)
    speaker = args.speaker or model.speakers.ids[0]
    contour = render(model, enc, aligned, speaker)
    _atomic_write(args.out, lambda p: save_contour(contour, p))
    print(f"rendered {len(contour)} phones -> {args.out}")
    return 0


def _session_for_cli(args, hed):
    predictor = load_predictor(args.predictor) if args.predictor else None
    enc = None
    seg = None
    words = None
    if args.text:
        words = _parse_text(args.text)
        if predictor is not None:
            enc = encode(predictor.table, words)
        else:
            seg = _seg_from_words(words)
    elif getattr(args, "align", None):
        seg = parse_alignment_json(args.align)
    else:
        raise _UsageError("need --text or --align for the word structure")
    return session_from_hed(hed, enc=enc, seg=seg, words=words,
                            predictor=predictor)


def _cmd_edit(args, config) -> int:
    hed = load_hed(args.hed)
    session = _session_for_cli(args, hed)
    for _, cmd in load_edit_log(args.log):
        apply_edit(session, cmd)
    _atomic_write(args.out, lambda p: save_hed(session.current, p))
    print(f"applied {len(session.log)} edits -> {args.out}")
    return 0


def _cmd_sweep(args, config) -> int:
    model = load_renderer(args.renderer)
    words = _parse_text(args.text)
    hed = load_hed(args.hed)
    enc = encode(model.table, words)
    session = session_from_hed(hed, enc=enc, words=words)
    template = EditCommand(level=args.level, index=args.index,
                           emotion=args.emotion, value=0.0)
    raw = _get(args, config, "values", "0,0.25,0.5,0.75,1")
    values = [float(v) for v in str(raw).split(",") if v.strip()]
    scope = _get(args, config, "scope", None)
    if scope is None:
        if args.level == "word":
            scope = args.index
        elif args.level == "phoneme":
            scope = next(w for w, (lo, hi) in enumerate(enc.word_phone_ranges)
                         if lo <= args.index < hi)
        else:
            scope = "utterance"
    elif scope != "utterance":
        scope = int(scope)
    speaker = args.speaker or model.speakers.ids[0]
    results = intensity_sweep(session, template, values, model, scope=scope,
                              speaker_id=speaker)

    def write(path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("value,pitch_mean,pitch_std,energy_mean,energy_std,"
                     "duration_total\n")
            for value, st in results:
                fh.write(",".join(repr(float(x)) for x in (
                    value, st["pitch_mean"], st["pitch_std"],
                    st["energy_mean"], st["energy_std"],
                    st["duration_total"])) + "\n")

    _atomic_write(args.out, write)
    print(f"swept {len(values)} values -> {args.out}")
    return 0


def _emit_json(doc, out_path) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if out_path:
        _atomic_write(out_path,
                      lambda p: open(p, "w", encoding="utf-8").write(text))
    else:
        sys.stdout.write(text)


def _cmd_eval(args, config) -> int:
    modes = [bool(args.pred or args.gt), bool(args.predictor),
             bool(args.renderer)]
    if sum(modes) != 1:
        raise _UsageError(
            "pick one: --pred/--gt, --corpus --predictor, or "
            "--corpus --renderer")
    if args.pred or args.gt:
        if not (args.pred and args.gt):
            raise _UsageError("--pred and --gt go together")
        report = mean_abs_diff(load_hed(args.pred), load_hed(args.gt))
        _emit_json(report, args.out)
        return 0
    if not args.corpus:
        raise _UsageError("--corpus is required for model evaluation")
    _, items = load_corpus(args.corpus)
    if args.predictor:
        pred = load_predictor(args.predictor)
        report = eval_predictor(
            pred, [(it.words, it.hed) for it in items],
            teacher_forcing=_get(args, config, "teacher_forcing",
                                 "predicted"))
        _emit_json(report, args.out)
        return 0
    model = load_renderer(args.renderer)
    per_item = []
    for item in items:
        enc = encode(model.table, item.words)
        aligned = aligned_from_ranges(item.hed, enc.word_phone_ranges)
        contour = render(model, enc, aligned, item.speaker_id)
        row = {"item_id": item.item_id}
        row.update(contour_metrics(contour, item.contour))
        per_item.append(row)
    if args.out and str(args.out).endswith(".csv"):
        _atomic_write(args.out, lambda p: write_metrics_csv(p, per_item))
    elif args.out:
        _atomic_write(args.out, lambda p: write_metrics_json(p, per_item))
    else:
        from .metrics import summarize_metrics
        _emit_json({"items": per_item,
                    "summary": summarize_metrics(per_item)}, None)
    return 0


def _cmd_serve(args, config) -> int:
    import uvicorn

    from .service import build_app

    app = build_app(predictor_path=args.predictor,
                    renderer_path=args.renderer,
                    ttl_s=args.ttl, snapshot_dir=args.snapshot_dir)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


_COMMANDS = {
    "gen-corpus": _cmd_gen_corpus,
    "train-ranker": _cmd_train_ranker,
    "extract-hed": _cmd_extract_hed,
    "train-predictor": _cmd_train_predictor,
    "predict": _cmd_predict,
    "train-renderer": _cmd_train_renderer,
    "render": _cmd_render,
    "edit": _cmd_edit,
    "sweep": _cmd_sweep,
    "eval": _cmd_eval,
    "serve": _cmd_serve,
}


def run(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            return 1
        config = _load_config(args)
        return _COMMANDS[args.command](args, config)
    except _UsageError as exc:
        print(f"hedkit: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # argparse --help/--version
        return int(exc.code or 0)
    except (HedkitError, OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"hedkit: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))
