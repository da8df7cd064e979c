"""Command-line surface.

Subcommands: gen, prune, analyze-bias, compare, flops. Exit codes are phased:
0 success, 2 flag/spec validation, 3 unreadable or malformed inputs, 4 an
invariant violated during computation. All file outputs are written to a
temporary sibling and renamed into place, so a crashed or concurrent run never
leaves a partial file behind.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import bias as _bias
from . import flops as _flops
from . import pipeline as _pipeline
from . import plots as _plots
from . import synth as _synth
from .config import AdaTPConfig
from .dump import read_dump_file, write_dump
from .errors import AdatpError, DumpFormatError, InfeasibleSpec, InvariantViolation


def _fail(code: int, msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


def _write_atomic(path, payload) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f"{path.name}.tmp.{os.getpid()}")
    if isinstance(payload, bytes):
        tmp.write_bytes(payload)
    else:
        tmp.write_text(payload)
    os.replace(tmp, path)


def _csv_ints(text: str) -> tuple:
    return tuple(int(part) for part in text.split(",") if part.strip() != "")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    d = AdaTPConfig()
    p.add_argument("--tau-s", type=float, default=d.tau_s, help="segment-boundary cosine threshold")
    p.add_argument("--tau-t", type=float, default=d.tau_t, help="segment significance threshold")
    p.add_argument("--alpha-boost", type=float, default=d.alpha_boost, help="significant-segment boost limit")
    p.add_argument("--gamma-cap", type=float, default=d.gamma_cap, help="boost budget cap")
    p.add_argument("--p", type=float, default=d.p, help="pruning rate scale")
    p.add_argument("--start-layer", type=int, default=d.start_layer)
    p.add_argument("--keep-last-layers", type=int, default=d.keep_last_layers)
    p.add_argument(
        "--dedup-exempt-nonspatial",
        action="store_true",
        help="let declared non-spatial trailing positions bypass deduplication",
    )


def _config_from(args) -> AdaTPConfig:
    return AdaTPConfig(
        tau_s=args.tau_s,
        tau_t=args.tau_t,
        alpha_boost=args.alpha_boost,
        gamma_cap=args.gamma_cap,
        p=args.p,
        start_layer=args.start_layer,
        keep_last_layers=args.keep_last_layers,
        dedup_exempt_nonspatial=getattr(args, "dedup_exempt_nonspatial", False),
    ).validate()


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="adatp", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("gen", help="generate synthetic dumps with planted ground truth")
    g.add_argument("--out", required=True, help="output .adtp file, or directory with --count > 1")
    g.add_argument("--count", type=int, default=1, help="number of dumps (seeds seed..seed+count-1)")
    g.add_argument("--frames", type=int, default=32)
    g.add_argument("--tokens-per-frame", type=int, default=196)
    g.add_argument("--dim", type=int, default=128)
    g.add_argument("--num-layers", type=int, default=24)
    g.add_argument("--segment-lengths", type=_csv_ints, default=None, help="comma-separated frame counts")
    g.add_argument("--planted-indices", type=_csv_ints, default=None, help="explicit flat token indices")
    g.add_argument("--planted-count", type=int, default=24)
    g.add_argument("--planted-segment", type=int, default=None, help="segment hosting R (default: middle)")
    g.add_argument("--beta", type=float, default=1.0)
    g.add_argument("--end-mass", type=float, default=0.0, help="top-tier share planted in the last k frames")
    g.add_argument("--tail-k", type=int, default=4)
    g.add_argument("--peak-positions", type=_csv_ints, default=())
    g.add_argument("--peak-multiplier", type=float, default=1.0)
    g.add_argument("--alignment", type=float, default=0.5)
    g.add_argument("--intra-noise", type=float, default=0.05)
    g.add_argument("--inter-sim", type=float, default=0.0)
    g.add_argument("--top-q", type=float, default=0.1)
    g.add_argument("--no-normalize", action="store_true")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--tau-s", type=float, default=0.95, help="threshold the embeddings are built for")
    g.add_argument("--tau-t", type=float, default=0.05)

    pr = sub.add_parser("prune", help="run the pruning pipeline on one dump")
    pr.add_argument("dump", help="input .adtp file")
    pr.add_argument("--out", required=True, help="report JSON path")
    pr.add_argument("--mask-csv", default=None, help="optional n x c 0/1 kept-token matrix")
    _add_config_flags(pr)

    ab = sub.add_parser("analyze-bias", help="attention-bias metrics for one or more dumps")
    ab.add_argument("dumps", nargs="+", help="input .adtp files")
    ab.add_argument("--out", required=True, help="metrics CSV path")
    ab.add_argument("--top-q", type=float, default=0.1)
    ab.add_argument("--tail-k", type=int, default=4)
    ab.add_argument("--layer", type=int, default=2, help="layer rendered in plots/grid")
    ab.add_argument("--grid-width", type=int, default=None, help="emit a position-sum matrix this wide")
    ab.add_argument("--grid-csv", default=None)
    ab.add_argument("--bar-svg", default=None, help="per-frame attention-mass bar chart")
    ab.add_argument("--heat-svg", default=None, help="per-position heat grid (needs --grid-width)")

    cp = sub.add_parser("compare", help="planted-token recall of adatp vs baselines over a corpus")
    cp.add_argument("--corpus", required=True, help="directory of .adtp files with .truth sidecars")
    cp.add_argument("--out", required=True, help="result CSV path")
    cp.add_argument("--methods", default="adatp,fastv,random")
    cp.add_argument("--seed", type=int, default=0)
    cp.add_argument("--fastv-layer", type=int, default=2)
    _add_config_flags(cp)

    fl = sub.add_parser("flops", help="recompute a report's FLOPs ratio under a model shape")
    fl.add_argument("report", help="prune-report JSON")
    fl.add_argument("--d-model", type=int, default=None)
    fl.add_argument("--mlp-expansion", type=float, default=None)
    fl.add_argument("--text-tokens", type=int, default=None)
    return ap


def cmd_gen(args) -> int:
    try:
        n, c = args.frames, args.tokens_per_frame
        seg = args.segment_lengths
        if seg is None:
            if n % 4 == 0:
                seg = tuple([4] * (n // 4))
            else:
                seg = (n,)
        planted_spec_seed = args.seed
        specs = []
        for i in range(max(args.count, 1)):
            seed = args.seed + i
            if args.planted_indices is not None:
                planted = args.planted_indices
            else:
                seg_ix = args.planted_segment
                if seg_ix is None:
                    seg_ix = len(seg) // 2
                planted = _synth.plant_tokens(
                    seg, c, seg_ix, args.planted_count, seed=planted_spec_seed + i
                )
            specs.append(
                _synth.SynthSpec(
                    n=n,
                    c=c,
                    d=args.dim,
                    num_layers=args.num_layers,
                    segment_lengths=tuple(seg),
                    planted=tuple(planted),
                    beta=args.beta,
                    end_mass=args.end_mass,
                    tail_frames=args.tail_k,
                    peak_positions=tuple(args.peak_positions),
                    peak_multiplier=args.peak_multiplier,
                    alignment=args.alignment,
                    intra_noise=args.intra_noise,
                    inter_sim=args.inter_sim,
                    bias_top_q=args.top_q,
                    tau_s_target=args.tau_s,
                    tau_t_target=args.tau_t,
                    normalize=not args.no_normalize,
                    seed=seed,
                ).validate()
            )
    except (InvariantViolation, ValueError) as e:
        return _fail(2, str(e))

    out = Path(args.out)
    try:
        built = []
        for i, spec in enumerate(specs):
            dump, truth = _synth.generate(spec)
            if args.count > 1:
                path = out / f"sample_{i:03d}.adtp"
            else:
                path = out
            built.append((path, dump, truth))
    except InfeasibleSpec as e:
        return _fail(2, str(e))
    except AdatpError as e:
        return _fail(4, str(e))

    try:
        for path, dump, truth in built:
            _write_atomic(path, write_dump(dump))
            _write_atomic(_synth.truth_path(path), "".join(f"{i}\n" for i in sorted(truth)))
    except OSError as e:
        return _fail(3, str(e))
    return 0


def cmd_prune(args) -> int:
    try:
        cfg = _config_from(args)
    except InvariantViolation as e:
        return _fail(2, str(e))
    try:
        dump = read_dump_file(args.dump)
    except (DumpFormatError, InvariantViolation, OSError) as e:
        return _fail(3, f"cannot read {args.dump}: {e}")
    try:
        report = _pipeline.run(dump, cfg)
        payload = report.to_json()
        mask = None
        if args.mask_csv:
            kept = set(report.final_kept)
            rows = []
            for f in range(dump.n):
                rows.append(",".join("1" if f * dump.c + p in kept else "0" for p in range(dump.c)))
            mask = "\n".join(rows) + "\n"
    except AdatpError as e:
        return _fail(4, str(e))
    try:
        _write_atomic(args.out, payload)
        if mask is not None:
            _write_atomic(args.mask_csv, mask)
    except OSError as e:
        return _fail(3, str(e))
    return 0


def cmd_analyze_bias(args) -> int:
    if not 0.0 < args.top_q <= 1.0:
        return _fail(2, f"--top-q must lie in (0, 1], got {args.top_q}")
    if args.tail_k < 1:
        return _fail(2, f"--tail-k must be >= 1, got {args.tail_k}")
    if args.heat_svg and args.grid_width is None:
        return _fail(2, "--heat-svg needs --grid-width")
    if args.grid_csv and args.grid_width is None:
        return _fail(2, "--grid-csv needs --grid-width")
    dumps = []
    try:
        for path in args.dumps:
            dumps.append((Path(path).stem, read_dump_file(path)))
    except (DumpFormatError, InvariantViolation, OSError) as e:
        return _fail(3, f"cannot read dump: {e}")
    try:
        reports = [
            _bias.analyze_dump(d, top_q=args.top_q, tail_k=args.tail_k, name=name)
            for name, d in dumps
        ]
        buf = io.StringIO()
        _bias.write_metrics_csv(reports, buf)
        extras = []
        if args.bar_svg or args.heat_svg or args.grid_csv:
            layer = args.layer
            if not all(0 <= layer < len(r.layers) for r in reports):
                return _fail(2, f"--layer {layer} out of range for these dumps")
            frame_mass = np.sum([r.layers[layer].frame_sum for r in reports], axis=0)
            pos_mass = np.sum(
                [r.layers[layer].local_bias.position_sum for r in reports], axis=0
            )
            if args.bar_svg:
                extras.append(
                    (args.bar_svg, _plots.svg_bar_chart(frame_mass, title=f"frame attention mass, layer {layer}"))
                )
            if args.heat_svg:
                extras.append(
                    (
                        args.heat_svg,
                        _plots.svg_heat_grid(
                            pos_mass, args.grid_width, title=f"position attention mass, layer {layer}"
                        ),
                    )
                )
            if args.grid_csv:
                gbuf = io.StringIO()
                _bias.write_position_grid_csv(pos_mass, args.grid_width, gbuf)
                extras.append((args.grid_csv, gbuf.getvalue()))
    except AdatpError as e:
        return _fail(4, str(e))
    try:
        _write_atomic(args.out, buf.getvalue())
        for path, payload in extras:
            _write_atomic(path, payload)
    except OSError as e:
        return _fail(3, str(e))
    return 0


def cmd_compare(args) -> int:
    try:
        cfg = _config_from(args)
        methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
        for m in methods:
            if m not in _synth.METHODS:
                raise InvariantViolation(f"unknown method {m!r}; choose from {_synth.METHODS}")
        if not methods:
            raise InvariantViolation("no methods selected")
    except InvariantViolation as e:
        return _fail(2, str(e))
    try:
        corpus = _synth.load_corpus(args.corpus)
    except (DumpFormatError, InvariantViolation, OSError, ValueError) as e:
        return _fail(3, f"cannot load corpus {args.corpus}: {e}")
    missing = [name for name, _, truth in corpus if not truth]
    if missing:
        return _fail(3, f"missing .truth sidecars for: {', '.join(missing)}")
    try:
        results = _synth.compare(
            corpus, cfg, methods=methods, seed=args.seed, fastv_layer=args.fastv_layer
        )
        buf = io.StringIO()
        _synth.write_compare_csv(results, buf)
    except AdatpError as e:
        return _fail(4, str(e))
    try:
        _write_atomic(args.out, buf.getvalue())
    except OSError as e:
        return _fail(3, str(e))
    return 0


def cmd_flops(args) -> int:
    for name in ("d_model", "text_tokens"):
        v = getattr(args, name)
        if v is not None and v < 1:
            return _fail(2, f"--{name.replace('_', '-')} must be >= 1")
    if args.mlp_expansion is not None and args.mlp_expansion <= 0:
        return _fail(2, "--mlp-expansion must be positive")
    try:
        doc = json.loads(Path(args.report).read_text())
        counts, shape = _pipeline.counts_from_json_dict(doc)
    except (OSError, ValueError, KeyError, TypeError) as e:
        return _fail(3, f"cannot read report {args.report}: {e}")
    try:
        if args.d_model is not None:
            shape = _flops.ModelShape(**{**shape.to_dict(), "d_model": args.d_model})
        if args.mlp_expansion is not None:
            shape = _flops.ModelShape(**{**shape.to_dict(), "mlp_expansion": args.mlp_expansion})
        if args.text_tokens is not None:
            shape = _flops.ModelShape(**{**shape.to_dict(), "text_tokens": args.text_tokens})
        value = _flops.ratio_from_counts(counts, shape.validate())
    except AdatpError as e:
        return _fail(2, str(e))
    print(f"{value:.4f}")
    return 0


_COMMANDS = {
    "gen": cmd_gen,
    "prune": cmd_prune,
    "analyze-bias": cmd_analyze_bias,
    "compare": cmd_compare,
    "flops": cmd_flops,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return _COMMANDS[args.cmd](args)


if __name__ == "__main__":
    sys.exit(main())
