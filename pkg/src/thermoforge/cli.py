"""Command line entry point: the full pipeline from data to reports.

Subcommands: gen-data, solve-fields, train-vrrae, train-ae, train-deeponet,
train-cnn, eval, interpolate, sample, bench, serve. Every command writes its
artifacts plus a run log carrying the seed, the resolved config hash and
content hashes of its inputs; known failures exit 2 with a single
machine-parsable ``error: <Class>: <message>`` line on stderr.
"""

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import config as config_mod
from . import geomgen, heatfd, metrics, report, serve
from .ckpt import checkpoint_hash, load_checkpoint
from .deeponet import (
    CnnHeadModel,
    CnnHeadTrainConfig,
    DeepONetModel,
    DeepONetTrainConfig,
    field_predictor,
    train_cnn_head,
    train_deeponet,
)
from .errors import EmptyBench, MissingCell, ProvenanceMismatch, ThermoforgeError
from .vrrae import PLAIN_AE, VRRAE, EncoderConfig, GenerativeModel, TrainConfig, train

_TARGETS = {"temp": heatfd.TEMPERATURE, "grad": heatfd.GRADIENT_MAGNITUDE}


def _write_runlog(out_dir, command, cfg, inputs, outputs, t0):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    log = {
        "command": command,
        "seed": cfg.get("seed"),
        "config_hash": config_mod.config_hash(cfg),
        "inputs": {str(p): config_mod.file_hash(p) for p in inputs},
        "outputs": [str(p) for p in outputs],
        "duration_s": round(time.time() - t0, 3),
    }
    path = out_dir / f"runlog-{command}.json"
    path.write_text(json.dumps(log, indent=2, sort_keys=True))
    return path


def _load_manifest(path):
    path = Path(path)
    return geomgen.DatasetManifest.load(path), path.parent


def _thermal_config(cfg, target=None, tol=None):
    t = cfg["thermal"]
    return heatfd.ThermalConfig(
        T_outer=t["T_outer"], T_hole=t["T_hole"], conductivity=t["conductivity"],
        density=t["density"], heat_capacity=t["heat_capacity"],
        plate_extent=t["plate_extent"],
        target_field=_TARGETS[target or t["target"]],
    ), tol if tol is not None else t["tol"]


def _load_encoder(path):
    return GenerativeModel.from_checkpoint(load_checkpoint(path))


# -- commands ---------------------------------------------------------------

def cmd_gen_data(args, cfg):
    t0 = time.time()
    g = cfg["geometry"]
    for key in ("count", "m", "n", "shape_size", "margin", "hole_fraction"):
        config_mod.override(cfg, "geometry", key, getattr(args, key.replace("-", "_"), None))
    config_mod.override(cfg, None, "seed", args.seed)
    spec = geomgen.GeometrySpec(
        grid_m=g["m"], grid_n=g["n"], shape_size=g["shape_size"],
        hole_fraction=g["hole_fraction"], margin=g["margin"], seed=cfg["seed"],
    )
    out = Path(args.out or cfg["out"])
    manifest = geomgen.generate_dataset(spec, g["count"], out,
                                        config_hash=config_mod.config_hash(cfg))
    outputs = [out / manifest.geometry_file, out / "manifest.json"]
    _write_runlog(out, "gen-data", cfg, [], outputs, t0)
    print(f"wrote {g['count']} geometries to {outputs[0]} (manifest {manifest.manifest_hash()})")
    return 0


def cmd_solve_fields(args, cfg):
    t0 = time.time()
    manifest, mdir = _load_manifest(args.manifest)
    config_mod.override(cfg, "thermal", "subset", args.subset)
    thermal, tol = _thermal_config(cfg, target=args.target, tol=args.tol)
    field_name = args.out or "fields.tff"
    manifest, fields = heatfd.solve_batch(
        manifest, mdir, thermal, subset_count=cfg["thermal"]["subset"],
        tol=tol, field_name=field_name,
        manifest_name=Path(args.manifest).name,
    )
    outputs = [mdir / field_name, Path(args.manifest)]
    _write_runlog(mdir, "solve-fields", cfg, [mdir / manifest.geometry_file], outputs, t0)
    n_fail = len(manifest.solver_failures)
    print(f"solved {fields.shape[0]} fields ({manifest.field_kind}), {n_fail} failures")
    return 0


def _cmd_train_encoder(args, cfg, mode):
    t0 = time.time()
    manifest, mdir = _load_manifest(args.manifest)
    for key, flag in (("steps", args.steps), ("beta_final", args.beta_final),
                      ("batch_size", args.batch_size), ("lr", args.lr),
                      ("lr_final", args.lr_final), ("k_star", args.k_star),
                      ("latent_width", args.latent_width)):
        config_mod.override(cfg, "vrrae", key, flag)
    config_mod.override(cfg, None, "seed", args.seed)
    v = cfg["vrrae"]
    rasters = geomgen.load_rasters(manifest, mdir)
    model = GenerativeModel(
        rasters.shape[1:], mode=mode,
        enc_cfg=EncoderConfig(latent_width=v["latent_width"]),
        k_star=v["k_star"], init_seed=cfg["seed"],
    )
    tcfg = TrainConfig(steps=v["steps"], batch_size=v["batch_size"], lr=v["lr"],
                       lr_final=v["lr_final"], beta_final=v["beta_final"],
                       anneal_frac=v["anneal_frac"], k_star=v["k_star"], seed=cfg["seed"])
    history = train(model, rasters, manifest.split, tcfg,
                    manifest_hash=manifest.manifest_hash())
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    model.save(out, extra_meta={"config_hash": config_mod.config_hash(cfg),
                                "train": tcfg.to_dict()})
    hist_path = out.with_suffix(".history.json")
    hist_path.write_text(json.dumps(history, indent=2))
    curve = report.save_training_curve(out.with_suffix(".loss.png"), history,
                                       keys=("total", "rec", "kl"))
    _write_runlog(out.parent, f"train-{'vrrae' if mode == VRRAE else 'ae'}", cfg,
                  [mdir / manifest.geometry_file], [out, hist_path, curve], t0)
    print(f"trained {mode} for {v['steps']} steps; checkpoint {checkpoint_hash(out)}; "
          f"val mse {history['val_mse'][-1] if history['val_mse'] else 'n/a'}")
    return 0


def cmd_train_vrrae(args, cfg):
    return _cmd_train_encoder(args, cfg, VRRAE)


def cmd_train_ae(args, cfg):
    return _cmd_train_encoder(args, cfg, PLAIN_AE)


def _field_dataset_from_args(args):
    fields_path = Path(args.fields)
    manifest_path = Path(args.manifest) if args.manifest else fields_path.parent / "manifest.json"
    manifest, mdir = _load_manifest(manifest_path)
    if manifest.field_file is None:
        raise ThermoforgeError(f"manifest {manifest_path} records no solved fields")
    fields, kind = heatfd.read_field_file(fields_path)
    rasters = geomgen.load_rasters(manifest, mdir)
    return manifest, mdir, rasters, fields, kind, fields_path


def _check_encoder_provenance(encoder, manifest, force):
    if encoder.manifest_hash and encoder.manifest_hash != manifest.manifest_hash():
        msg = (f"encoder was trained on manifest {encoder.manifest_hash}, "
               f"got {manifest.manifest_hash()}")
        if not force:
            raise ProvenanceMismatch(msg + " (pass --force to override)")
        print(f"warning: {msg}", file=sys.stderr)


def _cmd_train_head(args, cfg, head):
    t0 = time.time()
    manifest, mdir, rasters, fields, kind, fields_path = _field_dataset_from_args(args)
    encoder = _load_encoder(args.encoder_ckpt)
    _check_encoder_provenance(encoder, manifest, args.force)
    section = "deeponet" if head == "deeponet" else "cnn"
    for key, flag in (("epochs", args.epochs), ("batch_size", args.batch_size),
                      ("lr", args.lr)):
        config_mod.override(cfg, section, key, flag)
    config_mod.override(cfg, None, "seed", args.seed)
    s = cfg[section]
    if head == "deeponet":
        tcfg = DeepONetTrainConfig(epochs=s["epochs"], batch_size=s["batch_size"],
                                   lr=s["lr"], seed=cfg["seed"])
        model, history = train_deeponet(rasters, fields, manifest.field_indices,
                                        manifest.split, encoder, tcfg)
    else:
        tcfg = CnnHeadTrainConfig(epochs=s["epochs"], batch_size=s["batch_size"],
                                  lr=s["lr"], seed=cfg["seed"])
        model, history = train_cnn_head(rasters, fields, manifest.field_indices,
                                        manifest.split, encoder, tcfg)
    model.target_field = kind
    model.encoder_ckpt_hash = checkpoint_hash(args.encoder_ckpt)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    model.save(out, extra_meta={"config_hash": config_mod.config_hash(cfg),
                                "manifest_hash": manifest.manifest_hash()})
    hist_path = out.with_suffix(".history.json")
    hist_path.write_text(json.dumps(history, indent=2))
    curve = report.save_training_curve(out.with_suffix(".loss.png"), history, keys=("loss",))
    _write_runlog(out.parent, f"train-{head}", cfg,
                  [fields_path, Path(args.encoder_ckpt)], [out, hist_path, curve], t0)
    print(f"trained {head} for {s['epochs']} epochs; final loss {history['loss'][-1]:.3e}")
    return 0


def cmd_train_deeponet(args, cfg):
    return _cmd_train_head(args, cfg, "deeponet")


def cmd_train_cnn(args, cfg):
    return _cmd_train_head(args, cfg, "cnn")


def _parse_cells(raw):
    cells = {}
    for part in raw.split(","):
        if "=" not in part:
            raise MissingCell(f"bad --cells entry {part!r}; expected NAME=path")
        name, path = part.split("=", 1)
        cells[name.strip()] = Path(path.strip())
    missing = [c for c in metrics.CELLS if c not in cells]
    if missing:
        raise MissingCell(f"missing study cells: {', '.join(missing)}")
    return cells


def cmd_eval(args, cfg):
    t0 = time.time()
    manifest, mdir, rasters, fields, kind, fields_path = _field_dataset_from_args(args)
    cells = _parse_cells(args.cells)
    encoders = {"AE": _load_encoder(args.encoder_ae), "VRRAE": _load_encoder(args.encoder_vrrae)}
    enc_hashes = {"AE": checkpoint_hash(args.encoder_ae), "VRRAE": checkpoint_hash(args.encoder_vrrae)}

    predictors = {}
    for cell, path in cells.items():
        ck = load_checkpoint(path)
        enc_name = cell.split("+")[0]
        head = DeepONetModel.from_checkpoint(ck) if ck.kind == "deeponet" \
            else CnnHeadModel.from_checkpoint(ck)
        if head.encoder_ckpt_hash and head.encoder_ckpt_hash != enc_hashes[enc_name]:
            msg = f"cell {cell}: head was trained with encoder {head.encoder_ckpt_hash}"
            if not args.force:
                raise ProvenanceMismatch(msg + " (pass --force to override)")
            print(f"warning: {msg}", file=sys.stderr)
        predictors[cell] = field_predictor(encoders[enc_name], head)

    test_idx = [i for i in manifest.sample_indices("test")
                if manifest.field_indices[i] is not None]
    test_rasters = rasters[test_idx]
    test_fields = [fields[manifest.field_indices[i]].astype(np.float64) for i in test_idx]
    from .deeponet import solid_mask
    masks = [solid_mask(r) for r in test_rasters]

    study = metrics.run_2x2_study(predictors, test_rasters, test_fields, masks)

    validity = {}
    if not args.no_validity:
        ref = metrics.reference_range_from_manifest(manifest)
        all_test = rasters[manifest.sample_indices("test")]
        rng = np.random.default_rng(cfg["seed"])
        for name, enc in encoders.items():
            interp, rand = metrics.validity_rates(
                enc, all_test, ref, cfg["eval"]["n_pairs"], cfg["eval"]["n_samples"], rng)
            validity[name] = {"interpolation": interp, "random": rand}

    report_path = Path(args.report)
    report_path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "study": json.loads(metrics.study_to_json(study)),
        "validity": validity,
        "target_field": kind,
        "test_samples": len(test_idx),
        "encoders": enc_hashes,
    }
    report_path.write_text(json.dumps(payload, indent=2, sort_keys=True))

    table = metrics.study_table(study)
    lines = [table, ""]
    for name, v in validity.items():
        lines.append(f"{name}: interpolation validity {v['interpolation']:.3f}, "
                     f"random-sampling validity {v['random']:.3f}")
    report_path.with_suffix(".txt").write_text("\n".join(lines) + "\n")
    report.save_study_csv(report_path.with_suffix(".csv"), study)

    example = {
        "reference": test_fields[0],
        "predictions": {c: predictors[c](test_rasters[0]) for c in metrics.CELLS},
    }
    figures = report.save_study_figures(report_path.parent / "figures", study, example)

    _write_runlog(report_path.parent, "eval", cfg,
                  [fields_path, args.encoder_ae, args.encoder_vrrae, *cells.values()],
                  [report_path, report_path.with_suffix(".txt"),
                   report_path.with_suffix(".csv"), *figures], t0)
    print(table)
    for name, v in validity.items():
        print(f"{name}: interp {v['interpolation']:.3f}  random {v['random']:.3f}")
    return 0


def cmd_interpolate(args, cfg):
    t0 = time.time()
    manifest, mdir = _load_manifest(args.manifest)
    rasters = geomgen.load_rasters(manifest, mdir)
    encoder = _load_encoder(args.encoder_ckpt)
    _check_encoder_provenance(encoder, manifest, args.force)
    test_idx = manifest.sample_indices("test")
    ia, ib = test_idx[args.index_a % len(test_idx)], test_idx[args.index_b % len(test_idx)]
    code_a = encoder.project(rasters[ia])
    code_b = encoder.project(rasters[ib])

    surrogate = None
    if args.deeponet_ckpt:
        surrogate = DeepONetModel.from_checkpoint(load_checkpoint(args.deeponet_ckpt))
        cache = surrogate.build_trunk_cache()

    ref = metrics.reference_range_from_manifest(manifest)
    ts = np.linspace(0.0, 1.0, args.steps)
    decoded, fields_out, rows = [], [], []
    from .vrrae import interpolate as lerp
    for t in ts:
        code = lerp(code_a, code_b, float(t))
        soft = encoder.decode(code)
        raster = metrics.binarize(soft)
        v = metrics.structural_consistency(raster, ref)
        decoded.append(raster)
        rows.append({"t": float(t), "figure_count": v.figure_count,
                     "area_fraction": v.area_fraction, "valid": v.valid})
        if surrogate is not None:
            fields_out.append(surrogate.predict_field(code.alpha, cache))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    strip = report.save_interpolation_strip(out / "interpolation.png", decoded,
                                            fields_out if surrogate else None, ts)
    csv_path = report.save_validity_csv(out / "interpolation.csv", rows)
    codes_path = out / "codes.json"
    codes_path.write_text(json.dumps({
        "alpha_a": list(map(float, code_a.alpha)),
        "alpha_b": list(map(float, code_b.alpha)),
        "ts": list(map(float, ts)),
    }, indent=2))
    _write_runlog(out, "interpolate", cfg, [args.encoder_ckpt], [strip, csv_path, codes_path], t0)
    print(f"interpolated {args.steps} steps; "
          f"{sum(r['valid'] for r in rows)}/{len(rows)} structurally valid")
    return 0


def cmd_sample(args, cfg):
    t0 = time.time()
    manifest, mdir = _load_manifest(args.manifest)
    encoder = _load_encoder(args.encoder_ckpt)
    ref = metrics.reference_range_from_manifest(manifest)
    rng = np.random.default_rng(args.seed if args.seed is not None else cfg["seed"])
    codes = encoder.sample_prior(rng, args.n)
    rasters, rows = [], []
    for i, alpha in enumerate(codes):
        raster = metrics.binarize(encoder.decode(alpha))
        v = metrics.structural_consistency(raster, ref)
        rasters.append(raster)
        rows.append({"index": i, "figure_count": v.figure_count,
                     "area_fraction": v.area_fraction, "valid": v.valid})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    grid_png = report.save_sample_grid(out / "samples.png", rasters, [r["valid"] for r in rows])
    csv_path = report.save_validity_csv(out / "samples.csv", rows)
    _write_runlog(out, "sample", cfg, [args.encoder_ckpt], [grid_png, csv_path], t0)
    rate = sum(r["valid"] for r in rows) / len(rows)
    print(f"sampled {args.n} codes; validity rate {rate:.3f}")
    return 0


def cmd_bench(args, cfg):
    t0 = time.time()
    for key, flag in (("grid", args.grid), ("n_samples", args.n), ("warmup", args.warmup)):
        config_mod.override(cfg, "bench", key, flag)
    b = cfg["bench"]
    if b["n_samples"] <= 0:
        raise EmptyBench("bench needs --n >= 1")
    encoder = _load_encoder(args.encoder_ckpt)
    surrogate = DeepONetModel.from_checkpoint(load_checkpoint(args.deeponet_ckpt))
    grid = (b["grid"], b["grid"])
    if encoder.grid != grid or surrogate.grid != grid:
        raise ThermoforgeError(
            f"checkpoints are for grids {encoder.grid}/{surrogate.grid}, bench wants {grid}")
    spec = geomgen.GeometrySpec(grid_m=grid[0], grid_n=grid[1], seed=cfg["seed"])
    rasters, _ = geomgen.generate_rasters(spec, b["n_samples"])
    thermal, _ = _thermal_config(cfg)
    rep = bench_mod.run_bench(rasters, thermal, encoder, surrogate, warmup=b["warmup"])
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(rep.to_dict(), indent=2, sort_keys=True))
    fig = report.save_bench_figure(out.with_suffix(".png"), rep)
    _write_runlog(out.parent, "bench", cfg, [args.encoder_ckpt, args.deeponet_ckpt], [out, fig], t0)
    print(f"solver {rep.solver_s_per_sample*1e3:.2f} ms/sample vs surrogate "
          f"{rep.surrogate_s_per_sample*1e3:.3f} ms/sample -> speedup ×{rep.speedup_factor:.1f} "
          f"(baseline: {rep.solver_label})")
    return 0


def cmd_serve(args, cfg):
    manifest, mdir = _load_manifest(args.manifest)
    encoder = _load_encoder(args.encoder_ckpt)
    surrogate = DeepONetModel.from_checkpoint(load_checkpoint(args.deeponet_ckpt))
    _check_encoder_provenance(encoder, manifest, args.force)
    if surrogate.encoder_ckpt_hash and \
            surrogate.encoder_ckpt_hash != checkpoint_hash(args.encoder_ckpt):
        if not args.force:
            raise ProvenanceMismatch("surrogate was trained with a different encoder "
                                     "(pass --force to override)")
    rasters = geomgen.load_rasters(manifest, mdir)
    service = serve.InferenceService(
        encoder, surrogate,
        metrics.reference_range_from_manifest(manifest),
        rasters[manifest.sample_indices("test")],
    )
    host = args.host or cfg["serve"]["host"]
    port = args.port if args.port is not None else cfg["serve"]["port"]
    serve.serve_forever(service, host, port)
    return 0


# -- parser -----------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="thermoforge",
                                description="generative thermal design toolkit")
    p.add_argument("--config", help="dotted key=value config file")
    p.add_argument("--force", action="store_true",
                   help="ignore provenance hash mismatches at load time")
    p.add_argument("--threads", type=int, help="cap internal parallelism")
    sub = p.add_subparsers(dest="command", required=True)

    # the same options are accepted after the subcommand; SUPPRESS keeps
    # them from clobbering values parsed before it
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS)
    common.add_argument("--force", action="store_true", default=argparse.SUPPRESS)
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS)

    def add(name, fn, **kw):
        sp = sub.add_parser(name, parents=[common], **kw)
        sp.set_defaults(fn=fn)
        return sp

    sp = add("gen-data", cmd_gen_data, help="generate the geometry dataset")
    sp.add_argument("--count", type=int)
    sp.add_argument("--m", type=int)
    sp.add_argument("--n", type=int)
    sp.add_argument("--shape-size", dest="shape_size", type=int)
    sp.add_argument("--hole-fraction", dest="hole_fraction", type=float)
    sp.add_argument("--margin", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", required=True)

    sp = add("solve-fields", cmd_solve_fields, help="solve reference fields")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--subset", type=int)
    sp.add_argument("--target", choices=sorted(_TARGETS))
    sp.add_argument("--tol", type=float)
    sp.add_argument("--out", help="field file name (default fields.tff)")

    for name, fn in (("train-vrrae", cmd_train_vrrae), ("train-ae", cmd_train_ae)):
        sp = add(name, fn, help=f"{name.replace('-', ' ')} on a dataset")
        sp.add_argument("--manifest", required=True)
        sp.add_argument("--steps", type=int)
        sp.add_argument("--beta-final", dest="beta_final", type=float)
        sp.add_argument("--batch-size", dest="batch_size", type=int)
        sp.add_argument("--lr", type=float)
        sp.add_argument("--lr-final", dest="lr_final", type=float)
        sp.add_argument("--k-star", dest="k_star", type=int)
        sp.add_argument("--latent-width", dest="latent_width", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", required=True)

    for name, fn in (("train-deeponet", cmd_train_deeponet), ("train-cnn", cmd_train_cnn)):
        sp = add(name, fn, help=f"{name.replace('-', ' ')} head on solved fields")
        sp.add_argument("--fields", required=True)
        sp.add_argument("--manifest")
        sp.add_argument("--encoder-ckpt", dest="encoder_ckpt", required=True)
        sp.add_argument("--epochs", type=int)
        sp.add_argument("--batch-size", dest="batch_size", type=int)
        sp.add_argument("--lr", type=float)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", required=True)

    sp = add("eval", cmd_eval, help="run the 2x2 encoder/head study")
    sp.add_argument("--cells", required=True,
                    help="AE+CNN=path,AE+DeepONet=path,VRRAE+CNN=path,VRRAE+DeepONet=path")
    sp.add_argument("--fields", required=True)
    sp.add_argument("--manifest")
    sp.add_argument("--encoder-ae", dest="encoder_ae", required=True)
    sp.add_argument("--encoder-vrrae", dest="encoder_vrrae", required=True)
    sp.add_argument("--no-validity", dest="no_validity", action="store_true")
    sp.add_argument("--report", required=True)

    sp = add("interpolate", cmd_interpolate, help="decode a latent interpolation")
    sp.add_argument("--encoder-ckpt", dest="encoder_ckpt", required=True)
    sp.add_argument("--deeponet-ckpt", dest="deeponet_ckpt")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--index-a", dest="index_a", type=int, default=0)
    sp.add_argument("--index-b", dest="index_b", type=int, default=1)
    sp.add_argument("--steps", type=int, default=7)
    sp.add_argument("--out", required=True)

    sp = add("sample", cmd_sample, help="decode random prior samples")
    sp.add_argument("--encoder-ckpt", dest="encoder_ckpt", required=True)
    sp.add_argument("--manifest", required=True)
    sp.add_argument("-n", type=int, default=20)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", required=True)

    sp = add("bench", cmd_bench, help="time FD solver vs amortized surrogate")
    sp.add_argument("--encoder-ckpt", dest="encoder_ckpt", required=True)
    sp.add_argument("--deeponet-ckpt", dest="deeponet_ckpt", required=True)
    sp.add_argument("--grid", type=int)
    sp.add_argument("--n", type=int)
    sp.add_argument("--warmup", type=int)
    sp.add_argument("--out", required=True)

    sp = add("serve", cmd_serve, help="HTTP inference service for the explorer")
    sp.add_argument("--encoder-ckpt", dest="encoder_ckpt", required=True)
    sp.add_argument("--deeponet-ckpt", dest="deeponet_ckpt", required=True)
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--host")
    sp.add_argument("--port", type=int)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads:
        os.environ["THERMOFORGE_THREADS"] = str(args.threads)
        import torch

        torch.set_num_threads(args.threads)
    try:
        cfg = config_mod.load_config(args.config)
        return args.fn(args, cfg)
    except (ThermoforgeError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
