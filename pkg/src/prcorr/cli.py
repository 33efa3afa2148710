"""Command-line pipeline: simulate, solve, label, features, train, correct, evaluate.

Every subcommand is a separate process reading and writing plain files.
Exit status is 0 on success, 2 on invalid input (bad flags, missing or
malformed files, inconsistent data) and 1 on numerical failure; errors are
reported on stderr as one JSON object ``{"error": ..., "message": ...}``.
"""
import argparse
import json
import logging
import os
import sys

import numpy as np

from . import estimators, evaluate, features, geo, ingest, labeling, prnet, simulator, solver

log = logging.getLogger("prcorr")

EXIT_NUMERICAL = 1
EXIT_INVALID = 2


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _fail("UsageError", message, EXIT_INVALID)


def _fail(kind, message, code):
    sys.stderr.write(json.dumps({"error": kind, "message": str(message)}, sort_keys=True) + "\n")
    sys.exit(code)


def _read_json(path):
    with open(path) as f:
        try:
            d = json.load(f)
        except json.JSONDecodeError as e:
            raise UsageError(f"{path}: not valid JSON ({e})") from None
    if not isinstance(d, dict):
        raise UsageError(f"{path}: expected a JSON object")
    return d


def _load_epochs(path):
    with open(path, "rb") as f:
        return ingest.parse_epochs_csv(f)


def _load_truth(path):
    with open(path, "rb") as f:
        return ingest.parse_ground_truth_csv(f)


def _estimator_config(path):
    return estimators.EstimatorConfig() if path is None else estimators.EstimatorConfig.from_dict(_read_json(path))


def _out_file(path):
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    return open(path, "w", newline="")


def _write_track(path, track):
    llh = geo.ecef_to_geodetic_array(track.pos)
    with _out_file(path) as f:
        ingest.write_track_csv(f, track.times_ms, llh, track.clock_bias_m)


def cmd_simulate(args):
    cfg = _read_json(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    trace = simulator.simulate_trace(simulator.ScenarioConfig.from_dict(cfg))
    simulator.write_scenario(trace, args.out)
    log.info("simulated %d epochs into %s", len(trace.epochs), args.out)


def cmd_solve(args):
    epochs = _load_epochs(args.epochs)
    track = estimators.run_engine(args.engine, epochs, _estimator_config(args.config))
    _write_track(args.out, track)


def truth_ecef_for(epochs, truth, tolerance_ms):
    """(N, 3) truth positions aligned with ``epochs``; NaN rows where unpaired."""
    pairs, _ = ingest.align_truth(epochs, truth, tolerance_ms)
    at = {ep.time_ms: geo.geodetic_to_ecef(p) for ep, p in pairs}
    return np.array([at.get(ep.time_ms, np.full(3, np.nan)) for ep in epochs])


def cmd_label(args):
    epochs = _load_epochs(args.epochs)
    truth = _load_truth(args.truth)
    cfg = _estimator_config(args.config)
    x_true = truth_ecef_for(epochs, truth, args.tolerance_ms)
    wls, geoms = solver.wls_track(epochs)
    smoothed = estimators.rts_smooth(estimators.ekf_forward(epochs, cfg), cfg)
    recs = labeling.build_label_dataset(epochs, x_true, smoothed, geoms, discard=args.discard,
                                        target=args.target, wls=wls)
    os.makedirs(args.out, exist_ok=True)
    with _out_file(os.path.join(args.out, "labels.csv")) as fl, \
            _out_file(os.path.join(args.out, "h_rows.csv")) as fh:
        labeling.write_labels(fl, fh, recs)
    log.info("wrote %d labels", len(recs))


def _trace_features(epochs):
    wls, _ = solver.wls_track(epochs)
    return features.extract_trace(epochs, wls)


def cmd_features(args):
    feats = _trace_features(_load_epochs(args.epochs))
    with _out_file(args.out) as f:
        features.write_features(f, feats)


def cmd_train(args):
    with open(args.features, "rb") as f:
        feats = features.read_features(f)
    with open(os.path.join(args.labels, "labels.csv"), "rb") as fl, \
            open(os.path.join(args.labels, "h_rows.csv"), "rb") as fh:
        recs = labeling.read_labels(fl, fh)
    d = _read_json(args.config) if args.config else {}
    if args.seed is not None:
        d["seed"] = args.seed
    cfg = prnet.TrainConfig.from_dict(d)
    samples = features.assemble_samples(feats, recs)
    if not samples:
        raise UsageError("features and labels share no epoch")
    model, curve = prnet.train(samples, cfg)
    d = os.path.dirname(args.out)
    if d:
        os.makedirs(d, exist_ok=True)
    prnet.save_model(model, args.out)
    curve_path = args.loss_out or os.path.splitext(args.out)[0] + "_loss.csv"
    with _out_file(curve_path) as f:
        f.write("iter,loss,lr\n")
        for it, loss, lr in curve:
            f.write(f"{it},{ingest.fmt(loss)},{ingest.fmt(lr)}\n")
    log.info("trained on %d samples, final loss %.4g", len(samples), curve[-1][1])


def cmd_correct(args):
    epochs = _load_epochs(args.epochs)
    model = prnet.load_model(args.model)
    feats = _trace_features(epochs)
    corrected = [prnet.correct_pseudoranges(ep, model, ef) for ep, ef in zip(epochs, feats)]
    with _out_file(args.out) as f:
        ingest.write_epochs_csv(f, corrected)


def evaluate_track(times_ms, llh, truth, tolerance_ms=500):
    """EvalReport for a track against truth, pairing by timestamp."""
    stubs = [ingest.MeasurementSet(int(t), ()) for t in times_ms]
    pairs, _ = ingest.align_truth(stubs, truth, tolerance_ms)
    index = {int(t): i for i, t in enumerate(times_ms)}
    est = np.array([llh[index[ep.time_ms], :2] for ep, _ in pairs])
    tru = np.array([[p.latitude, p.longitude] for _, p in pairs])
    return evaluate.evaluate(evaluate.horizontal_errors(est, tru))


def cmd_evaluate(args):
    with open(args.track, "rb") as f:
        times, llh, _ = ingest.parse_track_csv(f)
    if len(times) == 0:
        raise UsageError(f"{args.track}: empty track")
    report = evaluate_track(times, llh, _load_truth(args.truth), args.tolerance_ms)
    with _out_file(args.out) as f:
        f.write(report.to_json())
    ecdf_path = args.ecdf or os.path.splitext(args.out)[0] + "_ecdf.csv"
    xs, fr = evaluate.ecdf(report.errors)
    with _out_file(ecdf_path) as f:
        ingest.write_rows(f, ["error_m", "fraction"], zip(xs, fr))
    log.info("score %.3f m (p50 %.3f, p95 %.3f)", report.score, report.p50, report.p95)


def build_parser():
    p = _Parser(prog="prcorr", description="Pseudorange-bias correction pipeline.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="generate a synthetic scenario")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("solve", help="position a trace with one engine")
    s.add_argument("--engine", required=True, choices=estimators.ENGINES)
    s.add_argument("--epochs", required=True)
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("label", help="smoothed pseudorange-bias labels")
    s.add_argument("--epochs", required=True)
    s.add_argument("--truth", required=True)
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--config", help="estimator config for the smoother")
    s.add_argument("--discard", type=int, default=labeling.WARMUP_EPOCHS)
    s.add_argument("--target", choices=("smoothed", "raw"), default="smoothed")
    s.add_argument("--tolerance-ms", type=int, default=500)
    s.set_defaults(func=cmd_label)

    s = sub.add_parser("features", help="per-satellite input features")
    s.add_argument("--epochs", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_features)

    s = sub.add_parser("train", help="fit the bias network")
    s.add_argument("--features", required=True)
    s.add_argument("--labels", required=True, help="directory from `label`")
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--loss-out", help="loss curve CSV (default: next to the model)")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("correct", help="subtract predicted biases from pseudoranges")
    s.add_argument("--epochs", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_correct)

    s = sub.add_parser("evaluate", help="horizontal errors, score and ECDF")
    s.add_argument("--track", required=True)
    s.add_argument("--truth", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--ecdf", help="ECDF CSV (default: next to the report)")
    s.add_argument("--tolerance-ms", type=int, default=500)
    s.set_defaults(func=cmd_evaluate)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ValueError, KeyError, TypeError, OSError) as e:
        _fail(type(e).__name__, e, EXIT_INVALID)
    except ArithmeticError as e:
        _fail(type(e).__name__, e, EXIT_NUMERICAL)
    return 0


if __name__ == "__main__":
    sys.exit(main())
