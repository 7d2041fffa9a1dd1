"""Command line interface.

Every pipeline stage is a subcommand that reads the previous stage's
directory (``--input``) and writes its own (``--out``); ``run`` does all of
them at once and ``sweep`` repeats ``run`` over a parameter.

Exit codes: 0 on success, 2 for configuration errors, 3 when a stage fails.
"""

# Standard Library Imports
import argparse
import logging
import os
import sys

# Local Application Imports
from nlhrflow import experiment
from nlhrflow.beamforming import BEAMFORMERS
from nlhrflow.data_validation import ConfigError, PipelineError
from nlhrflow.storage import (
    load_ensemble,
    load_rf,
    load_velocity_field,
    read_json,
    write_json,
    write_manifest,
)
from nlhrflow.velocity import ESTIMATORS
from nlhrflow.version import __version__

logger = logging.getLogger("nlhrflow")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PIPELINE = 3

LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"


def _common(parser, needs_input=False):
    if needs_input:
        parser.add_argument("--input", required=True,
                            help="directory written by the previous stage")
    else:
        parser.add_argument("--config", help="experiment document (JSON)")
        parser.add_argument("--profile", choices=sorted(experiment.PROFILES),
                            help="default profile (overrides the document's)")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, help="random seed")
    parser.add_argument("--beamformer", choices=BEAMFORMERS)
    parser.add_argument("--mas-mode", choices=("product", "signed-sqrt"))
    parser.add_argument("--estimator", choices=ESTIMATORS)
    parser.add_argument("--k-remove", type=int, help="singular components removed")
    parser.add_argument("--threads", type=int, help="worker threads")
    parser.add_argument("--deterministic", action="store_true",
                        help="single-threaded, byte-reproducible output")
    parser.add_argument("--html", action="store_true", help="also write plotly figures")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("--quiet", action="store_true", help="warnings and errors only")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="nlhrflow",
        description="Simulated vector flow imaging with DAS and NLHR beamforming.")
    parser.add_argument("--version", action="version", version=f"nlhrflow {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    _common(commands.add_parser("simulate", help="seed a phantom and synthesize RF"))
    _common(commands.add_parser("beamform", help="form sub-aperture signals"), needs_input=True)
    _common(commands.add_parser("estimate", help="clutter filter and estimate velocities"),
            needs_input=True)
    _common(commands.add_parser("evaluate", help="compare estimates with the truth"),
            needs_input=True)
    _common(commands.add_parser("sv-spectrum", help="singular-value spectra of an ensemble"),
            needs_input=True)
    _common(commands.add_parser("run", help="run every stage"))

    sweep = commands.add_parser("sweep", help="one run per value of a parameter")
    _common(sweep)
    sweep.add_argument("--axis", required=True, choices=sorted(experiment.SWEEP_AXES))
    sweep.add_argument("--values", required=True,
                       help="comma-separated values, e.g. 0.8,1.6")
    sweep.add_argument("--unit", help="unit of the values, e.g. ms or cm/s")
    return parser


def configure_logging(args):
    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def _spec_document(args):
    """Document from --input/--config with --profile and flag overrides
    applied on top (profile < file < flags)."""
    if getattr(args, "input", None):
        path = os.path.join(args.input, "spec.json")
        if not os.path.exists(path):
            raise ConfigError(f"'{args.input}' holds no spec.json", field="input")
        doc = read_json(path)
    elif args.config:
        try:
            doc = read_json(args.config)
        except (OSError, ValueError) as error:
            raise ConfigError(f"Cannot read config '{args.config}': {error}", field="config")
        if not isinstance(doc, dict):
            raise ConfigError("An experiment document should be a JSON object.", field="config")
    else:
        doc = {}

    if getattr(args, "profile", None):
        doc["profile"] = args.profile
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.beamformer:
        doc["beamformer"] = args.beamformer
    if args.mas_mode:
        doc["mas_mode"] = args.mas_mode.replace("-", "_")
    if args.estimator:
        doc.setdefault("estimator", {})["estimator"] = args.estimator
    if args.k_remove is not None:
        doc.setdefault("clutter", {})["k_remove"] = args.k_remove
    if args.threads is not None:
        doc["threads"] = args.threads
    if args.deterministic:
        doc["deterministic"] = True
    return doc


def _number(text):
    value = float(text)
    return int(value) if value.is_integer() and "." not in text else value


def _rf_stem(directory):
    """RF of a stage directory, following ``lineage.json`` back when the
    directory does not hold it."""
    stem = os.path.join(directory, "rf")
    if os.path.exists(stem + ".bin"):
        return stem
    lineage = os.path.join(directory, "lineage.json")
    if os.path.exists(lineage):
        return os.path.normpath(os.path.join(directory, read_json(lineage)["rf"]))
    return None


def _write_lineage(args, out_dir):
    stem = _rf_stem(args.input)
    if stem is None:
        return []
    return [write_json(os.path.join(out_dir, "lineage.json"),
                       {"rf": os.path.relpath(stem, out_dir).replace(os.sep, "/")})]


def _execute(args):
    spec = experiment.ExperimentSpec.from_dict(_spec_document(args))
    setup = experiment.build(spec)
    out = args.out
    os.makedirs(out, exist_ok=True)

    if args.command == "run":
        manifest = experiment.run(spec, out, html=args.html)
        logger.info("run finished: %d files in %s", len(manifest["files"]), out)
        return

    if args.command == "sweep":
        values = [_number(v) for v in args.values.split(",") if v.strip()]
        manifests = experiment.sweep(spec, args.axis, values, out, unit=args.unit,
                                     html=args.html)
        logger.info("sweep finished: %d runs in %s", len(manifests), out)
        return

    files = []
    if args.command == "simulate":
        with experiment.pipeline_stage("simulate"):
            _, files = experiment.simulate_stage(spec, out, setup)

    elif args.command == "beamform":
        stem = _rf_stem(args.input)
        if stem is None:
            raise ConfigError(f"'{args.input}' holds no RF data", field="input")
        with experiment.pipeline_stage("beamform"):
            _, _, files = experiment.beamform_stage(spec, load_rf(stem), out, setup)
            files += _write_lineage(args, out)

    elif args.command == "estimate":
        stem = _rf_stem(args.input)
        with experiment.pipeline_stage("estimate"):
            ensemble = load_ensemble(args.input)
            rf = load_rf(stem) if stem is not None else None
            velocity, reports, files = experiment.estimate_stage(spec, ensemble, out, rf, setup)
            files += _write_lineage(args, out)
            if args.html:
                files += experiment.write_figures(out, setup, velocity=velocity, reports=reports)

    elif args.command == "evaluate":
        with experiment.pipeline_stage("evaluate"):
            velocity = load_velocity_field(os.path.join(args.input, "velocity"))
            _, report, files = experiment.evaluate_stage(spec, velocity, out, setup)
            if args.html:
                files += experiment.write_figures(out, setup, report=report)

    elif args.command == "sv-spectrum":
        with experiment.pipeline_stage("sv-spectrum"):
            reports, files = experiment.sv_spectrum_stage(spec, load_ensemble(args.input), out)
            files.append(experiment.write_spec(spec, out))
            if args.html:
                files += experiment.write_figures(out, setup, reports=reports)

    write_manifest(out, sorted(set(files)))


def main(argv=None):
    """Entry point; returns the exit code."""
    args = build_parser().parse_args(argv)
    configure_logging(args)
    try:
        _execute(args)
    except ConfigError as error:
        print(f"configuration error: {error}", file=sys.stderr)
        return EXIT_CONFIG
    except PipelineError as error:
        print(f"pipeline error: {error}", file=sys.stderr)
        return EXIT_PIPELINE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
