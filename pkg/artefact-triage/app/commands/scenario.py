# © 2025 artefact-triage contributors. Licensed under the MIT License; see LICENSE.md.

"""`gen`: synthetic case timelines with ground truth."""

import argparse
import logging

from pydantic import ValidationError

from app.commands.common import common_options, out_dir, print_json, run_settings
from app.errors import InvalidSpec
from app.schemas import ScenarioSpec
from app.services.scenario_forge import builtin_scenarios, default_scenario, find_scenario, generate, load_spec, write_scenario_outputs

logger = logging.getLogger(__name__)


def run_gen(args: argparse.Namespace) -> int:
    if args.list:
        for spec in [default_scenario()] + builtin_scenarios():
            pertinent = sum(entry.count for entry in spec.pertinent_population)
            benign = sum(entry.count for entry in spec.benign_population)
            print(f"{spec.name}\t{benign} benign\t{pertinent} pertinent\t{', '.join(spec.pertinent_keywords)}")
        return 0

    settings = run_settings(args)
    spec = load_spec(args.spec) if args.spec else find_scenario(args.scenario)
    updates = {}
    if "seed" in settings.model_fields_set:
        updates["seed"] = settings.seed
    if args.noise_events is not None:
        updates["noise_events"] = args.noise_events
    if args.pertinent_fraction is not None:
        updates["pertinent_fraction_override"] = args.pertinent_fraction
    if updates:
        try:
            spec = ScenarioSpec.model_validate({**spec.model_dump(), **updates})
        except ValidationError as e:
            raise InvalidSpec(f"Invalid scenario override: {e}")

    timeline, manifest = generate(spec)
    paths = write_scenario_outputs(spec, timeline, manifest, out_dir(args, settings))
    print_json({name: str(path) for name, path in paths.items()})
    return 0


def register(subparsers) -> None:
    parser = subparsers.add_parser("gen", parents=[common_options()], help="Generate a synthetic case")
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--scenario", default="paper-baseline", help="Built-in scenario name")
    source.add_argument("--spec", help="Scenario spec JSON file")
    parser.add_argument("--list", action="store_true", help="List the built-in scenarios")
    parser.add_argument("--noise-events", type=int, help="Exact number of background events")
    parser.add_argument("--pertinent-fraction", type=float, help="Rescale benign counts to this pertinent share")
    parser.set_defaults(handler=run_gen)
