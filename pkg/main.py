import argparse
import logging
import sys

from config import METHODS, default_spec_path, load_spec
from core import CemtError
from modules.cli import cmd_compare, cmd_evaluate, cmd_generate, cmd_report, cmd_train
from utils import output_dir
from version import __version__

logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s [%(name)s] %(levelname)s: %(message)s",
)
log = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", default=None, help="experiment spec (YAML); default configs/desk.yaml")
    common.add_argument("--out", default=None, help="output root (CEMT_OUT overrides)")
    common.add_argument("--paper-scale", action="store_true",
                        help="6000 iterations, lr decay every 2500, ramp 1500")
    common.add_argument("--verbose", action="store_true", help="per-step training logs")

    parser = argparse.ArgumentParser(prog="cemt", description="Competitive-ensembling mean-teacher lab")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("generate-data", parents=[common], help="write the synthetic dataset and manifest")

    for name, text in (("train", "train one (method, split, seed) cell"),
                       ("evaluate", "re-evaluate a finished run from its checkpoint")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--method", required=True, choices=METHODS)
        p.add_argument("--split", required=True, type=int, help="number of labeled volumes")
        p.add_argument("--seed", type=int, default=None, help="run seed (default: first spec seed)")

    p = sub.add_parser("compare", parents=[common], help="methods × splits table over seeds, plus plots")
    p.add_argument("--jobs", type=int, default=1, help="cells trained in parallel processes")
    p.add_argument("--no-run", action="store_true", help="only collect finished cells")

    p = sub.add_parser("report", parents=[common], help="qualitative overlay previews")
    p.add_argument("--split", required=True, type=int)
    p.add_argument("--cases", type=int, default=4, help="test cases per column")
    return parser


def run(args: argparse.Namespace) -> int:
    spec = load_spec(args.spec or default_spec_path())
    out = output_dir(args.out, spec.out_dir)
    seed = getattr(args, "seed", None)
    if seed is None:
        seed = spec.seeds[0]

    if args.command == "generate-data":
        path, written = cmd_generate(spec, out)
        print(f"{path} ({written} files written)")
    elif args.command == "train":
        report = cmd_train(spec, args.method, args.split, seed, out, args.paper_scale)
        print(f"{report.run_dir}: dice {report.summary['dice']['mean']:.4f}")
    elif args.command == "evaluate":
        summary = cmd_evaluate(spec, args.method, args.split, seed, out, args.paper_scale)
        print(f"dice {summary['dice']['mean']:.4f} ± {summary['dice']['std']:.4f}")
    elif args.command == "compare":
        result = cmd_compare(spec, out, args.paper_scale, jobs=args.jobs, run=not args.no_run)
        with open(result.text_path, encoding="utf-8") as f:
            print(f.read(), end="")
    elif args.command == "report":
        path = cmd_report(spec, out, args.split, args.cases, args.paper_scale)
        if path:
            print(path)
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.verbose:
        # per-iteration lines from the training loop
        logging.getLogger("modules.trainer").setLevel(logging.DEBUG)
    try:
        return run(args)
    except (CemtError, OSError) as e:
        log.error("%s: %s", type(e).__name__, e)
        return 1
    except Exception:
        log.exception("Unexpected failure")
        return 1


if __name__ == "__main__":
    sys.exit(main())
