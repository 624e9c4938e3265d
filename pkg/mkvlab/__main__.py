#    This file is part of mkvlab
#
#    mkvlab is free software: you can redistribute it and/or modify
#    it under the terms of the GNU General Public License as published by
#    the Free Software Foundation, either version 3 of the License, or
#    (at your option) any later version.
#
#    mkvlab is distributed in the hope that it will be useful,
#    but WITHOUT ANY WARRANTY; without even the implied warranty of
#    MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
#    GNU General Public License for more details.
#
#    You should have received a copy of the GNU General Public License
#    along with mkvlab.  If not, see <http://www.gnu.org/licenses/>.

import argparse
import json
import logging
from pathlib import Path
import sys
import time

from mkvlab import __version__
from mkvlab.config import ConfigError, dump_default_config, load_settings, read_config
from mkvlab.constants import *
from mkvlab import experiment
from mkvlab import harness
from mkvlab.model_core import InvalidParameter, LabError
from mkvlab import reporting
from mkvlab.yamada_watanabe import YwFamily

program_description = "mkvlab: mean-field CKLS and distribution dependent Vasicek lab"
main_parser = argparse.ArgumentParser(prog="mkvlab", description=program_description)
main_parser.add_argument("--settings", type=Path, help="tool settings file", default="mkvlab.ini")
main_parser.add_argument("--log-file", type=Path)
main_parser.add_argument("--emit-schema", action="store_true", help="print the experiment config JSON schema and exit")
main_parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

log_group = main_parser.add_mutually_exclusive_group()
log_group.add_argument("-d", "--debug", action="store_true", help="print debug log output")
log_group.add_argument("-q", "--quiet", action="store_true", help="only print critical information")
log_group.add_argument("-v", "--verbose", action="store_true", help="print trace-level log output")

sub_parsers = main_parser.add_subparsers(title="command", dest="command")

dumpconfig_parser = sub_parsers.add_parser("dumpconfig", help="write a commented default settings file")

dump_yw_parser = sub_parsers.add_parser("dump-yw", help="write the smoothed absolute value table as CSV")
dump_yw_parser.add_argument("output", type=Path, nargs="?", default=Path("yw.csv"))
dump_yw_parser.add_argument("--epsilon", type=float, default=0.1)
dump_yw_parser.add_argument("--points", type=int, default=1000)

_experiment_help = {
    ExperimentKind.simulate_ckls: "simulate a mean-field CKLS ensemble and check the mean flow",
    ExperimentKind.simulate_vasicek: "cross-check Vasicek particles against the Gaussian flow",
    ExperimentKind.verify_harnack_ckls: "Monte Carlo check of the CKLS log-Harnack inequality",
    ExperimentKind.verify_harnack_vasicek: "quadrature check of the Vasicek log-Harnack inequality",
    ExperimentKind.verify_w1_contraction: "coupled check of the CKLS W1 contraction",
    ExperimentKind.verify_w2_entropy_contraction: "Gaussian flow check of W2 and entropy decay",
    ExperimentKind.verify_inverse_moment: "Monte Carlo check of the inverse-moment bounds",
    ExperimentKind.verify_yw: "check the Yamada-Watanabe smoothing bounds",
    ExperimentKind.verify_lemma_ine: "grid sweep of the log-ratio inequality",
    ExperimentKind.stationary_ckls: "estimate the CKLS invariant law",
}

for kind, help_text in _experiment_help.items():
    parser = sub_parsers.add_parser(kind.value, help=help_text)
    parser.add_argument("--config", type=Path, help="JSON experiment config (defaults are built in)")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out", type=Path, help="output directory")
    parser.set_defaults(kind=kind)

def dumpconfig(args):
    dump_default_config(args.settings)
    logging.info(f"Wrote default settings to '{args.settings}'")
    return ExitCode.success

def dump_yw(args):
    try:
        fam = YwFamily(args.epsilon)
    except InvalidParameter as e:
        raise ConfigError(str(e))
    xs = harness.yw_grid(args.epsilon, args.points)
    reporting.write_csv(args.output, yw_columns, fam.table(xs).tolist())
    logging.info(f"Wrote {xs.size} rows to '{args.output}'")
    return ExitCode.success

def run_experiment(args):
    settings = load_settings(read_config(args.settings))
    config = experiment.load_config(args.kind, args.config, args.seed, args.out)
    out_dir = config.output_directory or settings.output_directory

    result = harness.run(config, settings)
    reporting.write_run(out_dir, config.seed, config.to_dict(), result.report(config), result.columns, result.rows,
                        result.extra_series)
    return ExitCode.success if result.passed else ExitCode.check_failed

def main():
    start_time = time.perf_counter()
    args = main_parser.parse_args()

    if args.quiet:
        level = logging.ERROR
    elif args.verbose:
        level = 5
    elif args.debug:
        level = logging.DEBUG
    else:
        level = logging.INFO

    logging_kwargs = {}
    logging_kwargs["format"] = "[%(asctime)s] %(levelname)s: %(message)s"
    logging_kwargs["level"] = level
    if getattr(args.log_file, "name", None):
        file_handler = logging.FileHandler(args.log_file.with_suffix(".log"), mode="w")
        stream_handler = logging.StreamHandler()
        logging_kwargs["handlers"] = (file_handler, stream_handler)
    logging.basicConfig(**logging_kwargs)
    logging.debug(f"{program_description} {__version__} __main__...")

    result = ExitCode.numerical_error
    try:
        if args.emit_schema:
            print(json.dumps(experiment.SCHEMA, indent=2))
            result = ExitCode.success
        elif getattr(args, "kind", None) is not None:
            result = run_experiment(args)
        else:
            cmdcall = globals().get(args.command.replace("-", "_")) if args.command else None
            if cmdcall:
                result = cmdcall(args)
            else:
                logging.error("No command specified. Use `-h` to see help.")
                result = ExitCode.config_error
    except (ConfigError, InvalidParameter) as e:
        logging.error(str(e))
        result = ExitCode.config_error
    except LabError as e:
        logging.error(f"{type(e).__name__}: {e}")
        result = ExitCode.numerical_error
    except FloatingPointError as e:
        logging.error(f"Floating point failure: {e}")
        result = ExitCode.numerical_error
    except Exception as e:
        # Programming error
        logging.exception("Uncaught exception!", exc_info=e)
        result = ExitCode.numerical_error
    finally:
        end_time = time.perf_counter()
        delta = end_time - start_time
        if result == ExitCode.success:
            logging.info(f"mkvlab completed successfully in {delta:.2f}s.")
        elif result == ExitCode.check_failed:
            logging.error(f"mkvlab finished with failed checks in {delta:.2f}s.")
        else:
            logging.error(f"mkvlab exiting with errors in {delta:.2f}s.")
        sys.exit(int(result))

if __name__ == "__main__":
    main()
