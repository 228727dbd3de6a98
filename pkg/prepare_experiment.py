from pathlib import Path
import argparse
import logging
import sys

from micloc.errors import MiclocError
from micloc.prepare import prepare_experiment

if __name__ == "__main__":

    logging.basicConfig(level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s")

    parser = argparse.ArgumentParser(description="Prepare an experiment directory and config from a blueprint")
    parser.add_argument("experiment_name", type=str, help="Name of the experiment, used to identify it")
    parser.add_argument("--note", type=str, help="Notes about this experiment")
    parser.add_argument("--from_experiment", type=str, help="Existing experiment to copy and use as blueprint")
    parser.add_argument("--demo-audio", action="store_true", help="Synthesize the utterance WAVs the config references")
    parser.add_argument("--experiments-root", type=Path, default=Path("experiments"))

    args = parser.parse_args()

    try:
        prepare_experiment(
            args.experiment_name,
            note=args.note,
            from_experiment=args.from_experiment,
            demo_audio=args.demo_audio,
            experiments_root=args.experiments_root,
        )
    except MiclocError as e:
        logging.error(f"❌ {e}")
        sys.exit(2)
