"""Run every indcal subcommand on a small problem and validate the JSON it
writes, plus the shipped example configs, against schemas/."""

import json
import pathlib
import subprocess
import sys
import tempfile

import jsonschema
from referencing import Registry, Resource


def load_registry(schema_dir):
    schemas = {}
    for path in sorted(schema_dir.glob("*.schema.json")):
        doc = json.loads(path.read_text())
        schemas[path.name] = doc
    registry = Registry().with_resources(
        (doc["$id"], Resource.from_contents(doc)) for doc in schemas.values()
    )
    return schemas, registry


def main():
    tool, schema_dir, config_dir = (pathlib.Path(a) for a in sys.argv[1:4])
    schemas, registry = load_registry(schema_dir)
    failures = []

    def check(path, schema_name):
        validator = jsonschema.Draft202012Validator(schemas[schema_name], registry=registry)
        doc = json.loads(pathlib.Path(path).read_text())
        errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.path))
        for err in errors:
            failures.append(f"{path} ({schema_name}): {'/'.join(map(str, err.path))}: {err.message}")
        status = "ok" if not errors else f"{len(errors)} error(s)"
        print(f"{schema_name:28s} {path.name}: {status}")

    def run(*args):
        proc = subprocess.run([str(tool), *map(str, args)], capture_output=True, text=True)
        if proc.returncode != 0:
            sys.exit(f"command failed ({proc.returncode}): {' '.join(map(str, args))}\n{proc.stderr}")

    for name, schema in [
        ("train.json", "train_config.schema.json"),
        ("eval.json", "eval_options.schema.json"),
        ("heteroscedastic.json", "generator_spec.schema.json"),
        ("game.json", "game_config.schema.json"),
        ("markov.json", "markov_config.schema.json"),
        ("sweep.json", "sweep_config.schema.json"),
    ]:
        check(config_dir / name, schema)

    with tempfile.TemporaryDirectory() as tmp:
        t = pathlib.Path(tmp)
        (t / "train.json").write_text('{"hidden": [8, 8], "epochs": 3}')
        (t / "game.json").write_text(
            '{"refit_interval": 100, "psi": {"hidden": [8], "steps_per_refit": 10}}')
        run("gen", "--kind", "heteroscedastic", "--n", "600", "--dim", "3", "--out", t / "data")
        run("gen", "--kind", "credit", "--n", "600", "--out", t / "credit")
        run("train", "--train", t / "data/train.csv", "--val", t / "data/val.csv",
            "--config", t / "train.json", "--out", t / "model")
        run("eval", "--checkpoint", t / "model/checkpoint.json", "--data", t / "data/test.csv",
            "--val", t / "data/val.csv", "--recalibrate", "--out", t / "eval")
        run("simulate", "--oracle", t / "credit/generator.json", "--stream", t / "credit/test.csv",
            "--generator", t / "credit/generator.json", "--config", t / "game.json",
            "--out", t / "game")
        run("markov", "--checkpoint", t / "model/checkpoint.json", "--data", t / "data/test.csv",
            "--out", t / "markov")

        check(t / "data/generator.json", "generator.schema.json")
        check(t / "credit/generator.json", "generator.schema.json")
        check(t / "model/checkpoint.json", "checkpoint.schema.json")
        check(t / "model/certificate.json", "certificate.schema.json")
        check(t / "eval/report.json", "report.schema.json")
        check(t / "eval/checkpoint_recalibrated.json", "checkpoint.schema.json")
        check(t / "game/game_summary.json", "game_summary.schema.json")
        check(t / "markov/markov.json", "markov.schema.json")

    for f in failures:
        print("FAIL", f)
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
