"""Batch command-line front door.

Subcommands mirror the pipeline stages and hand data to each other
through files, so any stage can be replaced by another producer of the
same format:

    synth       generate a synthetic cohort (images, manifest, scores,
                predictions) for tests and demos
    preprocess  images -> unit-range tensor files + failure list
    split       manifest -> person-grouped train/val/test assignment
    gate        quality scores -> kept participants + chi-square summary
    fuse        per-eye predictions -> fused per-participant predictions
    evaluate    predictions + manifest -> metric report with bootstrap CIs

Exit codes: 0 ok, 2 configuration error, 3 data error. Per-image
preprocessing failures do not abort the batch; they are listed in
``failures.csv`` and exit 0.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import dataset, fusion, quality, reports, synth, tensorio
from .bootstrap import BootstrapConfig
from .exceptions import ConfigError, DataError, FunduskitError, NoMaskFound
from .imaging import EnhanceParams, PreprocessConfig, preprocess, preprocess_to_bytes

log = logging.getLogger("funduskit")

EVALUATABLE_TASKS = ("age", "sex", "smoking", "bmi", "sbp", "dbp", "hba1c", "cholesterol")


@dataclass
class PipelineConfig:
    """Every tunable of the batch pipeline; file keys match field names."""

    manifest: str | None = None
    images: str | None = None
    output: str = "out"
    mask_threshold: float = 10.0
    target_size: int = 587
    enhance_enabled: bool = True
    enhance_alpha: float = 4.0
    enhance_beta: float = -4.0
    enhance_gamma: float = 128.0
    enhance_sigma_fraction: float = 1.0 / 30.0
    output_format: str = "fpt"  # "fpt" (unit tensors) or "png" (byte stage)
    quality_tau: float = 0.5
    ratio_train: float = 0.60
    ratio_val: float = 0.20
    ratio_test: float = 0.20
    seed: int = 0
    jobs: int = 1
    bootstrap_replicates: int = 1000
    bootstrap_level: float = 0.95
    tasks: str = ",".join(EVALUATABLE_TASKS)
    groupings: str = ",".join(reports.GROUPINGS)
    split_name: str = "test"

    @property
    def ratios(self) -> tuple[float, float, float]:
        return (self.ratio_train, self.ratio_val, self.ratio_test)

    @property
    def task_list(self) -> list[str]:
        return [t.strip() for t in self.tasks.split(",") if t.strip()]

    @property
    def grouping_list(self) -> list[str]:
        return [g.strip() for g in self.groupings.split(",") if g.strip()]

    def preprocess_config(self) -> PreprocessConfig:
        return PreprocessConfig(
            mask_threshold=self.mask_threshold,
            target_size=self.target_size,
            enhance=EnhanceParams(
                alpha=self.enhance_alpha, beta=self.enhance_beta,
                gamma=self.enhance_gamma, sigma_fraction=self.enhance_sigma_fraction,
            ),
            enhance_enabled=self.enhance_enabled,
        )

    def bootstrap_config(self) -> BootstrapConfig:
        return BootstrapConfig(replicates=self.bootstrap_replicates,
                               level=self.bootstrap_level, seed=self.seed)


_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


def _coerce(name: str, raw: str, target_type) -> object:
    if target_type is bool:
        lowered = raw.strip().lower()
        if lowered in _BOOL_TRUE:
            return True
        if lowered in _BOOL_FALSE:
            return False
        raise ConfigError(f"config key {name}: expected a boolean, got {raw!r}")
    try:
        return target_type(raw)
    except ValueError:
        raise ConfigError(
            f"config key {name}: expected {target_type.__name__}, got {raw!r}"
        ) from None


def load_config_file(path: str | Path) -> dict:
    """Parse a ``key = value`` config file ('#' starts a comment)."""
    fields = {f.name: f for f in dataclasses.fields(PipelineConfig)}
    values: dict = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigError(f"cannot read config file {path}: {err}") from None
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{line_no}: expected key = value, got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in fields:
            raise ConfigError(f"{path}:{line_no}: unknown config key {key!r}")
        field_type = type(getattr(PipelineConfig(), key)) if fields[key].default is not None else str
        values[key] = _coerce(key, raw.strip(), field_type)
    return values


def build_config(args: argparse.Namespace) -> PipelineConfig:
    """Config file first, then every command-line override on top."""
    values: dict = {}
    if args.config:
        values.update(load_config_file(args.config))
    field_names = {f.name for f in dataclasses.fields(PipelineConfig)}
    for key, value in vars(args).items():
        if key in field_names and value is not None:
            values[key] = value
    cfg = PipelineConfig(**values)
    _validate(cfg)
    return cfg


def _validate(cfg: PipelineConfig) -> None:
    if abs(sum(cfg.ratios) - 1.0) > 1e-9 or any(r < 0 for r in cfg.ratios):
        raise ConfigError(f"split ratios {cfg.ratios} must be non-negative and sum to 1")
    if not 0.0 < cfg.quality_tau < 1.0:
        raise ConfigError(f"quality_tau must lie in (0, 1), got {cfg.quality_tau}")
    if cfg.output_format not in ("fpt", "png"):
        raise ConfigError(f"output_format must be fpt or png, got {cfg.output_format!r}")
    if cfg.jobs < 1:
        raise ConfigError("jobs must be >= 1")
    if cfg.bootstrap_replicates < 1:
        raise ConfigError("bootstrap_replicates must be >= 1")
    if not 0.0 < cfg.bootstrap_level < 1.0:
        raise ConfigError("bootstrap_level must lie in (0, 1)")
    unknown = set(cfg.task_list) - set(EVALUATABLE_TASKS)
    if unknown:
        raise ConfigError(f"unknown tasks {sorted(unknown)}; valid: {EVALUATABLE_TASKS}")
    unknown = set(cfg.grouping_list) - set(reports.GROUPINGS)
    if unknown:
        raise ConfigError(f"unknown groupings {sorted(unknown)}; valid: {reports.GROUPINGS}")


def _require_file(path: str | None, what: str) -> Path:
    if path is None:
        raise ConfigError(f"{what} is required")
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"{what} {p} does not exist")
    return p


def _out_dir(cfg: PipelineConfig) -> Path:
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_records(cfg: PipelineConfig) -> list[dataset.ParticipantRecord]:
    manifest = _require_file(cfg.manifest, "manifest")
    return dataset.load_manifest(manifest)


def _image_root(cfg: PipelineConfig) -> Path:
    if cfg.images is not None:
        return _require_file(cfg.images, "image root")
    return _require_file(cfg.manifest, "manifest").parent


# --- subcommands ---------------------------------------------------------------


def cmd_preprocess(cfg: PipelineConfig) -> int:
    records = _load_records(cfg)
    root = _image_root(cfg)
    out = _out_dir(cfg)
    tensor_dir = out / "tensors"
    tensor_dir.mkdir(exist_ok=True)
    pcfg = cfg.preprocess_config()
    suffix = ".fpt" if cfg.output_format == "fpt" else ".png"

    jobs = []
    for r in records:
        for eye in quality.EYES:
            ref = r.image_for(eye)
            if ref is not None:
                jobs.append((r.participant_id, eye, root / ref,
                             tensor_dir / f"{r.participant_id}_{eye}{suffix}"))
    jobs.sort()

    def run_one(job) -> tuple[str, str] | None:
        pid, eye, src, dst = job
        try:
            img = tensorio.read_image(src)
        except (OSError, ValueError) as err:
            return str(src), f"unreadable: {err}"
        try:
            if cfg.output_format == "fpt":
                tensorio.write_tensor(dst, preprocess(img, pcfg))
            else:
                tensorio.write_image(dst, preprocess_to_bytes(img, pcfg))
        except NoMaskFound as err:
            return str(src), f"no_mask_found: {err}"
        return None

    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            outcomes = list(pool.map(run_one, jobs))
    else:
        outcomes = [run_one(j) for j in jobs]

    failures = sorted(o for o in outcomes if o is not None)
    with open(out / "failures.csv", "w", encoding="utf-8") as fh:
        fh.write("path,reason\n")
        for path, reason in failures:
            fh.write(f"{path},{reason}\n")
    log.info("preprocessed %d image(s), %d failure(s)", len(jobs) - len(failures),
             len(failures))
    return 0


def cmd_split(cfg: PipelineConfig) -> int:
    records = _load_records(cfg)
    assignment = dataset.grouped_split(records, cfg.ratios, cfg.seed)
    out = _out_dir(cfg)
    assignment.save(out / "split.csv")
    log.info("split sizes: %s", assignment.sizes())
    return 0


def cmd_gate(cfg: PipelineConfig, scores_path: str) -> int:
    records = _load_records(cfg)
    scores = quality.read_scores(_require_file(scores_path, "scores file"))
    labels = quality.apply_threshold(scores, cfg.quality_tau)
    kept = quality.filter_both_eyes_good(records, labels)

    out = _out_dir(cfg)
    quality.write_labels(out / "quality_labels.csv", labels)
    with open(out / "kept.csv", "w", encoding="utf-8") as fh:
        fh.write("participant_id\n")
        for r in kept:
            fh.write(f"{r.participant_id}\n")

    table = quality.ContingencyTable2x2.from_labels(labels)
    with open(out / "chi_square.txt", "w", encoding="utf-8") as fh:
        fh.write("left/right quality-rate independence (Pearson chi-square, 1 dof)\n")
        fh.write(f"L_good={table.a} L_bad={table.b} R_good={table.c} R_bad={table.d}\n")
        try:
            result = quality.chi_square_independence(table)
        except DataError as err:
            # A zero marginal (e.g. every image good) leaves the test
            # undefined; the gate's kept list is still valid.
            fh.write(f"statistic=undefined ({err})\n")
            log.info("kept %d of %d participants; chi-square undefined: %s",
                     len(kept), len(records), err)
        else:
            fh.write(f"statistic={result.statistic!r}\n")
            fh.write(f"p_value={result.p_value!r}\n")
            log.info("kept %d of %d participants; chi2=%.4f p=%.3g",
                     len(kept), len(records), result.statistic, result.p_value)
    return 0


def cmd_fuse(cfg: PipelineConfig, predictions_path: str) -> int:
    predictions = fusion.read_predictions(_require_file(predictions_path, "predictions file"))
    result = fusion.fuse_all(predictions)
    out = _out_dir(cfg)
    fusion.write_predictions(out / "fused.csv", result.fused)
    log.info("fused %d pair(s), skipped %d single-eye participant-task group(s)",
             len(result.fused), result.skipped_single_eye)
    return 0


def _read_kept(path: Path) -> set[str]:
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != "participant_id":
        raise DataError(f"{path}: expected header participant_id")
    return {line.strip() for line in lines[1:] if line.strip()}


def cmd_evaluate(cfg: PipelineConfig, predictions_path: str,
                 kept_path: str | None, split_file: str | None,
                 scatter: bool) -> int:
    records = _load_records(cfg)
    predictions = fusion.read_predictions(_require_file(predictions_path, "predictions file"))

    known_ids = {r.participant_id for r in records}
    dangling = sorted({p.participant_id for p in predictions} - known_ids)
    if dangling:
        raise DataError(f"{len(dangling)} predicted participant(s) not in manifest, "
                        f"e.g. {dangling[:5]}")
    if split_file is not None:
        assignment = dataset.SplitAssignment.load(_require_file(split_file, "split file"))
        conflicts = [p.participant_id for p in predictions
                     if p.split and assignment.assignments.get(p.participant_id) != p.split]
        if conflicts:
            raise DataError(f"{len(conflicts)} prediction row(s) disagree with the "
                            f"split file, e.g. {sorted(set(conflicts))[:5]}")
    if kept_path is not None:
        kept_ids = _read_kept(_require_file(kept_path, "kept file"))
        predictions = [p for p in predictions if p.participant_id in kept_ids]

    bundle = reports.subgroup_report(
        predictions, records, cfg.task_list, cfg.grouping_list,
        cfg.bootstrap_config(), split=cfg.split_name, workers=cfg.jobs,
    )
    out = _out_dir(cfg)
    reports.write_report(out / "report.csv", bundle)
    with open(out / "skipped.txt", "w", encoding="utf-8") as fh:
        for line in bundle.skipped:
            fh.write(line + "\n")

    if scatter:
        records_by_id = {r.participant_id: r for r in records}
        selected = [p for p in predictions
                    if cfg.split_name in (None, "all") or p.split == cfg.split_name]
        for task in cfg.task_list:
            if task in fusion.CLASSIFICATION_TASKS:
                continue
            fused = fusion.fuse_all([p for p in selected if p.task == task]).fused
            pairs = [(reports.truth_value(records_by_id[p.participant_id], task), p.value)
                     for p in fused
                     if reports.truth_value(records_by_id[p.participant_id], task) is not None]
            if pairs:
                truths, values = zip(*pairs)
                reports.write_scatter(out / f"scatter_{task}.csv", truths, values)

    log.info("wrote %d report row(s); %d combination(s) skipped",
             len(bundle.rows), len(bundle.skipped))
    return 0


def cmd_synth(cfg: PipelineConfig, participants: int, image_size: int) -> int:
    out = _out_dir(cfg)
    scfg = synth.SynthConfig(participants=participants, seed=cfg.seed,
                             image_size=image_size, ratios=cfg.ratios)
    paths = synth.generate_dataset(out, scfg)
    log.info("synthetic cohort of %d participants under %s", participants, out)
    for name, path in paths.items():
        log.info("  %s: %s", name, path)
    return 0


# --- argument parsing ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="funduskit",
        description="Batch pipeline for fundus-image preprocessing, quality "
                    "gating, splitting, fusion, and bootstrap evaluation.",
    )
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("--seed", type=int, help="global RNG seed")
    parser.add_argument("--jobs", type=int, help="worker threads for batch stages")
    parser.add_argument("--output", help="output directory")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="images -> tensor files")
    p.add_argument("--manifest", help="manifest CSV")
    p.add_argument("--images", help="image root (default: manifest directory)")
    p.add_argument("--target-size", dest="target_size", type=int)
    p.add_argument("--mask-threshold", dest="mask_threshold", type=float)
    p.add_argument("--no-enhance", dest="enhance_enabled", action="store_false",
                   default=None, help="crop-only ablation path")
    p.add_argument("--format", dest="output_format", choices=("fpt", "png"))

    p = sub.add_parser("split", help="manifest -> person-grouped split")
    p.add_argument("--manifest", help="manifest CSV")
    p.add_argument("--ratios", help="train,val,test e.g. 0.6,0.2,0.2")

    p = sub.add_parser("gate", help="quality scores -> kept participants")
    p.add_argument("--manifest", help="manifest CSV")
    p.add_argument("--scores", required=True, help="quality scores CSV")
    p.add_argument("--tau", dest="quality_tau", type=float)

    p = sub.add_parser("fuse", help="per-eye predictions -> fused predictions")
    p.add_argument("--predictions", required=True)

    p = sub.add_parser("evaluate", help="predictions -> metric report")
    p.add_argument("--manifest", help="manifest CSV")
    p.add_argument("--predictions", required=True)
    p.add_argument("--kept", help="kept-participant file from gate")
    p.add_argument("--split-file", dest="split_file",
                   help="split CSV to cross-check prediction split tags")
    p.add_argument("--split", dest="split_name",
                   help="subset to evaluate: train/val/test/all")
    p.add_argument("--tasks", help="comma-separated task list")
    p.add_argument("--groupings", help="comma-separated grouping list")
    p.add_argument("--replicates", dest="bootstrap_replicates", type=int)
    p.add_argument("--scatter", action="store_true",
                   help="write truth,prediction files for regression tasks")

    p = sub.add_parser("synth", help="generate a synthetic cohort")
    p.add_argument("--participants", type=int, default=40)
    p.add_argument("--image-size", dest="image_size", type=int, default=256)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s")
    try:
        if getattr(args, "ratios", None):
            parts = [p.strip() for p in args.ratios.split(",")]
            if len(parts) != 3:
                raise ConfigError(f"--ratios needs three values, got {args.ratios!r}")
            args.ratio_train, args.ratio_val, args.ratio_test = (
                _coerce("ratios", part, float) for part in parts
            )
        cfg = build_config(args)
        if args.command == "preprocess":
            return cmd_preprocess(cfg)
        if args.command == "split":
            return cmd_split(cfg)
        if args.command == "gate":
            return cmd_gate(cfg, args.scores)
        if args.command == "fuse":
            return cmd_fuse(cfg, args.predictions)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, args.predictions, args.kept,
                                args.split_file, args.scatter)
        if args.command == "synth":
            return cmd_synth(cfg, args.participants, args.image_size)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except FunduskitError as err:
        print(f"data error: {err}", file=sys.stderr)
        return 3


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
