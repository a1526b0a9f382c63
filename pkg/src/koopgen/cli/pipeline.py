"""Pipeline stages behind the CLI subcommands.

Each stage writes into its own subdirectory of the output directory together
with a ``manifest.json`` that echoes the configuration and hashes every file
it wrote.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import apps, edmd, io
from ..datagen import generate
from ..dictionary import evaluate_many
from ..errors import BasisMismatch, IntegrityError
from .config import ExperimentConfig

log = logging.getLogger("koopgen")

STAGE_FORMAT = "koopgen.stage/1"


def _stage_manifest(directory: Path, stage: str, cfg: ExperimentConfig, files, extra=None):
    manifest = {
        "format": STAGE_FORMAT,
        "stage": stage,
        "config": cfg.to_dict(),
        "config_hash": cfg.data_hash(),
        "files": {Path(p).name: io.sha256_file(p) for p in files},
    }
    if extra:
        manifest.update(extra)
    io.write_json(directory / "manifest.json", manifest)


def dataset_dir(cfg: ExperimentConfig) -> Path:
    return Path(cfg.output) / "dataset"


def run_generate(cfg: ExperimentConfig, threads=None, backend=None):
    flow = cfg.build_flow(backend)
    d = cfg.build_dictionary()
    ts = generate(flow, d, cfg.build_plan(), cfg.build_gen_config(), strict=cfg.strict,
                  threads=threads)
    out = dataset_dir(cfg)
    io.save_training_set(ts, out, d, {"config": cfg.to_dict(), "config_hash": cfg.data_hash()})
    log.info("wrote %s (%d x %d, %d dropped)", out, ts.M, ts.N, len(ts.dropped))
    return ts, d


def load_dataset(path):
    """Training set plus the configuration echoed in its manifest."""
    ts, d, manifest = io.load_training_set(path)
    if "config" not in manifest:
        raise IntegrityError(f"{path}: manifest carries no configuration")
    cfg = ExperimentConfig.from_dict(manifest["config"])
    if manifest.get("config_hash") != cfg.data_hash():
        raise IntegrityError(f"{path}: manifest config hash does not match its configuration")
    if d.basis_id != cfg.build_dictionary().basis_id:
        raise BasisMismatch(f"{path}: dictionary differs from the configured one")
    return ts, d, cfg


@dataclass
class Learned:
    gm: edmd.GeneratorMatrix
    km: edmd.KoopmanMatrix | None
    L_log: np.ndarray | None
    baseline_diag: dict | None


def run_learn(cfg: ExperimentConfig, ts, d, baseline_s=None, backend=None) -> Learned:
    out = Path(cfg.output) / "learn"
    out.mkdir(parents=True, exist_ok=True)
    gm = edmd.fit_generator(ts)
    files = [io.write_csv(out / "L.csv", gm.L),
             io.write_json(out / "eigen_L.json", edmd.eigen(gm.L, "generator").report()),
             io.write_json(out / "dictionary.json", d.manifest())]
    extra = {"generator": {"residual": gm.residual, "rank_used": gm.rank_used,
                           "basis_id": gm.basis_id}}
    km = L_log = diag = None
    if baseline_s is not None:
        km = edmd.fit_koopman(cfg.build_flow(backend), d, cfg.build_plan(), baseline_s)
        L_log, diag = edmd.log_baseline(km)
        files += [io.write_csv(out / "K.csv", km.K),
                  io.write_csv(out / "L_log_re.csv", L_log.real),
                  io.write_csv(out / "L_log_im.csv", L_log.imag),
                  io.write_json(out / "eigen_K.json", edmd.eigen(km.K, "koopman").report()),
                  io.write_json(out / "eigen_L_log.json",
                                edmd.eigen(L_log, "log-baseline").report())]
        extra["koopman"] = {"s": km.s, "residual": km.residual, "rank_used": km.rank_used,
                            "log_diagnostics": diag}
    _stage_manifest(out, "learn", cfg, files, extra)
    log.info("wrote %s", out)
    return Learned(gm, km, L_log, diag)


def _table_files(out: Path, d, report, tag):
    files = []
    for c in report.coordinates:
        k = c.coordinate + 1
        if tag == "logfree":
            files.append(io.write_table_csv(out / f"f{k}_logfree.csv", c.table_re))
            files.append(io.write_table_csv(out / f"f{k}_logfree_im.csv", c.table_im))
        else:
            files.append(io.write_table_csv(out / f"f{k}_logbaseline_re.csv", c.table_re))
            files.append(io.write_table_csv(out / f"f{k}_logbaseline_im.csv", c.table_im))
    return files


def run_identify(cfg: ExperimentConfig, d, learned: Learned):
    out = Path(cfg.output) / "identify"
    out.mkdir(parents=True, exist_ok=True)
    vf = cfg.build_field()
    free = apps.identify_field(learned.gm, d, vf=vf, domain=cfg.domain,
                               eval_per_axis=cfg.eval_per_axis)
    files = _table_files(out, d, free, "logfree")
    metrics = {"log_free": free.summary()}
    base = None
    if learned.km is not None:
        base = apps.identify_field_log_baseline(learned.km, d, vf=vf, domain=cfg.domain,
                                                eval_per_axis=cfg.eval_per_axis)
        files += _table_files(out, d, base, "logbaseline")
        metrics["log_baseline"] = base.summary()
        metrics["error_ratio_baseline_over_logfree"] = (
            base.max_error / free.max_error if free.max_error > 0 else float("inf"))
    files.append(io.write_json(out / "identify_metrics.json", metrics))
    _stage_manifest(out, "identify", cfg, files)
    log.info("wrote %s", out)
    return free, base


def run_lyapunov(cfg: ExperimentConfig, d, learned: Learned, theta_file=None):
    out = Path(cfg.output) / "lyapunov"
    out.mkdir(parents=True, exist_ok=True)
    gm = learned.gm
    plan = cfg.build_plan()
    if theta_file is None:
        cand = apps.fit_lyapunov(gm, d, plan, eval_per_axis=cfg.eval_per_axis)
        source = "fit"
    else:
        theta = io.read_csv(theta_file).reshape(-1)
        cand = apps.candidate_from_theta(gm, d, plan, theta, cfg.eval_per_axis)
        source = str(theta_file)
    verdict = apps.verify_candidate(cand, gm, d, plan, cfg.puncture, cfg.eval_per_axis)
    theta = cand.coefficients
    grid = apps.evaluation_grid(cfg.domain, cfg.eval_per_axis)
    Z = evaluate_many(d, grid)
    poly = apps.polynomial_string(d, theta)
    summary = verdict.to_json()
    summary.update({
        "theta_source": source,
        "polynomial": poly,
        "fit_residual": cand.fit_residual,
        "reversed_lie_at_origin": cand.value_at_origin,
        "forward_lie_at_origin": cand.forward_value_at_origin,
        "lie_grid_report": cand.lie_grid_report,
        "note": ("reversed_lie_at_origin = -Z_N(0) L theta is the Lie derivative of V "
                 "along the time-reversed field; the fit itself targets "
                 "Z_N(x) L theta = |x|^2 for the forward field."),
    })
    files = [io.write_csv(out / "theta.csv", theta[:, None]),
             io.write_json(out / "verdict.json", summary),
             io.write_grid_csv(out / "grid_V.csv", grid, Z @ theta),
             io.write_grid_csv(out / "grid_reversed_lie.csv", grid, -(Z @ (gm.L @ theta)))]
    (out / "V_polynomial.txt").write_text(poly + "\n")
    files.append(out / "V_polynomial.txt")
    _stage_manifest(out, "lyapunov", cfg, files)
    log.info("wrote %s", out)
    return cand, verdict
