"""Command-line entry point. Batch commands run in-process; ``serve`` exposes
a trained checkpoint over HTTP. Exit codes: 0 success, 1 runtime failure,
2 bad arguments or config."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

__all__ = ["main"]


class ModelSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")
    id: Literal["hpv", "random_effects", "location", "conjugate_gaussian"]
    path: Optional[str] = None  # hpv: alternative CSV
    y: float = 1.0  # conjugate observation
    I: int = Field(default=50, ge=1)
    J: int = Field(default=50, ge=1)
    n_anchor: int = Field(default=30, ge=2)
    n_float: int = Field(default=20, ge=1)
    n_held_out: int = Field(default=5, ge=0)
    float_logit_shift: float = 0.0
    sim_seed: int = 0
    psi_true: Optional[dict[str, float]] = None


class TrainSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")
    iterations: int = Field(default=10000, ge=1)
    mc_samples: int = Field(default=16, ge=1)
    psi_batch: int = Field(default=8, ge=1)
    lr_peak: float = Field(default=3e-3, gt=0)
    lr_decay: float = Field(default=0.5, gt=0)


class FlowSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")
    num_layers: int = Field(default=4, ge=1)
    knots: int = Field(default=10, ge=2)
    hidden_width: int = Field(default=5, ge=1)
    hidden_depth: int = Field(default=3, ge=1)
    interval: float = Field(default=5.0, gt=0)


class OptimizeSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")
    starts: int = Field(default=4, ge=1)
    iterations: int = Field(default=300, ge=1)
    lr: float = Field(default=0.05, gt=0)
    n_mc: int = Field(default=64, ge=1)
    tail: int = Field(default=20, ge=1)


class ChainSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")
    n_samples: int = Field(default=2000, ge=1)
    burn_in: int = Field(default=2000, ge=0)
    thin: int = Field(default=1, ge=1)
    step_size: float = Field(default=0.25, gt=0)
    inner_steps: int = Field(default=50, ge=1)


class FitConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    model: ModelSpec
    rho: Optional[dict[str, list]] = None  # component -> [kind, args...]
    train: TrainSpec = TrainSpec()
    flow: FlowSpec = FlowSpec()
    psi: Optional[dict[str, float]] = None  # fixed psi: dedicated fit
    checkpoint: str = "vmp.ckpt"


class SelectConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    checkpoint: str
    criterion: Literal["elbo", "elpd_y", "elpd_z", "pmse"] = "elbo"
    optimize: OptimizeSpec = OptimizeSpec()


class SampleConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    checkpoint: str
    psi: dict[str, float]
    n: int = Field(default=1000, ge=1, le=100_000)


class McmcConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    model: Optional[ModelSpec] = None
    checkpoint: Optional[str] = None
    psi: dict[str, float]
    chain: ChainSpec = ChainSpec()


class EvalConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    checkpoint: str
    criterion: Literal["elbo", "elpd_y", "elpd_z", "pmse"] = "elbo"
    component: str
    values: list[float]
    psi: dict[str, float]
    n_mc: int = Field(default=256, ge=1)


class ReproduceConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    experiment: Literal["conjugate", "synth-small", "synth-large", "hpv-smi", "location-pmse"]
    scale: float = Field(default=1.0, gt=0)


class ServeConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    checkpoint: str
    host: str = "127.0.0.1"
    port: int = Field(default=8000, ge=1, le=65535)


_CONFIG_TYPES = {
    "fit": FitConfig,
    "select": SelectConfig,
    "sample": SampleConfig,
    "mcmc": McmcConfig,
    "eval": EvalConfig,
    "reproduce": ReproduceConfig,
    "serve": ServeConfig,
}


class CliError(Exception):
    def __init__(self, message, code=1):
        super().__init__(message)
        self.code = code


def _apply_thread_env():
    n = os.environ.get("VMP_LAB_THREADS")
    if not n:
        return
    if not n.isdigit() or int(n) < 1:
        raise CliError(f"VMP_LAB_THREADS must be a positive integer, got {n!r}", code=2)
    os.environ.setdefault("OMP_NUM_THREADS", n)
    if int(n) == 1:
        flags = os.environ.get("XLA_FLAGS", "")
        if "intra_op" not in flags:
            os.environ["XLA_FLAGS"] = (flags + " --xla_cpu_multi_thread_eigen=false").strip()


def _build_model(spec: ModelSpec):
    from .targets import (
        make_conjugate_gaussian_model,
        make_hpv_model,
        make_location_model,
        make_random_effects_model,
        load_hpv_data,
        simulate_location_data,
        simulate_random_effects,
    )

    if spec.id == "hpv":
        return make_hpv_model(load_hpv_data(spec.path))
    if spec.id == "conjugate_gaussian":
        return make_conjugate_gaussian_model(spec.y)
    rng = np.random.default_rng(spec.sim_seed)
    if spec.id == "random_effects":
        return make_random_effects_model(simulate_random_effects(rng, spec.I, spec.J, spec.psi_true))
    return make_location_model(
        simulate_location_data(
            rng,
            n_anchor=spec.n_anchor,
            n_float=spec.n_float,
            n_held_out=spec.n_held_out,
            float_logit_shift=spec.float_logit_shift,
        )
    )


def _cmd_fit(cfg: FitConfig, seed: int, out: Path):
    from .vtrain import RhoSpec, TrainConfig, save_checkpoint, save_trace_csv, train_smi_vmp, train_vmp, train_vp

    m = _build_model(cfg.model)
    tc = TrainConfig(seed=seed, **cfg.train.model_dump())
    fkw = cfg.flow.model_dump()
    if cfg.psi is not None:
        state, traces = train_vp(m, cfg.psi, tc, **fkw)
        rho = RhoSpec.point(cfg.psi)
    else:
        rho = (
            RhoSpec({k: tuple(v) for k, v in cfg.rho.items()})
            if cfg.rho
            else RhoSpec.uniform_over_bounds(m)
        )
        if m.is_modular:
            state, traces = train_smi_vmp(m, rho, tc, **fkw)
        else:
            state, traces = train_vmp(m, rho, tc, **fkw)
    if isinstance(traces, tuple):
        save_trace_csv(out / "loss_trace.csv", list(traces), ["stage1_loss", "stage2_loss"])
    else:
        save_trace_csv(out / "loss_trace.csv", [traces], ["loss"])
    save_checkpoint(state, out / cfg.checkpoint, m, rho=rho, extra={"seed": seed})
    print(f"wrote {out / cfg.checkpoint}")


def _cmd_select(cfg: SelectConfig, seed: int, out: Path):
    from .hyperselect import OptimizeConfig, optimize_psi, save_opt_trace_csv
    from .vtrain import load_checkpoint

    state, m, _ = load_checkpoint(cfg.checkpoint)
    res = optimize_psi(
        state, m, cfg.criterion, OptimizeConfig(seed=seed, **cfg.optimize.model_dump())
    )
    save_opt_trace_csv(out / "psi_opt_trace.csv", res)
    (out / "psi_hat.json").write_text(
        json.dumps({"criterion": cfg.criterion, "psi_hat": res.psi_hat, "loss": res.loss}, indent=2)
        + "\n"
    )
    print(json.dumps(res.psi_hat))


def _cmd_sample(cfg: SampleConfig, seed: int, out: Path):
    from .service import _check_psi, _draw_constrained
    from .vtrain import load_checkpoint
    from .mcmc import save_samples_csv
    from fastapi import HTTPException

    state, m, _ = load_checkpoint(cfg.checkpoint)
    try:
        vec = _check_psi(m, cfg.psi)
    except HTTPException as e:
        raise CliError(e.detail, code=2) from e
    cols, mat, _ = _draw_constrained(state, m, vec, cfg.n, seed)
    save_samples_csv(out / "samples.csv", mat, cols)
    print(f"wrote {out / 'samples.csv'}")


def _cmd_mcmc(cfg: McmcConfig, seed: int, out: Path):
    from .mcmc import ChainConfig, nested_smi_mcmc, rwm, save_samples_csv
    from .registry import param_names
    from .targets.base import gbi_log_joint

    if (cfg.model is None) == (cfg.checkpoint is None):
        raise CliError("give exactly one of model / checkpoint", code=2)
    if cfg.checkpoint is not None:
        from .vtrain import load_checkpoint

        _, m, _ = load_checkpoint(cfg.checkpoint)
    else:
        m = _build_model(cfg.model)
    cc = ChainConfig(
        n_samples=cfg.chain.n_samples,
        burn_in=cfg.chain.burn_in,
        thin=cfg.chain.thin,
        step_size=cfg.chain.step_size,
        seed=seed,
    )
    names = param_names(m)
    if m.is_modular:
        res = nested_smi_mcmc(m, cfg.psi, cc, inner_steps=cfg.chain.inner_steps)
        mat = np.concatenate([res["theta"], res["delta"]], axis=1)
        cols = [f"u_{c}" for c in names["theta"] + names["delta"]]
    else:
        import jax.numpy as jnp

        psi = {k: float(v) for k, v in cfg.psi.items()}

        def logp(u):
            theta, lj = m.theta.constrain(u)
            return gbi_log_joint({"theta": theta}, psi, m) + lj

        mat = rwm(logp, np.zeros(m.theta.dim), cc).samples
        cols = [f"u_{c}" for c in names["theta"]]
    save_samples_csv(out / "mcmc_samples.csv", mat, cols)
    print(f"wrote {out / 'mcmc_samples.csv'}")


def _cmd_eval(cfg: EvalConfig, seed: int, out: Path):
    from .evalx import save_table_csv, sweep
    from .vtrain import load_checkpoint

    state, m, _ = load_checkpoint(cfg.checkpoint)
    if cfg.component not in m.psi_names:
        raise CliError(f"unknown psi component {cfg.component!r}", code=2)
    grid = []
    for v in cfg.values:
        psi = dict(cfg.psi)
        psi[cfg.component] = v
        grid.append(psi)
    rows = sweep(state, m, cfg.criterion, grid, n_mc=cfg.n_mc, seed=seed)
    save_table_csv(out / "sweep.csv", rows, meta={"component": cfg.component})
    print(f"wrote {out / 'sweep.csv'}")


def _cmd_reproduce(cfg: ReproduceConfig, seed: int, out: Path):
    from .experiments import run_experiment

    run_experiment(cfg.experiment, out, seed=seed, scale=cfg.scale)
    print(f"wrote report to {out}")


def _cmd_serve(cfg: ServeConfig, seed: int, out: Path):
    import uvicorn

    from .service import create_app

    app = create_app(cfg.checkpoint)
    uvicorn.run(app, host=cfg.host, port=cfg.port, log_level="warning")


_COMMANDS = {
    "fit": _cmd_fit,
    "select": _cmd_select,
    "sample": _cmd_sample,
    "mcmc": _cmd_mcmc,
    "eval": _cmd_eval,
    "reproduce": _cmd_reproduce,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="vmplab")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=".")
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    try:
        _apply_thread_env()
        cfg_path = Path(args.config)
        if not cfg_path.is_file():
            raise CliError(f"config file not found: {cfg_path}", code=2)
        try:
            raw = json.loads(cfg_path.read_text())
        except json.JSONDecodeError as e:
            raise CliError(f"config is not valid JSON: {e}", code=2) from e
        try:
            cfg = _CONFIG_TYPES[args.command].model_validate(raw)
        except ValidationError as e:
            raise CliError(f"bad config: {e}", code=2) from e
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _COMMANDS[args.command](cfg, args.seed, out)
        return 0
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except Exception as e:  # noqa: BLE001 - CLI boundary
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
