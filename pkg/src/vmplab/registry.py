"""Serialisable descriptions of target models, so a checkpoint can rebuild
the exact model it was trained against."""

from __future__ import annotations

import json

import numpy as np

from .targets import (
    HpvData,
    LocationData,
    RandomEffectsData,
    TargetModel,
    make_conjugate_gaussian_model,
    make_hpv_model,
    make_location_model,
    make_random_effects_model,
)

__all__ = ["model_payload", "build_model"]


def model_payload(m: TargetModel) -> dict:
    """JSON-able description (id + data) sufficient to rebuild ``m``."""
    if m.name == "hpv":
        d = m.data
        return {
            "id": "hpv",
            "country": list(d.country),
            "Z": d.Z.tolist(),
            "N": d.N.tolist(),
            "Y": d.Y.tolist(),
            "T": d.T.tolist(),
            "fixed": m.meta["fixed"],
        }
    if m.name == "random_effects":
        return {"id": "random_effects", "Y": m.data.Y.tolist()}
    if m.name == "location":
        return {"id": "location", "data": json.loads(m.data.to_json())}
    if m.name == "conjugate_gaussian":
        return {"id": "conjugate_gaussian", "y": float(m.data["y"])}
    raise ValueError(f"no registry entry for model {m.name!r}")


def build_model(payload: dict) -> TargetModel:
    mid = payload.get("id")
    if mid == "hpv":
        data = HpvData(
            country=tuple(payload["country"]),
            Z=np.asarray(payload["Z"], int),
            N=np.asarray(payload["N"], int),
            Y=np.asarray(payload["Y"], int),
            T=np.asarray(payload["T"], float),
        )
        return make_hpv_model(data, fixed=payload.get("fixed"))
    if mid == "random_effects":
        return make_random_effects_model(RandomEffectsData(Y=np.asarray(payload["Y"], float)))
    if mid == "location":
        return make_location_model(LocationData.from_json(json.dumps(payload["data"])))
    if mid == "conjugate_gaussian":
        return make_conjugate_gaussian_model(float(payload["y"]))
    raise ValueError(f"unknown model id {mid!r}")


def param_names(m: TargetModel) -> dict:
    """Readable names for the constrained parameter blocks, keyed by block."""
    if m.name == "hpv":
        return {
            "theta": ["theta1", "theta2"],
            "delta": [f"delta_{c}" for c in m.data.country],
        }
    if m.name == "random_effects":
        J = m.meta["J"]
        return {"theta": [f"mu_{j}" for j in range(J)] + [f"sigma_{j}" for j in range(J)]}
    if m.name == "location":
        n = m.meta["n_latent"]
        coords = [f"x_{i}_{ax}" for i in range(n) for ax in ("0", "1")]
        return {"theta": coords, "delta": ["alpha_0", "alpha_1", "alpha_2"]}
    if m.name == "conjugate_gaussian":
        return {"theta": ["theta"]}
    names = {"theta": [f"theta_{i}" for i in range(m.theta.dim)]}
    if m.is_modular:
        names["delta"] = [f"delta_{i}" for i in range(m.delta.dim)]
    return names
