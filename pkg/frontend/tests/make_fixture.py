"""Train and cache the small checkpoint the e2e harness serves.

Deliberately light so a cold cache costs a few minutes; the file is content
addressed only by this budget, so bump CACHE_TAG when changing it.
"""

import pathlib
import sys

CACHE_TAG = "v3"
CACHE = pathlib.Path(__file__).parent / ".cache" / f"hpv-{CACHE_TAG}.ckpt"


def main() -> None:
    if CACHE.exists():
        print(str(CACHE))
        return
    from vmplab.targets import make_hpv_model
    from vmplab.vtrain import RhoSpec, TrainConfig, save_checkpoint, train_smi_vmp

    m = make_hpv_model()
    rho = RhoSpec.uniform_over_bounds(m)
    cfg = TrainConfig(iterations=2000, mc_samples=8, psi_batch=4, seed=0, lr_decay=0.02)
    bfs, _ = train_smi_vmp(m, rho, cfg)
    CACHE.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(bfs, CACHE, m, rho=rho, extra={"purpose": "e2e-fixture"})
    print(str(CACHE))


if __name__ == "__main__":
    sys.exit(main())
