"""Compare port-selection strategies on the default configuration."""

from fas_keygen.channel import SystemConfig, make_rng
from fas_keygen.optimizer import P1, P2
from fas_keygen.ports import (
    build_instance,
    fa_mrc_baseline,
    fa_opt_baseline,
    reweighted_solve,
    sliding_window_solve,
    traverse,
)


def main():
    for kind, mode in ((P1, "iid"), (P2, "correlated")):
        config = SystemConfig(eve_mode=mode)
        instance = build_instance(config, make_rng(config.seed))
        results = [
            traverse(kind, instance),
            sliding_window_solve(kind, instance),
            reweighted_solve(kind, instance),
            fa_opt_baseline(kind, instance),
            fa_mrc_baseline(kind, instance, rng=make_rng(config.seed, 1)),
        ]
        print(f"{mode} eavesdropper, M={config.M}, N={config.N}")
        for res in results:
            print(f"  {res.method:<16} ports {str(res.indices):<22} t={res.objective_t:.4f}  {res.kgr.bits:.5f} bits")


if __name__ == "__main__":
    main()
