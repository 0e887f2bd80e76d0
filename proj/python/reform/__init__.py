"""Python face of the reform numeric core.

The heavy lifting lives in the compiled ``_reform`` extension; this package
just re-exports it so both the installed wheel (module inside the package) and
the build tree (module next to the package on ``PYTHONPATH``) import the same
way.
"""

try:
    from ._reform import (  # type: ignore[attr-defined]
        bpr_loss,
        factor_average,
        hash_encode,
        inject_noise,
        kcore,
        mfa_forward,
        ndcg_at_k,
        paired_t_test,
        propagate,
        recall_at_k,
        regularized_incomplete_beta,
    )
except ImportError:  # build tree: extension is a sibling, not a submodule
    from _reform import (
        bpr_loss,
        factor_average,
        hash_encode,
        inject_noise,
        kcore,
        mfa_forward,
        ndcg_at_k,
        paired_t_test,
        propagate,
        recall_at_k,
        regularized_incomplete_beta,
    )

__all__ = [
    "bpr_loss",
    "factor_average",
    "hash_encode",
    "inject_noise",
    "kcore",
    "mfa_forward",
    "ndcg_at_k",
    "paired_t_test",
    "propagate",
    "recall_at_k",
    "regularized_incomplete_beta",
]
