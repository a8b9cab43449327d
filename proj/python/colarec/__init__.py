"""Generative recommendation with collaborative GIDs.

The pipeline stages mirror the ``colarec`` command-line tool and share its
configuration keys::

    cfg = colarec.Config("smoke.conf", run="runs/a", interactions="x.tsv", content="c.tsv")
    colarec.prepare(cfg)
    colarec.pretrain_cf(cfg)
    colarec.build_gid(cfg)
    colarec.train(cfg)
    rows = colarec.evaluate(cfg)
"""

from ._colarec import (
    ColarecError,
    Config,
    beam_search,
    build_gid,
    build_gids,
    constrained_kmeans,
    evaluate,
    filter_kcore,
    make_synthetic,
    ndcg_at_n,
    prepare,
    pretrain_cf,
    propagate,
    recall_at_n,
    recommend,
    split_counts,
    sweep,
    train,
)

__all__ = [
    "ColarecError",
    "Config",
    "beam_search",
    "build_gid",
    "build_gids",
    "constrained_kmeans",
    "evaluate",
    "filter_kcore",
    "make_synthetic",
    "ndcg_at_n",
    "prepare",
    "pretrain_cf",
    "propagate",
    "recall_at_n",
    "recommend",
    "split_counts",
    "sweep",
    "train",
]
