"""Contrastive architecture search with a learned pairwise comparator."""

from .controller import (PolicyParams, SampleTrace, entropy, init_policy,
                         log_prob, reinforce_update, sample)
from .metrics import (RankEval, kendall_tau, nac_scores, percentile_rank,
                      ranking_risk, spearman_corr, surrogate_risk)
from .nac import (ArchCodec, LabeledPair, NacComparator, NacConfig, NacParams,
                  build_pairs, compare, compare_many, embed, gcn_forward,
                  init_nac, load_nac, norm_adjacency, save_nac, train_nac)
from .optim import AdamState, adam_step, init_adam
from .oracle import (BenchTable, ConstantComparator, OracleComparator,
                     PerfRecord, SyntheticOracle, TableOracle, label_pair,
                     load_table, noisy_eval, save_table, synth_perf)
from .search import (SearchConfig, SearchError, SearchState, bootstrap,
                     explore_data, pool_arch_count, run_search, update_baseline)
from .space import (Architecture, SpaceSpec, arch_key, enumerate_space,
                    longest_path_len, pad, random_arch, spec_hash, unpad,
                    validate)
from .tensor import Tensor, bce, grad_check, sigmoid, xavier_uniform

__version__ = "0.1.0"
