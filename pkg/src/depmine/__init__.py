"""Statistically sound dependency rule and itemset mining."""

__version__ = "0.1.0"

from .data import (ContingencyTable2x2, Dataset, RulePattern, SetPattern, extract_cells,
                   extract_table, load_dataset, rule_pattern, set_pattern)
from .errors import (CapacityError, ConfigError, DepMineError, DomainError, ParseError,
                     UnknownAttributeError)
from .exact import (TestResult, binom_complete_p, binom_partial_p, chi2_p, double_binom_value_p,
                    fisher_p, fisher_p0, mi_p, multinomial_value_p, z_complete, z_partial)
from .itemsets import (bipartition_productive, independently_productive, is_nonredundant,
                       itemset_binom_p, itemset_chi2, self_sufficiency)
from .measures import (chi2_2x2, j_measure, leverage, lift, mutual_information_2x2, odds_ratio,
                       precision)
from .miner import MinerConfig, MiningReport, explain_rule, mine_rules
from .multitest import (adjust, adjusted_pvalues, error_rates, holdout_evaluate, layered_alphas,
                        min_attainable_fisher_p, testability_filter)
from .randomization import PermutationScheme, empirical_p, minp_adjust, randomize
from .redundancy import (judge_superfluous, negated_productivity_chi2, negated_productivity_fisher,
                         productivity_chi2, productivity_fisher)
