"""Blind source separation from third-order path-signature moments.

Subpackages by pipeline stage: ``paths`` (signatures and variation norms),
``ensembles`` (signal laws and coredinate moments), ``premetric`` (signal
and cause distances), ``inversion`` (whitening, contrast minimization,
recovery bounds), ``lab`` (scenario generation and robustness budgets),
``serialize``/``cli`` (I/O and command line).
"""

from .errors import (AlignmentError, DegenerateObservableError,
                     DegenerateSignalError, OptimizationError, ParseError,
                     SigsepError, SourceConditionError)
from .paths import (PiecewiseLinearPath, TruncatedSignature, canonicalize,
                    chen_product, concat, interpolate_discrete,
                    interpolate_on_dissection, signature3, variation_norm)
from .ensembles import (Coredinates, IntegrabilityReport, SignalEnsemble,
                        coredinates, coredinates_from_moments,
                        integrability_report, mean_stationarity_gap,
                        path_signatures, product_ensemble, pushforward_affine,
                        resample_ensemble, signature_moment, transform_moments)
from .premetric import (AffineMap, affine_residual_premetric, causal_premetric,
                        delta, hull_points, ic_defect, moment_sensitivity,
                        residual_from_deviations)
from .inversion import (AlignmentResult, ConstantsRecord, ContrastDomain,
                        DemixReport, OptimizerConfig, WhiteningResult,
                        align_monomial, contracted_statistics, contrast,
                        defect_shift_bound, estimate_deviance,
                        minimize_contrast, normalized_statistics,
                        perturbation_tolerance, relative_path_error,
                        theorem_constants, whiten)
from .lab import (ScenarioConfig, async_sample, beta2_budget, beta3_budget,
                  designed_source, estimation_sweep, exact_source, generate_source,
                  inject_additive_noise, inject_multiplicative_noise,
                  multiplicative_noise, offset_dissections, random_mixing,
                  rng_streams, run_scenario, sample_atoms, sampled_source,
                  stationary_noise)
from .serialize import (dump_csv, dump_jsonl, dump_report, load_ensemble,
                        parse_csv, parse_jsonl, save_ensemble)

__version__ = "0.1.0"
