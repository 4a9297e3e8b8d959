"""Sparse multiple kernel learning by proximal minimization of a smoothed dual.

Core pieces: a kernel bank (`kernels`), loss conjugates (`losses`), the
block soft-threshold operator (`prox`), the Newton inner solver (`inner`),
the outer proximal training loop (`solver`), duality-gap stopping
(`duality`), a shrinkage/thresholding baseline (`ist`), dataset utilities
(`data`), a scaling benchmark harness (`bench`), and a FastAPI service with
a thin CLI on top.
"""

from .bench import BenchPlan, run_bench
from .data import Dataset, load, split, standardize, synth_ringnorm, synth_sparse_mkl
from .duality import GapReport, dual_objective, dual_projection, primal_objective, relative_gap
from .inner import DualIterate, al_gradient, al_hessian, al_objective, newton_inner
from .ist import IstState, ist_solve, ist_step
from .kernels import (BankConfig, GramMatrix, GramStack, KernelSpec,
                      build_kernel_bank, compute_gram, cross_gram, k_inner,
                      k_norm, random_kernel_bank)
from .losses import ConjugateEval, LossSpec, conjugate_eval, hinge_conjugate_linear, loss_value
from .model_io import load_model, model_from_dict, model_to_dict, save_model
from .prox import soft_threshold
from .solver import (Diagnostics, MklModel, TraceRow, c_correspondence,
                     outer_update, predict, predict_on_data, train)
from .state import GammaSchedule, SolverConfig, SolverState

__version__ = "0.1.0"
