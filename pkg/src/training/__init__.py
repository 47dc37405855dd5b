from src.training.abstract_trainer import NodeClassifierTrainer
from src.training.bilevel_trainer import BilevelTrainer
from src.training.branch_trainer import BranchTrainer, build_gcn, build_labelwise
from src.training.config import TrainConfig, TrainReport
from src.training.experiments import benchmark, depth_sweep, similarity_study
from src.training.pipeline import (
    VARIANTS,
    TrainedModels,
    TrainResult,
    evaluate,
    resolve_variant,
    run_ablation,
    train,
)
from src.training.pseudo_label_trainer import PseudoLabelTrainer, train_pseudo_predictor
