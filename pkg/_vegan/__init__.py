from .config import CONFIG, load_experiment_config
from .corruption import CorruptionSpec, corrupt, drop, shift
from .data import CausalDataset, GeneratorConfig, PreprocSpec, generate, load_csv, preprocess, split
from .harness import ExperimentConfig, ExperimentReport, emit_report, run_experiment
from .metrics import eps_cate, mmd_rbf, pehe, volatility
from .networks import build_tarnet, build_vegan, encode, predict_ite
from .trainer import TrainConfig, train_tarnet, train_tarnet_plus, train_vegan, train_vegan_i

__all__ = [
    "CONFIG",
    "CausalDataset",
    "CorruptionSpec",
    "ExperimentConfig",
    "ExperimentReport",
    "GeneratorConfig",
    "PreprocSpec",
    "TrainConfig",
    "build_tarnet",
    "build_vegan",
    "corrupt",
    "drop",
    "emit_report",
    "encode",
    "eps_cate",
    "generate",
    "load_csv",
    "load_experiment_config",
    "mmd_rbf",
    "pehe",
    "predict_ite",
    "preprocess",
    "run_experiment",
    "shift",
    "split",
    "train_tarnet",
    "train_tarnet_plus",
    "train_vegan",
    "train_vegan_i",
    "volatility",
]
