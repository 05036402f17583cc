from .model_io import ModelFormatError, deserialize_model, load_model, save_model, serialize_model
from .multiclass import MulticlassModel, OneVsRestSMO, predict, train_multiclass
from .smo import (
    BinaryModel,
    ConvergenceWarning,
    SMOClassifier,
    TrainParams,
    decision_value,
    dual_objective,
    kkt_violations,
    train_binary,
)

__all__ = [
    "BinaryModel",
    "ConvergenceWarning",
    "ModelFormatError",
    "MulticlassModel",
    "OneVsRestSMO",
    "SMOClassifier",
    "TrainParams",
    "decision_value",
    "deserialize_model",
    "dual_objective",
    "kkt_violations",
    "load_model",
    "predict",
    "save_model",
    "serialize_model",
    "train_binary",
    "train_multiclass",
]
