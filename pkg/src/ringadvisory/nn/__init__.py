from .tensor import Tensor, softmax
from .layers import PerceptronNet, LSTMCell, sample_categorical
from .optim import SGD, Adam

__all__ = ["Tensor", "softmax", "PerceptronNet", "LSTMCell", "sample_categorical", "SGD", "Adam"]
