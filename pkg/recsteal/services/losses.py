"""
Loss Functions

Pairwise (BPR, margin hinge) and pointwise (logistic) losses with their
derivatives. Every ln(sigmoid) term goes through softplus so large score
gaps never overflow.
"""
import numpy as np

from ..models.config_models import PairLoss


def softplus(x):
    """ln(1 + e^x), stable for any magnitude."""
    return np.logaddexp(0.0, x)


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=np.float64)))


def loss_bpr(r_pos, r_neg):
    """-ln sigmoid(r_pos - r_neg)."""
    return softplus(-(np.asarray(r_pos, dtype=np.float64) - r_neg))


def loss_hinge(r_pos, r_neg, m: float):
    """max(0, m - (r_pos - r_neg))."""
    return np.maximum(0.0, m - (np.asarray(r_pos, dtype=np.float64) - r_neg))


def loss_logistic(r, label):
    """Binary cross-entropy of sigmoid(r) against a {0, 1} label."""
    r = np.asarray(r, dtype=np.float64)
    label = np.asarray(label, dtype=np.float64)
    return label * softplus(-r) + (1.0 - label) * softplus(r)


def loss_logistic_grad(r, label):
    """d loss_logistic / d r."""
    return sigmoid(r) - label


def pair_loss(kind: PairLoss, diff, margin: float):
    """Pairwise loss as a function of the score gap r_pos - r_neg."""
    if PairLoss(kind) is PairLoss.BPR:
        return softplus(-np.asarray(diff, dtype=np.float64))
    return np.maximum(0.0, margin - np.asarray(diff, dtype=np.float64))


def pair_loss_grad(kind: PairLoss, diff, margin: float):
    """d pair_loss / d diff (hinge uses the zero subgradient at the kink)."""
    diff = np.asarray(diff, dtype=np.float64)
    if PairLoss(kind) is PairLoss.BPR:
        return -sigmoid(-diff)
    return np.where(margin - diff > 0, -1.0, 0.0)
