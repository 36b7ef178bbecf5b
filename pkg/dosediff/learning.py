# License: BSD3

"""
Plumbing shared by the training loops: batching, the L1 objective,
learning rate schedule, divergence detection, loss curves and early
stopping.

The loops themselves live next to the models they train
(`dosediff.diffusion.training`, `dosediff.networks.encoder`,
`dosediff.networks.baseline`).  They expect a configuration object with
the attributes of `dosediff.formats.config.RunConfig`.
"""

from collections import namedtuple
import csv
import logging

import numpy as np
from tqdm import tqdm

from .internalutil import DosediffError, check
from .numerics.tensor import sub

logger = logging.getLogger(__name__)


class DivergenceError(DosediffError):
    """
    Training produced a non-finite loss
    """
    def __init__(self, step, loss):
        DosediffError.__init__(self, "training diverged at step %d "
                               "(loss = %r)" % (step, loss))
        self.step = step
        self.loss = loss


def l1_loss(pred, target):
    "mean absolute error between two tensors"
    return sub(pred, target).abs().mean()


def check_finite(value, step):
    "raise `DivergenceError` unless the loss value is finite"
    if not np.isfinite(value):
        raise DivergenceError(step, value)
    return value


def iterate_batches(n_items, batch_size, rng):
    """
    Index arrays for one epoch: a seeded permutation cut into batches
    (the last one possibly smaller)
    """
    check(batch_size >= 1, "batch size must be positive")
    order = rng.permutation(n_items)
    for start in range(0, n_items, batch_size):
        yield order[start:start + batch_size]


def learning_rate(config, epoch):
    """
    Step schedule: `lr` until `lr_drop_epoch` (0-based epochs), then
    `lr_dropped`.  A negative drop epoch never drops.
    """
    if 0 <= config.lr_drop_epoch <= epoch:
        return config.lr_dropped
    return config.lr


def progress(iterable, desc, total=None):
    "tqdm progress bar on stderr, silenced when we are not logging INFO"
    return tqdm(iterable, desc=desc, total=total, leave=False,
                disable=not logger.isEnabledFor(logging.INFO))


LossRow = namedtuple('LossRow', 'epoch step loss lr val_loss')


class LossCurve(object):
    """
    Training history: one row per optimisation step, with the
    validation loss filled in on the last step of each epoch
    """
    HEADER = list(LossRow._fields)

    def __init__(self):
        self.rows = []

    def __len__(self):
        return len(self.rows)

    def add(self, epoch, step, loss, lr):
        self.rows.append(LossRow(epoch, step, loss, lr, None))

    def set_val_loss(self, val_loss):
        "attach a validation loss to the latest row"
        if self.rows:
            self.rows[-1] = self.rows[-1]._replace(val_loss=val_loss)

    def losses(self):
        return np.array([row.loss for row in self.rows])

    def relative_drop(self, head=10, tail=10):
        """
        1 - (mean of the last `tail` losses / mean of the first `head`);
        0.6 means the loss went down by 60%
        """
        losses = self.losses()
        check(len(losses) >= 1, "empty loss curve")
        return 1.0 - losses[-tail:].mean() / losses[:head].mean()

    def dump(self, path):
        "write as CSV with 9 significant digits"
        with open(path, 'w', newline='', encoding='utf-8') as stream:
            writer = csv.writer(stream, lineterminator='\n')
            writer.writerow(self.HEADER)
            for row in self.rows:
                writer.writerow([row.epoch, row.step,
                                 '%.9g' % row.loss, '%.9g' % row.lr,
                                 '' if row.val_loss is None
                                 else '%.9g' % row.val_loss])


class EarlyStopping(object):
    """
    Stop once the validation loss has not improved for `patience`
    epochs; a patience of 0 never stops
    """
    def __init__(self, patience):
        self.patience = patience
        self.best = np.inf
        self.stale = 0

    def update(self, val_loss):
        "record an epoch's validation loss; True if we should stop"
        if val_loss < self.best:
            self.best = val_loss
            self.stale = 0
        else:
            self.stale += 1
        return self.patience > 0 and self.stale >= self.patience
