# Copyright 2026 The rdest Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Training loop: objective, epochs, early stopping and loss history."""

import collections
import csv
import logging
import math

import numpy as np

from . import dataset
from . import networks
from . import optim
from . import tensor
from . import utils
from . import weights


logger = logging.getLogger(__name__)

NETWORK_FOR_TARGET = {
    dataset.TARGET_MAP: networks.KIND_G,
    dataset.TARGET_BPP: networks.KIND_F_BITS,
    dataset.TARGET_DIST: networks.KIND_F_DIST,
}

TARGET_FOR_NETWORK = dict((v, k) for k, v in NETWORK_FOR_TARGET.items())

HISTORY_COLUMNS = ['epoch', 'train_data_loss', 'train_total_loss',
                   'val_loss']

HistoryEntry = collections.namedtuple('HistoryEntry', HISTORY_COLUMNS)


class TrainConfig(object):

    """Hyperparameters of one training run."""

    def __init__(self, target_kind, max_epochs, batch_size=32,
                 learning_rate=1e-4, weight_decay=1e-4, patience=10, seed=0,
                 beta1=0.9, beta2=0.999, eps=1e-8):
        if target_kind not in NETWORK_FOR_TARGET:
            raise ValueError('unknown target kind {!r}'.format(target_kind))
        if batch_size < 1:
            raise ValueError('batch size must be at least 1')
        if patience < 1:
            raise ValueError('patience must be at least 1')
        if max_epochs < 1:
            raise ValueError('max epochs must be at least 1')
        if learning_rate <= 0 or weight_decay < 0:
            raise ValueError('learning rate must be positive and weight '
                             'decay non-negative')
        self.target_kind = target_kind
        self.max_epochs = max_epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.patience = patience
        self.seed = seed
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps

    @property
    def network_kind(self):
        return NETWORK_FOR_TARGET[self.target_kind]


def _predict(net, inputs, training):
    """Raw network output for a batch; never clamped."""
    if net.kind == networks.KIND_G:
        i_hat, q_hat = inputs
        return net.forward(tensor.Tensor(i_hat), tensor.Tensor(q_hat),
                           training)
    (i_hat,) = inputs
    return net.forward(tensor.Tensor(i_hat), training)


def _data_loss(net, prediction, targets):
    if net.kind == networks.KIND_G:
        return tensor.loss_mse(prediction, tensor.Tensor(targets))
    return tensor.loss_mae(prediction, tensor.Tensor(targets))


def objective(net, inputs, targets, weight_decay):
    """Returns (total, data loss) tensors for one batch.

    The data loss is the mean squared error of G or the mean absolute
    error of F; total adds weight_decay * sum(theta ** 2) over every
    trainable parameter.
    """
    data_loss = _data_loss(net, _predict(net, inputs, True), targets)
    trainable = [p.tensor for p in net.parameters(trainable_only=True)]
    penalty = tensor.l2_penalty(trainable, weight_decay)
    return tensor.add(data_loss, penalty), data_loss


def _check_finite(value, what, epoch):
    if not math.isfinite(value):
        raise optim.TrainingError('non-finite {} in epoch {}'.format(
            what, epoch))


def train_epoch(net, samples, cfg, state, epoch):
    """Runs one Adam step per batch over the whole training split.

    The l2 gradient 2 * weight_decay * theta enters once, through adam_step.

    Returns:
      (mean data loss, mean total loss), weighted by batch size.

    Raises:
      optim.TrainingError on a non-finite loss or gradient.
    """
    trainable = net.parameters(trainable_only=True)
    data_sum = 0.0
    total_sum = 0.0
    for inputs, targets in dataset.batches(samples, cfg.batch_size,
                                           cfg.seed, epoch):
        optim.zero_grads(trainable)
        total, data_loss = objective(net, inputs, targets, cfg.weight_decay)
        _check_finite(total.item(), 'loss', epoch)
        data_loss.backward()
        optim.adam_step(trainable, [p.grad for p in trainable], state,
                        cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps,
                        cfg.weight_decay)
        count = len(targets)
        data_sum += data_loss.item() * count
        total_sum += total.item() * count
    return data_sum / len(samples), total_sum / len(samples)


def evaluate_loss(net, samples, batch_size=32):
    """Mean data loss of the unclamped network over samples."""
    loss_sum = 0.0
    for inputs, targets in dataset.sequential_batches(samples, batch_size):
        loss = _data_loss(net, _predict(net, inputs, False), targets)
        loss_sum += loss.item() * len(targets)
    return loss_sum / len(samples)


class EarlyStopping(object):

    """Tracks the best validation loss and the stale epochs since."""

    def __init__(self, patience):
        if patience < 1:
            raise ValueError('patience must be at least 1')
        self.patience = patience
        self.best_loss = None
        self.best_epoch = None
        self.best_state = None
        self.stale = 0

    def update(self, epoch, loss, snapshot):
        """Records an epoch; returns True when training should stop.

        snapshot is called only when loss improves on the best so far.
        """
        if self.best_loss is None or loss < self.best_loss:
            self.best_loss = loss
            self.best_epoch = epoch
            self.best_state = snapshot()
            self.stale = 0
        else:
            self.stale += 1
        return self.stale >= self.patience


def train(net, train_set, val_set, cfg, validate=None):
    """Trains net until early stopping or cfg.max_epochs.

    Args:
      net: networks.Network matching cfg.target_kind
      train_set, val_set: dataset.SampleSet
      validate: optional callable (net, epoch) -> validation loss, replacing
        the default evaluate_loss on val_set

    Returns:
      (weights.ModelWeights of the best validation epoch, list of
       HistoryEntry). net holds the best weights on return.

    Raises:
      optim.TrainingError on a non-finite loss.
    """
    if net.kind != cfg.network_kind:
        raise ValueError('{} network cannot learn {} targets'.format(
            net.kind, cfg.target_kind))
    if not len(train_set) or (validate is None and not len(val_set)):
        raise ValueError('training and validation sets must be non-empty')
    if validate is None:
        def validate(net, epoch):
            return evaluate_loss(net, val_set, cfg.batch_size)

    state = optim.AdamState(net.parameters(trainable_only=True))
    stopper = EarlyStopping(cfg.patience)
    history = []
    for epoch in range(1, cfg.max_epochs + 1):
        data_loss, total_loss = train_epoch(net, train_set, cfg, state, epoch)
        val_loss = float(validate(net, epoch))
        _check_finite(val_loss, 'validation loss', epoch)
        history.append(HistoryEntry(epoch, data_loss, total_loss, val_loss))
        stop = stopper.update(epoch, val_loss, net.state_dict)
        logger.info('epoch %d: train %.6g (total %.6g) val %.6g stale %d',
                    epoch, data_loss, total_loss, val_loss, stopper.stale)
        if stop:
            logger.info('no improvement for %d epochs, best epoch %d',
                        cfg.patience, stopper.best_epoch)
            break

    net.load_state(stopper.best_state)
    return (weights.ModelWeights.from_network(net, cfg.seed,
                                              stopper.best_epoch),
            history)


def history_path(weights_path):
    return weights_path + '.history.csv'


def write_history(history, path):
    with utils.atomic_write(path, text=True) as output:
        writer = csv.writer(output, lineterminator='\n')
        writer.writerow(HISTORY_COLUMNS)
        for entry in history:
            writer.writerow([entry.epoch] +
                            [repr(float(v)) for v in entry[1:]])
