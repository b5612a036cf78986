# neural/schedule.py

import math
from typing import Callable, List


class DecaySchedule:
    """Epoch clock for the learning rate.

    The rate is multiplied by ``decay_factor`` after every epoch whose
    validation perplexity does not beat the best seen so far.
    """

    def __init__(self, learning_rate: float, decay_factor: float = 0.96,
                 best_perplexity: float = math.inf, epoch: int = 0):
        self.learning_rate = learning_rate
        self.decay_factor = decay_factor
        self.best_perplexity = best_perplexity
        self.epoch = epoch

        # Callbacks for decay events: (epoch, new learning rate)
        self.on_decay: List[Callable[[int, float], None]] = []

    def end_epoch(self, valid_perplexity: float) -> bool:
        """Close an epoch; returns True when it improved on the best perplexity."""
        self.epoch += 1
        if valid_perplexity < self.best_perplexity:
            self.best_perplexity = valid_perplexity
            return True

        self.learning_rate *= self.decay_factor
        for callback in self.on_decay:
            callback(self.epoch, self.learning_rate)
        return False

    def add_decay_listener(self, callback: Callable[[int, float], None]):
        self.on_decay.append(callback)
