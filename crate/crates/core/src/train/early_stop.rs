/// Stops after `patience` consecutive epochs without a strict improvement.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<f64>,
    best_epoch: usize,
    stale: usize,
    epochs: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: None,
            best_epoch: 0,
            stale: 0,
            epochs: 0,
        }
    }

    /// Records one epoch's score; returns true if it is a new best.
    pub fn observe(&mut self, score: f64) -> bool {
        self.epochs += 1;
        if self.best.map_or(true, |b| score > b) {
            self.best = Some(score);
            self.best_epoch = self.epochs;
            self.stale = 0;
            true
        } else {
            self.stale += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.stale >= self.patience
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }

    /// 1-based epoch of the best score.
    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}
