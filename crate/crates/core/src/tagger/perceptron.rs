use std::collections::HashMap;

#[derive(Debug, Clone, Copy, Default)]
struct Param {
    weight: f64,
    // accumulated weight over all finished snapshots
    total: f64,
    // instance at which `weight` was last changed
    stamp: u64,
}

/// Multiclass perceptron whose final weights are the mean of the weight
/// vector after every training instance.
///
/// Classes are dense indices `0..n_classes`. Ties in [`predict`] go to the
/// lowest index.
///
/// [`predict`]: AveragedPerceptron::predict
#[derive(Debug, Clone)]
pub struct AveragedPerceptron {
    n_classes: usize,
    feature_ids: HashMap<String, usize>,
    params: Vec<Param>,
    instances: u64,
}

impl AveragedPerceptron {
    pub fn new(n_classes: usize) -> Self {
        AveragedPerceptron {
            n_classes,
            feature_ids: HashMap::new(),
            params: Vec::new(),
            instances: 0,
        }
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Number of instances seen so far.
    pub fn instances(&self) -> u64 {
        self.instances
    }

    fn feature_id(&mut self, feature: &str) -> usize {
        if let Some(&id) = self.feature_ids.get(feature) {
            return id;
        }
        let id = self.feature_ids.len();
        self.feature_ids.insert(feature.to_string(), id);
        self.params
            .resize(self.params.len() + self.n_classes, Param::default());
        id
    }

    /// Current (non-averaged) weight.
    pub fn weight(&self, feature: &str, class: usize) -> f64 {
        self.feature_ids
            .get(feature)
            .map_or(0.0, |&id| self.params[id * self.n_classes + class].weight)
    }

    /// Per-class scores under the current weights.
    pub fn scores<S: AsRef<str>>(&self, features: &[S]) -> Vec<f64> {
        let mut scores = vec![0.0; self.n_classes];
        for f in features {
            if let Some(&id) = self.feature_ids.get(f.as_ref()) {
                let row = &self.params[id * self.n_classes..(id + 1) * self.n_classes];
                for (s, p) in scores.iter_mut().zip(row) {
                    *s += p.weight;
                }
            }
        }
        scores
    }

    pub fn predict<S: AsRef<str>>(&self, features: &[S]) -> usize {
        argmax(&self.scores(features))
    }

    /// Record one training instance; weights move only on a mistake.
    pub fn update<S: AsRef<str>>(&mut self, truth: usize, guess: usize, features: &[S]) {
        self.instances += 1;
        if truth == guess {
            return;
        }
        let now = self.instances;
        for f in features {
            let id = self.feature_id(f.as_ref());
            for (class, delta) in [(truth, 1.0), (guess, -1.0)] {
                let p = &mut self.params[id * self.n_classes + class];
                p.total += (now - p.stamp) as f64 * p.weight;
                p.stamp = now;
                p.weight += delta;
            }
        }
    }

    /// Averaged weights, keeping only nonzero entries.
    pub fn averaged(&self) -> HashMap<String, Vec<(usize, f64)>> {
        let t = self.instances;
        let mut out = HashMap::with_capacity(self.feature_ids.len());
        if t == 0 {
            return out;
        }
        for (feature, &id) in &self.feature_ids {
            let row = &self.params[id * self.n_classes..(id + 1) * self.n_classes];
            let entries: Vec<(usize, f64)> = row
                .iter()
                .enumerate()
                .filter_map(|(class, p)| {
                    let total = p.total + (t - p.stamp + 1) as f64 * p.weight;
                    let avg = total / t as f64;
                    (avg != 0.0).then_some((class, avg))
                })
                .collect();
            if !entries.is_empty() {
                out.insert(feature.clone(), entries);
            }
        }
        out
    }
}

/// Index of the maximum; the first one wins ties.
pub(crate) fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}
