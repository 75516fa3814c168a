use rand::Rng;

use super::TrainError;
use crate::compose::{waypoint_index, StepInputs};
use crate::craftworld::{featurize_sparse, Action, GridState, Symmetry, TaskKind};
use crate::datagen::{sorted, EpisodePair};
use crate::nn::SparseVec;
use crate::num::Scalar;

/// Featurized states of one pair, computed once up front.
#[derive(Debug, Clone)]
pub struct PairFeatures<S> {
    pub pair_id: u64,
    /// Training trajectory states `U_0..U_N`.
    pub u: Vec<SparseVec<S>>,
    /// Reference trajectory states `R_0..R_T`.
    pub r: Vec<SparseVec<S>>,
    /// Expert action indices along `U`.
    pub actions: Vec<u8>,
    /// Expert action indices along `R`, used when the roles are swapped.
    pub r_actions: Vec<u8>,
    pub multiset: Vec<TaskKind>,
}

impl<S> PairFeatures<S> {
    /// `(states, actions)` of the trajectory being imitated and of its guide.
    fn roles(&self, swap: bool) -> ((&[SparseVec<S>], &[u8]), &[SparseVec<S>]) {
        if swap {
            ((&self.r, &self.r_actions), &self.u)
        } else {
            ((&self.u, &self.actions), &self.r)
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dataset<S> {
    pairs: Vec<PairFeatures<S>>,
    /// Cumulative `U` timestep counts.
    offsets: Vec<usize>,
    /// Cumulative timestep counts over views `(pair, swap)`, ordered
    /// `(0,false), (0,true), (1,false), …`.
    view_offsets: Vec<usize>,
    /// Symmetries valid on this grid with their feature permutations.
    symmetries: Vec<(Symmetry, Vec<u32>)>,
    width: usize,
    height: usize,
}

/// One sample: pair index, timestep, the pair supplying its negatives, and
/// the view it is drawn from. `swap` imitates the reference trajectory with
/// the training one as guide; `sym` indexes [`Dataset::symmetries`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchItem {
    pub pair: usize,
    pub t: usize,
    pub negative: usize,
    pub swap: bool,
    pub sym: usize,
}

impl BatchItem {
    pub fn plain(pair: usize, t: usize, negative: usize) -> Self {
        BatchItem {
            pair,
            t,
            negative,
            swap: false,
            sym: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub items: Vec<BatchItem>,
}

/// Owned, view-transformed features of one training sample.
#[derive(Debug, Clone)]
pub struct Sample<S> {
    pub states: [SparseVec<S>; 6],
    pub action: usize,
    /// `(U'_0, U'_N, R'_0, R'_T)` of the negative pair, in the same view.
    pub negative: Option<[SparseVec<S>; 4]>,
}

impl<S> Sample<S> {
    pub fn inputs(&self) -> StepInputs<'_, S> {
        let [u0, ut, un, r0, ri, rt] = &self.states;
        StepInputs { u0, ut, un, r0, ri, rt }
    }
}

impl<S: Scalar> Dataset<S> {
    pub fn from_pairs(pairs: &[EpisodePair]) -> Result<Self, TrainError> {
        let first = pairs.first().ok_or(TrainError::EmptyDataset)?;
        let (width, height) = (first.train.world().width(), first.train.world().height());
        let mut out = Vec::with_capacity(pairs.len());
        let mut offsets = vec![0];
        let mut view_offsets = vec![0];
        for p in pairs {
            for ep in [&p.train, &p.reference] {
                if (ep.world().width(), ep.world().height()) != (width, height) {
                    return Err(TrainError::Config(format!("pair {} has a different grid size", p.pair_id)));
                }
            }
            let feats = |states: &[GridState]| states.iter().map(featurize_sparse).collect();
            let acts = |a: &[Action]| a.iter().map(|a| a.index() as u8).collect();
            out.push(PairFeatures {
                pair_id: p.pair_id,
                u: feats(&p.train.trajectory.states),
                r: feats(&p.reference.trajectory.states),
                actions: acts(&p.train.trajectory.actions),
                r_actions: acts(&p.reference.trajectory.actions),
                multiset: sorted(&p.train.tasks),
            });
            let (n, t) = (p.train.len(), p.reference.len());
            offsets.push(offsets.last().copied().unwrap_or(0) + n);
            let last = view_offsets.last().copied().unwrap_or(0);
            view_offsets.push(last + n);
            view_offsets.push(last + n + t);
        }
        let symmetries = Symmetry::for_grid(width, height)
            .into_iter()
            .map(|s| (s, s.feature_permutation(width, height).expect("valid symmetry")))
            .collect();
        Ok(Dataset {
            pairs: out,
            offsets,
            view_offsets,
            symmetries,
            width,
            height,
        })
    }

    pub fn pairs(&self) -> &[PairFeatures<S>] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn symmetries(&self) -> impl Iterator<Item = Symmetry> + '_ {
        self.symmetries.iter().map(|(s, _)| *s)
    }

    /// Timesteps of the training trajectories; one epoch covers this many samples.
    pub fn total_timesteps(&self) -> usize {
        *self.offsets.last().expect("offsets start at zero")
    }

    /// Timesteps over both roles of every pair.
    pub fn total_view_timesteps(&self) -> usize {
        *self.view_offsets.last().expect("offsets start at zero")
    }

    /// Maps a flat timestep index to `(pair, t)`.
    pub fn locate(&self, flat: usize) -> (usize, usize) {
        let pair = self.offsets.partition_point(|&o| o <= flat) - 1;
        (pair, flat - self.offsets[pair])
    }

    /// Maps a flat index over both roles to `(pair, swap, t)`.
    pub fn locate_view(&self, flat: usize) -> (usize, bool, usize) {
        let view = self.view_offsets.partition_point(|&o| o <= flat) - 1;
        (view / 2, view % 2 == 1, flat - self.view_offsets[view])
    }

    /// Uniform over all `(pair, t)` with `t < N`; with `augment`, uniform
    /// over both roles of every pair and over the grid's symmetries. Each
    /// sample's negative is the next batch member (cyclically) with a
    /// different task multiset, else the next member from a different pair,
    /// else the fallback pair `(pair + 1) mod len`.
    pub fn sample_batch<R: Rng>(&self, size: usize, augment: bool, rng: &mut R) -> Result<Batch, TrainError> {
        if self.total_timesteps() == 0 {
            return Err(TrainError::EmptyDataset);
        }
        let picks: Vec<BatchItem> = (0..size)
            .map(|_| {
                if augment {
                    let (pair, swap, t) = self.locate_view(rng.gen_range(0..self.total_view_timesteps()));
                    let sym = rng.gen_range(0..self.symmetries.len());
                    BatchItem {
                        pair,
                        t,
                        negative: 0,
                        swap,
                        sym,
                    }
                } else {
                    let (pair, t) = self.locate(rng.gen_range(0..self.total_timesteps()));
                    BatchItem::plain(pair, t, 0)
                }
            })
            .collect();
        let items = picks
            .iter()
            .enumerate()
            .map(|(i, &it)| {
                let others = (1..size).map(|d| picks[(i + d) % size].pair);
                let by_tasks = others
                    .clone()
                    .find(|&q| self.pairs[q].multiset != self.pairs[it.pair].multiset);
                let negative = by_tasks
                    .or_else(|| others.clone().find(|&q| q != it.pair))
                    .unwrap_or((it.pair + 1) % self.pairs.len());
                BatchItem { negative, ..it }
            })
            .collect();
        Ok(Batch { items })
    }

    /// Features of `item` in its view, with the waypoint from the true
    /// episode length.
    pub fn sample(&self, item: &BatchItem, k: usize, with_negative: bool) -> Result<Sample<S>, TrainError> {
        let (sym, perm) = self
            .symmetries
            .get(item.sym)
            .ok_or_else(|| TrainError::Config(format!("no symmetry {} on this grid", item.sym)))?;
        let tf = |v: &SparseVec<S>| {
            if *sym == Symmetry::IDENTITY {
                v.clone()
            } else {
                v.permuted(perm)
            }
        };
        let p = &self.pairs[item.pair];
        let ((u, actions), r) = p.roles(item.swap);
        let (n, t_ref) = (u.len() - 1, r.len() - 1);
        if item.t >= n {
            return Err(TrainError::Config(format!("timestep {} beyond episode of length {n}", item.t)));
        }
        let i = waypoint_index(item.t as i64, n as i64, t_ref as i64, k as i64)?;
        let action = Action::from_index(actions[item.t] as usize).expect("stored actions are valid");
        let negative = with_negative.then(|| {
            let ((nu, _), nr) = self.pairs[item.negative].roles(item.swap);
            [tf(&nu[0]), tf(&nu[nu.len() - 1]), tf(&nr[0]), tf(&nr[nr.len() - 1])]
        });
        Ok(Sample {
            states: [tf(&u[0]), tf(&u[item.t]), tf(&u[n]), tf(&r[0]), tf(&r[i]), tf(&r[t_ref])],
            action: sym.map_action(action).index(),
            negative,
        })
    }
}
