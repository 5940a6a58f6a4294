//! Destruction/reconstruction search over query-to-LLM assignments.
//!
//! The search starts from the two extreme assignments (every query on its
//! cheapest LLM, every query on its most accurate LLM), then walks two
//! solutions towards each other: one repeatedly gives up cost, the other
//! repeatedly buys accuracy, each step sized by a grid over the span between
//! the extremes. After every perturbation a repair pass restores local
//! non-domination, and every repaired state is offered to the archive.
//!
//! Ties are broken deterministically. Among equally cheap LLMs the more
//! accurate wins; among equally accurate LLMs the cheaper wins; destruction
//! prefers the query whose move costs least on the other objective. Remaining
//! ties go to the lowest query and LLM index.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    evaluate_unchecked, CostMatrix, Matrix, ObjectivePoint, PredictionMatrix, Solution,
    SolutionArchive,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Number of grid steps between the two extreme solutions.
    pub grid_n: usize,
    pub max_iterations: usize,
    /// Recorded with results; the search itself breaks ties deterministically.
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            grid_n: 50,
            max_iterations: 200,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_n == 0 {
            return Err(Error::InvalidParameter("grid_n must be at least 1".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Release cost.
    Cost,
    /// Gain predicted accuracy.
    Accuracy,
}

/// Reassignment of one query away from its current LLM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Move {
    pub query: usize,
    pub to_llm: usize,
    pub delta_cost: f64,
    pub delta_acc: f64,
    pub score: f64,
}

/// Best scored moves of one query.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct QueryMoves {
    /// Cost-increasing, accuracy-increasing move with the highest gain per unit cost.
    pub positive: Option<Move>,
    /// Cost-decreasing, accuracy-decreasing move losing the least accuracy per unit saved.
    pub negative: Option<Move>,
}

/// Borrowed view of one problem instance.
#[derive(Clone, Copy)]
struct Instance<'a> {
    p: &'a Matrix,
    c: &'a Matrix,
}

impl<'a> Instance<'a> {
    fn new(p: &'a PredictionMatrix, c: &'a CostMatrix) -> Result<Self> {
        if !p.same_shape(c) {
            return Err(Error::Shape(format!(
                "prediction matrix is {}x{} but cost matrix is {}x{}",
                p.rows(),
                p.cols(),
                c.rows(),
                c.cols()
            )));
        }
        if c.rows() == 0 || c.cols() == 0 {
            return Err(Error::InvalidInstance(
                "need at least one query and one LLM".into(),
            ));
        }
        Ok(Instance { p, c })
    }

    fn n(&self) -> usize {
        self.c.rows()
    }

    fn m(&self) -> usize {
        self.c.cols()
    }

    fn check_solution(&self, s: &Solution) -> Result<()> {
        if s.assignment().len() != self.n() {
            return Err(Error::Shape(format!(
                "solution covers {} queries, instance has {}",
                s.assignment().len(),
                self.n()
            )));
        }
        if s.assignment().iter().any(|&k| k >= self.m()) {
            return Err(Error::Shape("solution references an unknown LLM".into()));
        }
        Ok(())
    }

    fn solution(&self, assignment: Vec<usize>) -> Solution {
        let obj = self.evaluate(&assignment);
        Solution::from_parts(assignment, obj)
    }

    fn evaluate(&self, assignment: &[usize]) -> ObjectivePoint {
        evaluate_unchecked(assignment, self.c, self.p)
    }

    /// Cheapest LLM for query `i`; ties go to higher predicted accuracy, then lower index.
    fn cheapest(&self, i: usize) -> usize {
        let (c, p) = (self.c.row(i), self.p.row(i));
        (1..self.m()).fold(0, |best, k| {
            if c[k] < c[best] || (c[k] == c[best] && p[k] > p[best]) {
                k
            } else {
                best
            }
        })
    }

    /// Most accurate LLM for query `i`; ties go to lower cost, then lower index.
    fn most_accurate(&self, i: usize) -> usize {
        let (c, p) = (self.c.row(i), self.p.row(i));
        (1..self.m()).fold(0, |best, k| {
            if p[k] > p[best] || (p[k] == p[best] && c[k] < c[best]) {
                k
            } else {
                best
            }
        })
    }

    /// Best move for query `i` that loses nothing and gains something; `None`
    /// if the current LLM is not dominated among the query's options.
    fn improving_move(&self, i: usize, cur: usize) -> Option<usize> {
        let (c, p) = (self.c.row(i), self.p.row(i));
        let mut best: Option<usize> = None;
        for k in 0..self.m() {
            let (da, dc) = (p[k] - p[cur], c[k] - c[cur]);
            if k == cur || da < 0.0 || dc > 0.0 || (da == 0.0 && dc == 0.0) {
                continue;
            }
            // lexicographic max on (accuracy gain, cost saving)
            let better = match best {
                None => true,
                Some(b) => p[k] > p[b] || (p[k] == p[b] && c[k] < c[b]),
            };
            if better {
                best = Some(k);
            }
        }
        best
    }

    fn moves_for(&self, i: usize, cur: usize) -> QueryMoves {
        let (c, p) = (self.c.row(i), self.p.row(i));
        let mut out = QueryMoves::default();
        for k in 0..self.m() {
            if k == cur {
                continue;
            }
            let (da, dc) = (p[k] - p[cur], c[k] - c[cur]);
            let (slot, score) = if da > 0.0 && dc > 0.0 {
                (&mut out.positive, da / dc)
            } else if da < 0.0 && dc < 0.0 {
                (&mut out.negative, da / -dc)
            } else {
                continue;
            };
            let better = match slot {
                None => true,
                Some(b) => score > b.score || (score == b.score && c[k] < c[b.to_llm]),
            };
            if better {
                *slot = Some(Move {
                    query: i,
                    to_llm: k,
                    delta_cost: dc,
                    delta_acc: da,
                    score,
                });
            }
        }
        out
    }

    fn extremes(&self) -> (Solution, Solution) {
        let high = (0..self.n()).map(|i| self.most_accurate(i)).collect();
        let cheap = (0..self.n()).map(|i| self.cheapest(i)).collect();
        (self.solution(high), self.solution(cheap))
    }

    fn destruct(&self, s: &Solution, gap: f64, direction: Direction) -> Solution {
        let start = s.objectives();
        let mut asg = s.assignment().to_vec();
        let mut now = start;
        loop {
            let reached = match direction {
                Direction::Cost => start.cost - now.cost >= gap,
                Direction::Accuracy => now.accuracy - start.accuracy >= gap,
            };
            if reached {
                break;
            }
            let Some((i, k)) = self.destruct_step(&asg, direction) else {
                break;
            };
            asg[i] = k;
            now = self.evaluate(&asg);
        }
        Solution::from_parts(asg, now)
    }

    /// The query/target pair with the largest single-move gain in `direction`.
    fn destruct_step(&self, asg: &[usize], direction: Direction) -> Option<(usize, usize)> {
        // (query, target, primary gain, secondary loss)
        let mut best: Option<(usize, usize, f64, f64)> = None;
        for (i, &cur) in asg.iter().enumerate() {
            let (c, p) = (self.c.row(i), self.p.row(i));
            let (k, gain, loss) = match direction {
                Direction::Cost => {
                    let k = self.cheapest(i);
                    (k, c[cur] - c[k], p[cur] - p[k])
                }
                Direction::Accuracy => {
                    let k = self.most_accurate(i);
                    (k, p[k] - p[cur], c[k] - c[cur])
                }
            };
            if gain <= 0.0 {
                continue;
            }
            let better = match best {
                None => true,
                Some((_, _, g, l)) => gain > g || (gain == g && loss < l),
            };
            if better {
                best = Some((i, k, gain, loss));
            }
        }
        best.map(|(i, k, _, _)| (i, k))
    }

    /// Applies improving moves until every query sits on a non-dominated option.
    fn local_repair(&self, asg: &mut [usize], queries: impl IntoIterator<Item = usize>) -> bool {
        let mut changed = false;
        for i in queries {
            while let Some(k) = self.improving_move(i, asg[i]) {
                asg[i] = k;
                changed = true;
            }
        }
        changed
    }

    fn reconstruct(&self, s: &Solution, mut emit: impl FnMut(&Solution)) -> Solution {
        let n = self.n();
        let mut asg = s.assignment().to_vec();
        self.local_repair(&mut asg, 0..n);
        let mut cur = self.solution(asg);
        emit(&cur);

        let mut moves: Vec<QueryMoves> = (0..n)
            .map(|i| self.moves_for(i, cur.assignment()[i]))
            .collect();
        let mut order: Vec<usize> = Vec::with_capacity(n);
        while let Some(gain) = best_positive(&moves) {
            order.clear();
            order.extend((0..n).filter(|&i| {
                i != gain.query
                    && moves[i]
                        .negative
                        .is_some_and(|m| gain.score.abs() > m.score.abs())
            }));
            // least accuracy lost per unit saved first
            order.sort_by(|&a, &b| {
                let (sa, sb) = (
                    moves[a].negative.unwrap().score,
                    moves[b].negative.unwrap().score,
                );
                sb.total_cmp(&sa).then(a.cmp(&b))
            });

            let mut accepted = None;
            for &j in &order {
                let loss = moves[j].negative.unwrap();
                if gain.delta_acc + loss.delta_acc <= 0.0 {
                    continue;
                }
                let mut next = cur.assignment().to_vec();
                next[gain.query] = gain.to_llm;
                next[loss.query] = loss.to_llm;
                let obj = self.evaluate(&next);
                if obj.accuracy > cur.accuracy() {
                    accepted = Some((next, loss.query));
                    break;
                }
            }
            let Some((mut next, j)) = accepted else {
                break;
            };
            let i = gain.query;
            self.local_repair(&mut next, [i, j]);
            moves[i] = self.moves_for(i, next[i]);
            moves[j] = self.moves_for(j, next[j]);
            cur = self.solution(next);
            emit(&cur);
        }
        cur
    }
}

fn best_positive(moves: &[QueryMoves]) -> Option<Move> {
    moves
        .iter()
        .filter_map(|m| m.positive)
        .fold(None, |best: Option<Move>, m| match best {
            Some(b) if b.score >= m.score => Some(b),
            _ => Some(m),
        })
}

/// The highest-accuracy solution `s_h` and the cheapest solution `s_c`.
pub fn init_extremes(p: &PredictionMatrix, c: &CostMatrix) -> Result<(Solution, Solution)> {
    Ok(Instance::new(p, c)?.extremes())
}

/// Greedily reassigns single queries in `direction` until the objective has
/// moved by at least `gap` or no further single move helps.
pub fn destruct(
    s: &Solution,
    gap: f64,
    direction: Direction,
    p: &PredictionMatrix,
    c: &CostMatrix,
) -> Result<Solution> {
    let inst = Instance::new(p, c)?;
    inst.check_solution(s)?;
    let s = inst.solution(s.assignment().to_vec());
    Ok(inst.destruct(&s, gap, direction))
}

/// Best positive and negative move of every query.
pub fn score_moves(s: &Solution, p: &PredictionMatrix, c: &CostMatrix) -> Result<Vec<QueryMoves>> {
    let inst = Instance::new(p, c)?;
    inst.check_solution(s)?;
    Ok(s.assignment()
        .iter()
        .enumerate()
        .map(|(i, &k)| inst.moves_for(i, k))
        .collect())
}

/// Repairs `s`: first applies every dominated-choice fix, then trades the
/// best accuracy-per-cost upgrade against the cheapest-per-cost downgrade
/// while that strictly raises predicted accuracy. Returns the repaired
/// solution followed by the state after each accepted trade.
pub fn reconstruct(s: &Solution, p: &PredictionMatrix, c: &CostMatrix) -> Result<Vec<Solution>> {
    let inst = Instance::new(p, c)?;
    inst.check_solution(s)?;
    let mut out = Vec::new();
    inst.reconstruct(s, |x| out.push(x.clone()));
    Ok(out)
}

/// Counters describing one search run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    pub iterations: usize,
    pub candidates: usize,
}

/// Builds the cost/predicted-accuracy Pareto archive.
pub fn optimize(
    p: &PredictionMatrix,
    c: &CostMatrix,
    config: &SearchConfig,
) -> Result<SolutionArchive> {
    optimize_with_stats(p, c, config).map(|(a, _)| a)
}

pub fn optimize_with_stats(
    p: &PredictionMatrix,
    c: &CostMatrix,
    config: &SearchConfig,
) -> Result<(SolutionArchive, SearchStats)> {
    config.validate()?;
    let inst = Instance::new(p, c)?;
    let (s_h, s_c) = inst.extremes();
    let mut archive = SolutionArchive::new();
    let mut stats = SearchStats::default();
    archive.insert(s_c.clone());

    let gn = config.grid_n as f64;
    let cost_step = (s_h.cost() - s_c.cost()).abs() / gn;
    let acc_step = (s_h.accuracy() - s_c.accuracy()).abs() / gn;
    if cost_step <= 0.0 && acc_step <= 0.0 {
        return Ok((archive, stats));
    }
    archive.insert(s_h.clone());

    let mut offer = |s: &Solution| {
        stats.candidates += 1;
        if archive.accepts(&s.objectives()) {
            archive.insert(s.clone());
        }
    };

    // s1 walks down from the accurate end, s2 up from the cheap end
    let (mut s1, mut s2) = (s_h, s_c);
    let (mut live1, mut live2) = (cost_step > 0.0, acc_step > 0.0);
    for _ in 0..config.max_iterations {
        if !live1 && !live2 {
            break;
        }
        stats.iterations += 1;
        if live1 {
            let d = inst.destruct(&s1, cost_step, Direction::Cost);
            if d.assignment() == s1.assignment() {
                live1 = false;
            } else {
                s1 = inst.reconstruct(&d, &mut offer);
            }
        }
        if live2 {
            let d = inst.destruct(&s2, acc_step, Direction::Accuracy);
            if d.assignment() == s2.assignment() {
                live2 = false;
            } else {
                s2 = inst.reconstruct(&d, &mut offer);
            }
        }
    }
    Ok((archive, stats))
}

/// Prediction-only routing: each query goes to its cheapest LLM whose
/// predicted success is at least `threshold`, or to its most accurate LLM
/// when none qualifies.
pub fn threshold_assignment(
    p: &PredictionMatrix,
    c: &CostMatrix,
    threshold: f64,
) -> Result<Solution> {
    let inst = Instance::new(p, c)?;
    let asg = (0..inst.n())
        .map(|i| {
            let (cr, pr) = (c.row(i), p.row(i));
            (0..inst.m())
                .filter(|&k| pr[k] >= threshold)
                .fold(None, |best: Option<usize>, k| match best {
                    Some(b) if cr[b] < cr[k] || (cr[b] == cr[k] && pr[b] >= pr[k]) => Some(b),
                    _ => Some(k),
                })
                .unwrap_or_else(|| inst.most_accurate(i))
        })
        .collect();
    Ok(inst.solution(asg))
}
