//! NSGA-II over integer chromosomes (one allele per query), used as a
//! comparison baseline on the same predicted objectives.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    dominates, evaluate_unchecked, pareto_filter, CostMatrix, ObjectivePoint, PredictionMatrix,
    Solution, SolutionArchive,
};
use crate::optimizer::init_extremes;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    /// Per-gene reset probability; `None` means `1 / n`.
    pub mutation_rate: Option<f64>,
    pub seed: u64,
    /// Seed the initial population with the cheapest and most accurate assignments.
    pub inject_extremes: bool,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population_size: 100,
            generations: 200,
            crossover_rate: 0.9,
            mutation_rate: None,
            seed: 0,
            inject_extremes: true,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 || !self.population_size.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "population size must be even and at least 2, got {}",
                self.population_size
            )));
        }
        if self.generations == 0 {
            return Err(Error::InvalidParameter(
                "generations must be positive".into(),
            ));
        }
        let rate_ok = |r: f64| (0.0..=1.0).contains(&r);
        if !rate_ok(self.crossover_rate) || !self.mutation_rate.is_none_or(rate_ok) {
            return Err(Error::InvalidParameter("rates must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Fast non-dominated sort. Front 0 holds the non-dominated points; indices
/// within a front are ascending.
pub fn non_dominated_sort(points: &[ObjectivePoint]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by_count = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if dominates(&points[i], &points[j]) {
                dominates_list[i].push(j);
                dominated_by_count[j] += 1;
            } else if dominates(&points[j], &points[i]) {
                dominates_list[j].push(i);
                dominated_by_count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominates_list[i] {
                dominated_by_count[j] -= 1;
                if dominated_by_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(std::mem::replace(&mut current, next));
    }
    fronts
}

/// Crowding distance of each member of `front` (aligned with `front`).
pub fn crowding_distance(points: &[ObjectivePoint], front: &[usize]) -> Vec<f64> {
    let len = front.len();
    let mut dist = vec![0.0; len];
    if len <= 2 {
        dist.fill(f64::INFINITY);
        return dist;
    }
    let objectives: [fn(&ObjectivePoint) -> f64; 2] = [|p| p.cost, |p| p.accuracy];
    let mut order: Vec<usize> = (0..len).collect();
    for f in objectives {
        order.sort_by(|&a, &b| {
            f(&points[front[a]])
                .total_cmp(&f(&points[front[b]]))
                .then(a.cmp(&b))
        });
        let lo = f(&points[front[order[0]]]);
        let hi = f(&points[front[order[len - 1]]]);
        dist[order[0]] = f64::INFINITY;
        dist[order[len - 1]] = f64::INFINITY;
        if hi > lo {
            for w in 1..len - 1 {
                let gap = f(&points[front[order[w + 1]]]) - f(&points[front[order[w - 1]]]);
                dist[order[w]] += gap / (hi - lo);
            }
        }
    }
    dist
}

#[derive(Debug, Clone)]
struct Individual {
    genes: Vec<usize>,
    objectives: ObjectivePoint,
    rank: usize,
    crowding: f64,
}

/// A running NSGA-II population.
pub struct Nsga2<'a> {
    p: &'a PredictionMatrix,
    c: &'a CostMatrix,
    config: GaConfig,
    mutation_rate: f64,
    population: Vec<Individual>,
    rng: ChaCha8Rng,
    generation: usize,
}

impl<'a> Nsga2<'a> {
    pub fn new(p: &'a PredictionMatrix, c: &'a CostMatrix, config: GaConfig) -> Result<Self> {
        config.validate()?;
        let (s_h, s_c) = init_extremes(p, c)?;
        let (n, m) = (c.rows(), c.cols());
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut genes: Vec<Vec<usize>> = Vec::with_capacity(config.population_size);
        if config.inject_extremes {
            genes.push(s_c.assignment().to_vec());
            genes.push(s_h.assignment().to_vec());
        }
        while genes.len() < config.population_size {
            genes.push((0..n).map(|_| rng.random_range(0..m)).collect());
        }
        let mutation_rate = config.mutation_rate.unwrap_or(1.0 / n as f64);
        let mut run = Nsga2 {
            p,
            c,
            config,
            mutation_rate,
            population: Vec::new(),
            rng,
            generation: 0,
        };
        let pool = genes.into_iter().map(|g| run.individual(g)).collect();
        run.population = run.select(pool);
        Ok(run)
    }

    fn individual(&self, genes: Vec<usize>) -> Individual {
        let objectives = evaluate_unchecked(&genes, self.c, self.p);
        Individual {
            genes,
            objectives,
            rank: 0,
            crowding: 0.0,
        }
    }

    /// Ranks `pool` and keeps the best `population_size` by (rank, crowding).
    fn select(&self, mut pool: Vec<Individual>) -> Vec<Individual> {
        let points: Vec<ObjectivePoint> = pool.iter().map(|i| i.objectives).collect();
        let target = self.config.population_size;
        let mut keep: Vec<usize> = Vec::with_capacity(target);
        for (rank, front) in non_dominated_sort(&points).into_iter().enumerate() {
            let crowd = crowding_distance(&points, &front);
            for (&idx, &d) in front.iter().zip(&crowd) {
                pool[idx].rank = rank;
                pool[idx].crowding = d;
            }
            if keep.len() + front.len() <= target {
                keep.extend(&front);
            } else {
                let mut by_crowd: Vec<usize> = (0..front.len()).collect();
                by_crowd.sort_by(|&a, &b| crowd[b].total_cmp(&crowd[a]).then(a.cmp(&b)));
                keep.extend(
                    by_crowd
                        .into_iter()
                        .take(target - keep.len())
                        .map(|w| front[w]),
                );
            }
            if keep.len() == target {
                break;
            }
        }
        let mut slots: Vec<Option<Individual>> = pool.into_iter().map(Some).collect();
        keep.into_iter().map(|i| slots[i].take().unwrap()).collect()
    }

    fn crowded_cmp(a: &Individual, b: &Individual) -> Ordering {
        a.rank.cmp(&b.rank).then(b.crowding.total_cmp(&a.crowding))
    }

    fn tournament(&mut self) -> usize {
        let len = self.population.len();
        let a = self.rng.random_range(0..len);
        let b = self.rng.random_range(0..len);
        if Self::crowded_cmp(&self.population[b], &self.population[a]) == Ordering::Less {
            b
        } else {
            a
        }
    }

    fn mutate(&mut self, genes: &mut [usize]) {
        let m = self.c.cols();
        for g in genes.iter_mut() {
            if self.rng.random_bool(self.mutation_rate) {
                *g = self.rng.random_range(0..m);
            }
        }
    }

    /// Runs one generation.
    pub fn step(&mut self) {
        let target = self.config.population_size;
        let mut offspring = Vec::with_capacity(target);
        while offspring.len() < target {
            let (pa, pb) = (self.tournament(), self.tournament());
            let mut a = self.population[pa].genes.clone();
            let mut b = self.population[pb].genes.clone();
            if self.rng.random_bool(self.config.crossover_rate) {
                for (x, y) in a.iter_mut().zip(b.iter_mut()) {
                    if self.rng.random_bool(0.5) {
                        std::mem::swap(x, y);
                    }
                }
            }
            self.mutate(&mut a);
            self.mutate(&mut b);
            offspring.push(self.individual(a));
            offspring.push(self.individual(b));
        }
        let mut pool = std::mem::take(&mut self.population);
        pool.extend(offspring);
        self.population = self.select(pool);
        self.generation += 1;
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn objectives(&self) -> Vec<ObjectivePoint> {
        self.population.iter().map(|i| i.objectives).collect()
    }

    /// Current population as evaluated solutions, in population order.
    pub fn solutions(&self) -> Vec<Solution> {
        self.population
            .iter()
            .map(|i| Solution::from_parts(i.genes.clone(), i.objectives))
            .collect()
    }

    pub fn run(mut self) -> SolutionArchive {
        while self.generation < self.config.generations {
            self.step();
        }
        pareto_filter(self.solutions())
    }
}

/// Runs NSGA-II for `config.generations` and returns the final non-dominated set.
pub fn nsga2(p: &PredictionMatrix, c: &CostMatrix, config: &GaConfig) -> Result<SolutionArchive> {
    Ok(Nsga2::new(p, c, config.clone())?.run())
}
