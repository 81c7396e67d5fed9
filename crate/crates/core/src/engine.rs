//! Cartesian genome representation, execution (acyclic and recurrent),
//! decoding to expressions, and DOT export.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The fixed four-operator function set: +, -, x, protected /.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Op {
    Add,
    Sub,
    Mul,
    DivProtected,
}

pub const FUNCTION_SET: [Op; 4] = [Op::Add, Op::Sub, Op::Mul, Op::DivProtected];

/// Denominators at or below this magnitude make protected division return 1.
pub const DIV_EPSILON: f64 = 1e-10;

impl Op {
    pub fn apply(&self, a: f64, b: f64) -> f64 {
        match self {
            Op::Add => a + b,
            Op::Sub => a - b,
            Op::Mul => a * b,
            Op::DivProtected => {
                if b.abs() <= DIV_EPSILON {
                    1.0
                } else {
                    a / b
                }
            }
        }
    }

    pub fn symbol(&self) -> &'static str {
        match self {
            Op::Add => "+",
            Op::Sub => "-",
            Op::Mul => "*",
            Op::DivProtected => "/",
        }
    }
}

pub const ARITY: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenomeConfig {
    pub n_inputs: usize,
    pub n_nodes: usize,
    pub n_outputs: usize,
    pub recurrent: bool,
}

impl GenomeConfig {
    pub fn new(n_inputs: usize, recurrent: bool) -> Self {
        Self {
            n_inputs,
            n_nodes: 50,
            n_outputs: 1,
            recurrent,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_inputs == 0 || self.n_nodes == 0 || self.n_outputs == 0 {
            return Err(Error::InvalidGenome(
                "inputs, nodes, and outputs must all be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A Cartesian chromosome. Addresses `0..n_inputs` refer to inputs,
/// `n_inputs..n_inputs + n_nodes` to nodes (single row, unrestricted
/// levels-back).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Genome {
    pub config: GenomeConfig,
    pub function_genes: Vec<usize>,
    pub connection_genes: Vec<[usize; 2]>,
    pub output_genes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Genome {
    pub fn n_inputs(&self) -> usize {
        self.config.n_inputs
    }

    pub fn n_nodes(&self) -> usize {
        self.config.n_nodes
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let n_in = self.config.n_inputs;
        let n_nodes = self.config.n_nodes;
        if self.function_genes.len() != n_nodes
            || self.connection_genes.len() != n_nodes
            || self.output_genes.len() != self.config.n_outputs
        {
            return Err(Error::InvalidGenome("gene list lengths disagree with config".into()));
        }
        if self.function_genes.iter().any(|&f| f >= FUNCTION_SET.len()) {
            return Err(Error::InvalidGenome("function gene out of range".into()));
        }
        for (i, conn) in self.connection_genes.iter().enumerate() {
            for &src in conn {
                if src >= n_in + n_nodes {
                    return Err(Error::InvalidGenome(format!(
                        "node {i} connects to out-of-range address {src}"
                    )));
                }
                if !self.config.recurrent && src >= n_in && src - n_in >= i {
                    return Err(Error::InvalidGenome(format!(
                        "acyclic genome has forward/self connection at node {i}"
                    )));
                }
            }
        }
        if self.output_genes.iter().any(|&o| o >= n_in + n_nodes) {
            return Err(Error::InvalidGenome("output gene out of range".into()));
        }
        Ok(())
    }

    /// True if `src` (an address of node `i`'s connection) is a same-or-later
    /// node, i.e. reads the previous sweep's value.
    fn is_recurrent_edge(&self, node: usize, src: usize) -> bool {
        src >= self.config.n_inputs && src - self.config.n_inputs >= node
    }
}

/// Draw one connection source for node `node`: with probability
/// `recurrent_prob` (recurrent mode only) uniform over same-or-later node
/// addresses, otherwise uniform over inputs and strictly-preceding nodes.
fn random_connection<R: Rng>(
    config: &GenomeConfig,
    node: usize,
    recurrent_prob: f64,
    rng: &mut R,
) -> usize {
    if config.recurrent && rng.gen::<f64>() < recurrent_prob {
        config.n_inputs + node + rng.gen_range(0..config.n_nodes - node)
    } else {
        rng.gen_range(0..config.n_inputs + node)
    }
}

fn random_output<R: Rng>(config: &GenomeConfig, rng: &mut R) -> usize {
    rng.gen_range(0..config.n_inputs + config.n_nodes)
}

pub fn random_genome<R: Rng>(
    config: GenomeConfig,
    recurrent_prob: f64,
    rng: &mut R,
) -> Result<Genome> {
    config.validate()?;
    if !(0.0..=1.0).contains(&recurrent_prob) {
        return Err(Error::InvalidProbability(recurrent_prob));
    }
    if recurrent_prob > 0.0 && !config.recurrent {
        return Err(Error::InvalidProbability(recurrent_prob));
    }
    let mut function_genes = Vec::with_capacity(config.n_nodes);
    let mut connection_genes = Vec::with_capacity(config.n_nodes);
    for node in 0..config.n_nodes {
        function_genes.push(rng.gen_range(0..FUNCTION_SET.len()));
        let conn = [
            random_connection(&config, node, recurrent_prob, rng),
            random_connection(&config, node, recurrent_prob, rng),
        ];
        connection_genes.push(conn);
    }
    let output_genes = (0..config.n_outputs)
        .map(|_| random_output(&config, rng))
        .collect();
    Ok(Genome {
        config,
        function_genes,
        connection_genes,
        output_genes,
        seed: None,
    })
}

/// Resample each gene independently with probability `rate`. Returns the
/// child and the number of genes that were redrawn (a redraw may land on the
/// old value by chance).
pub fn mutate_with_stats<R: Rng>(
    parent: &Genome,
    rate: f64,
    recurrent_prob: f64,
    rng: &mut R,
) -> (Genome, usize) {
    let mut child = parent.clone();
    let mut resampled = 0;
    for node in 0..child.config.n_nodes {
        if rng.gen::<f64>() < rate {
            child.function_genes[node] = rng.gen_range(0..FUNCTION_SET.len());
            resampled += 1;
        }
        for slot in 0..ARITY {
            if rng.gen::<f64>() < rate {
                child.connection_genes[node][slot] =
                    random_connection(&child.config, node, recurrent_prob, rng);
                resampled += 1;
            }
        }
    }
    for out in child.output_genes.iter_mut() {
        if rng.gen::<f64>() < rate {
            *out = random_output(&parent.config, rng);
            resampled += 1;
        }
    }
    (child, resampled)
}

pub fn mutate<R: Rng>(parent: &Genome, rate: f64, recurrent_prob: f64, rng: &mut R) -> Genome {
    mutate_with_stats(parent, rate, recurrent_prob, rng).0
}

/// Active nodes (sorted by index) and used inputs, by backward reachability
/// from the output genes. Recurrent edges count for reachability.
pub fn active_nodes(genome: &Genome) -> (Vec<usize>, BTreeSet<usize>) {
    let n_in = genome.config.n_inputs;
    let mut active = vec![false; genome.config.n_nodes];
    let mut inputs = BTreeSet::new();
    let mut stack: Vec<usize> = genome.output_genes.clone();
    while let Some(addr) = stack.pop() {
        if addr < n_in {
            inputs.insert(addr);
        } else {
            let node = addr - n_in;
            if !active[node] {
                active[node] = true;
                stack.extend(genome.connection_genes[node]);
            }
        }
    }
    let nodes = (0..genome.config.n_nodes).filter(|&i| active[i]).collect();
    (nodes, inputs)
}

/// Per-evaluation node state. Reset between independent samples; persists
/// across frames only in streamed execution.
#[derive(Debug, Clone)]
pub struct ExecutionState {
    pub node_values: Vec<f64>,
    pub passes: usize,
}

impl ExecutionState {
    pub fn new(genome: &Genome) -> Self {
        Self {
            node_values: vec![0.0; genome.config.n_nodes],
            passes: 1,
        }
    }

    pub fn with_passes(genome: &Genome, passes: usize) -> Self {
        Self {
            node_values: vec![0.0; genome.config.n_nodes],
            passes,
        }
    }

    pub fn reset(&mut self) {
        self.node_values.iter_mut().for_each(|v| *v = 0.0);
    }
}

fn read(genome: &Genome, inputs: &[f64], values: &[f64], addr: usize) -> f64 {
    if addr < genome.config.n_inputs {
        inputs[addr]
    } else {
        values[addr - genome.config.n_inputs]
    }
}

/// Evaluate all nodes in ascending index order for `state.passes` sweeps and
/// read the outputs. A connection to a not-yet-updated node sees that node's
/// previous-sweep value (0.0 on a fresh state); acyclic genomes are
/// pass-invariant.
pub fn execute(genome: &Genome, inputs: &[f64], state: &mut ExecutionState) -> Result<Vec<f64>> {
    if inputs.len() != genome.config.n_inputs {
        return Err(Error::InputLengthMismatch {
            expected: genome.config.n_inputs,
            found: inputs.len(),
        });
    }
    if let Some(pos) = inputs.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput(pos));
    }
    for _ in 0..state.passes.max(1) {
        sweep(genome, inputs, &mut state.node_values);
    }
    Ok(genome
        .output_genes
        .iter()
        .map(|&o| read(genome, inputs, &state.node_values, o))
        .collect())
}

fn sweep(genome: &Genome, inputs: &[f64], values: &mut [f64]) {
    for node in 0..genome.config.n_nodes {
        let [a, b] = genome.connection_genes[node];
        let va = read(genome, inputs, values, a);
        let vb = read(genome, inputs, values, b);
        values[node] = FUNCTION_SET[genome.function_genes[node]].apply(va, vb);
    }
}

/// Feed a series of frames through a recurrent genome, one sweep per frame,
/// and return the outputs after the last frame. State starts fresh.
pub fn execute_streamed(genome: &Genome, series: &[Vec<f64>]) -> Result<Vec<f64>> {
    if !genome.config.recurrent {
        return Err(Error::NotRecurrent);
    }
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    let mut state = ExecutionState::new(genome);
    let mut out = Vec::new();
    for frame in series {
        out = execute(genome, frame, &mut state)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifyMode {
    /// Every feature is its own simultaneous input.
    Wide,
    /// Features are chunked into frames and fed over timesteps.
    Streamed,
}

/// Split a region-major feature vector into time-major frames of `n_inputs`
/// values: frame `t` is `[features[c*T + t] for c in 0..n_inputs]`.
pub fn frames_region_major(features: &[f64], n_inputs: usize) -> Result<Vec<Vec<f64>>> {
    if n_inputs == 0 || features.len() % n_inputs != 0 {
        return Err(Error::BadFrameShape {
            len: features.len(),
            n_inputs,
        });
    }
    let timepoints = features.len() / n_inputs;
    Ok((0..timepoints)
        .map(|t| (0..n_inputs).map(|c| features[c * timepoints + t]).collect())
        .collect())
}

/// Threshold decision: class 1 iff the first output is >= 0.5. Non-finite
/// outputs (overflow, inf - inf) fall to class 0.
pub fn label_from_output(output: f64) -> u8 {
    u8::from(output.is_finite() && output >= 0.5)
}

pub fn classify(genome: &Genome, sample: &[f64], mode: ClassifyMode) -> Result<u8> {
    let output = match mode {
        ClassifyMode::Wide => {
            let mut state = ExecutionState::new(genome);
            execute(genome, sample, &mut state)?[0]
        }
        ClassifyMode::Streamed => {
            let frames = frames_region_major(sample, genome.config.n_inputs)?;
            execute_streamed(genome, &frames)?[0]
        }
    };
    Ok(label_from_output(output))
}

fn addr_expr(genome: &Genome, addr: usize, node: usize, out: &mut String) {
    if addr < genome.config.n_inputs {
        write!(out, "x{addr}").unwrap();
    } else if genome.is_recurrent_edge(node, addr) {
        write!(out, "node[{}]@prev", addr - genome.config.n_inputs).unwrap();
    } else {
        node_expr(genome, addr - genome.config.n_inputs, out);
    }
}

fn node_expr(genome: &Genome, node: usize, out: &mut String) {
    let [a, b] = genome.connection_genes[node];
    out.push('(');
    addr_expr(genome, a, node, out);
    write!(out, " {} ", FUNCTION_SET[genome.function_genes[node]].symbol()).unwrap();
    addr_expr(genome, b, node, out);
    out.push(')');
}

/// Render each output as an infix, fully parenthesized expression over the
/// active nodes. Same-or-later node references (previous-sweep reads) appear
/// as `node[i]@prev`.
pub fn to_expression(genome: &Genome) -> Vec<String> {
    genome
        .output_genes
        .iter()
        .map(|&o| {
            let mut s = String::new();
            if o < genome.config.n_inputs {
                write!(s, "x{o}").unwrap();
            } else {
                node_expr(genome, o - genome.config.n_inputs, &mut s);
            }
            s
        })
        .collect()
}

/// Deterministic DOT rendering: nodes named `in{i}`, `n{i}`, `out{i}`,
/// function symbol labels, recurrent edges dashed.
pub fn to_dot(genome: &Genome, active_only: bool) -> String {
    let (active, used_inputs) = active_nodes(genome);
    let n_in = genome.config.n_inputs;
    let node_included = |i: usize| !active_only || active.contains(&i);
    let input_included =
        |i: usize| !active_only || used_inputs.contains(&i);

    let mut dot = String::from("digraph genome {\n  rankdir=LR;\n");
    for i in 0..n_in {
        if input_included(i) {
            writeln!(dot, "  in{i} [shape=box, label=\"x{i}\"];").unwrap();
        }
    }
    for i in 0..genome.config.n_nodes {
        if node_included(i) {
            let op = FUNCTION_SET[genome.function_genes[i]].symbol();
            writeln!(dot, "  n{i} [shape=circle, label=\"{op}\"];").unwrap();
        }
    }
    for i in 0..genome.config.n_outputs {
        writeln!(dot, "  out{i} [shape=doublecircle, label=\"out{i}\"];").unwrap();
    }
    let src_name = |addr: usize| {
        if addr < n_in {
            format!("in{addr}")
        } else {
            format!("n{}", addr - n_in)
        }
    };
    for i in 0..genome.config.n_nodes {
        if !node_included(i) {
            continue;
        }
        for &src in &genome.connection_genes[i] {
            let style = if genome.is_recurrent_edge(i, src) {
                " [style=dashed]"
            } else {
                ""
            };
            writeln!(dot, "  {} -> n{i}{style};", src_name(src)).unwrap();
        }
    }
    for (i, &o) in genome.output_genes.iter().enumerate() {
        writeln!(dot, "  {} -> out{i};", src_name(o)).unwrap();
    }
    dot.push_str("}\n");
    dot
}

/// Read and validate a genome from JSON.
pub fn genome_from_json(text: &str) -> Result<Genome> {
    let genome: Genome =
        serde_json::from_str(text).map_err(|e| Error::MalformedGenomeFile(e.to_string()))?;
    genome
        .validate()
        .map_err(|e| Error::MalformedGenomeFile(e.to_string()))?;
    Ok(genome)
}
