//! Binary-input trellises and the exact log-domain BCJR soft-in/soft-out
//! decoder.
//!
//! LLRs follow the convention `ln Pr[bit = 0] / Pr[bit = 1]`. A bit with LLR
//! `L` contributes `+L/2` to a branch metric when the branch carries a 0 and
//! `-L/2` when it carries a 1.

/// Magnitude at which every LLR entering or leaving the decoder is clamped.
pub const LLR_CLAMP: f64 = 50.0;

pub fn clamp_llr(x: f64) -> f64 {
    if x.is_nan() {
        0.0
    } else {
        x.clamp(-LLR_CLAMP, LLR_CLAMP)
    }
}

/// Hard decision; an LLR of exactly zero decides 0.
pub fn hard_decision(llr: f64) -> u8 {
    u8::from(llr < 0.0)
}

/// `ln(e^a + e^b)` computed without overflow.
#[inline]
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Log-sum-exp over an iterator.
pub fn log_sum_exp<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().fold(f64::NEG_INFINITY, log_add)
}

/// One trellis transition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    pub input: u8,
    /// Output bits, bit `j` of the word is output `j` of the step.
    pub outputs: u32,
}

impl Branch {
    pub fn output(&self, j: usize) -> u8 {
        ((self.outputs >> j) & 1) as u8
    }
}

/// A binary-input trellis whose sections repeat with a fixed period.
///
/// Step `k` uses section `k % period`; this covers time-invariant codes
/// (period 1) and periodically doped codes.
#[derive(Clone, Debug)]
pub struct Trellis {
    num_states: usize,
    outputs_per_step: usize,
    sections: Vec<Vec<Branch>>,
}

impl Trellis {
    pub fn new(num_states: usize, outputs_per_step: usize, sections: Vec<Vec<Branch>>) -> Self {
        assert!(!sections.is_empty(), "trellis needs at least one section");
        for section in &sections {
            for b in section {
                assert!(b.from < num_states && b.to < num_states);
            }
        }
        Trellis {
            num_states,
            outputs_per_step,
            sections,
        }
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn outputs_per_step(&self) -> usize {
        self.outputs_per_step
    }

    pub fn section(&self, step: usize) -> &[Branch] {
        &self.sections[step % self.sections.len()]
    }

    /// Encode from state 0.
    pub fn encode(&self, input: &[u8]) -> Vec<u8> {
        let mut state = 0;
        let mut out = Vec::with_capacity(input.len() * self.outputs_per_step);
        for (k, &u) in input.iter().enumerate() {
            let b = self
                .section(k)
                .iter()
                .find(|b| b.from == state && b.input == u)
                .expect("trellis section is not complete");
            out.extend((0..self.outputs_per_step).map(|j| b.output(j)));
            state = b.to;
        }
        out
    }
}

/// Result of one BCJR pass.
#[derive(Clone, Debug, PartialEq)]
pub struct SisoOutput {
    pub input_posterior: Vec<f64>,
    pub input_extrinsic: Vec<f64>,
    pub output_posterior: Vec<f64>,
    pub output_extrinsic: Vec<f64>,
}

/// Exact forward-backward a-posteriori decoding in the log domain.
///
/// `input_prior` holds one LLR per trellis step, `output_llr` holds
/// `outputs_per_step` LLRs per step (channel observations or priors on the
/// code bits). The trellis starts in state 0 and ends unterminated.
/// Extrinsic values are the posteriors minus the corresponding inputs.
pub fn bcjr(trellis: &Trellis, input_prior: &[f64], output_llr: &[f64]) -> SisoOutput {
    let steps = input_prior.len();
    let n_out = trellis.outputs_per_step();
    assert_eq!(
        output_llr.len(),
        steps * n_out,
        "output LLR length must be steps * outputs_per_step"
    );
    let ns = trellis.num_states();
    let prior: Vec<f64> = input_prior.iter().map(|&x| clamp_llr(x)).collect();
    let obs: Vec<f64> = output_llr.iter().map(|&x| clamp_llr(x)).collect();

    let gamma = |k: usize, b: &Branch| -> f64 {
        let mut g = if b.input == 0 { prior[k] } else { -prior[k] };
        for j in 0..n_out {
            let l = obs[k * n_out + j];
            g += if b.output(j) == 0 { l } else { -l };
        }
        0.5 * g
    };

    let mut alpha = vec![f64::NEG_INFINITY; (steps + 1) * ns];
    alpha[0] = 0.0;
    for k in 0..steps {
        let (cur, next) = alpha.split_at_mut((k + 1) * ns);
        let cur = &cur[k * ns..];
        let next = &mut next[..ns];
        for b in trellis.section(k) {
            if cur[b.from] == f64::NEG_INFINITY {
                continue;
            }
            next[b.to] = log_add(next[b.to], cur[b.from] + gamma(k, b));
        }
        normalize(next);
    }

    let mut beta = vec![f64::NEG_INFINITY; (steps + 1) * ns];
    for s in 0..ns {
        beta[steps * ns + s] = 0.0;
    }
    for k in (0..steps).rev() {
        let (cur, next) = beta.split_at_mut((k + 1) * ns);
        let cur = &mut cur[k * ns..];
        let next = &next[..ns];
        for b in trellis.section(k) {
            cur[b.from] = log_add(cur[b.from], next[b.to] + gamma(k, b));
        }
        normalize(cur);
    }

    let mut input_posterior = Vec::with_capacity(steps);
    let mut output_posterior = Vec::with_capacity(steps * n_out);
    let mut in_acc = [f64::NEG_INFINITY; 2];
    let mut out_acc = vec![[f64::NEG_INFINITY; 2]; n_out];
    for k in 0..steps {
        in_acc.fill(f64::NEG_INFINITY);
        for acc in out_acc.iter_mut() {
            acc.fill(f64::NEG_INFINITY);
        }
        for b in trellis.section(k) {
            let m = alpha[k * ns + b.from] + gamma(k, b) + beta[(k + 1) * ns + b.to];
            if m == f64::NEG_INFINITY {
                continue;
            }
            in_acc[b.input as usize] = log_add(in_acc[b.input as usize], m);
            for (j, acc) in out_acc.iter_mut().enumerate() {
                let bit = b.output(j) as usize;
                acc[bit] = log_add(acc[bit], m);
            }
        }
        input_posterior.push(clamp_llr(in_acc[0] - in_acc[1]));
        output_posterior.extend(out_acc.iter().map(|acc| clamp_llr(acc[0] - acc[1])));
    }

    let input_extrinsic = input_posterior
        .iter()
        .zip(&prior)
        .map(|(p, a)| clamp_llr(p - a))
        .collect();
    let output_extrinsic = output_posterior
        .iter()
        .zip(&obs)
        .map(|(p, a)| clamp_llr(p - a))
        .collect();
    SisoOutput {
        input_posterior,
        input_extrinsic,
        output_posterior,
        output_extrinsic,
    }
}

fn normalize(metrics: &mut [f64]) {
    let max = metrics.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max.is_finite() {
        metrics.iter_mut().for_each(|m| *m -= max);
    }
}

/// Outer code: memory-1 feed-forward code with octal generators, rate 1/2.
///
/// Generators are read MSB-first, the MSB tapping the current input: with
/// `(3, 2)` the outputs are `(u_k ^ u_{k-1}, u_k)`.
pub fn feedforward_memory1(generators: [u32; 2]) -> Trellis {
    let mut section = Vec::with_capacity(4);
    for state in 0..2usize {
        for input in 0..2u8 {
            let mut outputs = 0u32;
            for (j, g) in generators.iter().enumerate() {
                let tap_now = (g >> 1) & 1;
                let tap_prev = g & 1;
                let bit = (tap_now & u32::from(input)) ^ (tap_prev & state as u32);
                outputs |= bit << j;
            }
            section.push(Branch {
                from: state,
                to: input as usize,
                input,
                outputs,
            });
        }
    }
    Trellis::new(2, 2, vec![section])
}

/// Rate-1 accumulator `s_k = s_{k-1} ^ v_k` whose every `doping_rate`-th
/// output (1-based) is replaced by the systematic input bit.
pub fn doped_accumulator(doping_rate: usize) -> Trellis {
    assert!(doping_rate >= 1);
    let sections = (0..doping_rate)
        .map(|phase| {
            let doped = (phase + 1) % doping_rate == 0;
            let mut section = Vec::with_capacity(4);
            for state in 0..2usize {
                for input in 0..2u8 {
                    let next = state ^ input as usize;
                    let out = if doped { input as u32 } else { next as u32 };
                    section.push(Branch {
                        from: state,
                        to: next,
                        input,
                        outputs: out,
                    });
                }
            }
            section
        })
        .collect();
    Trellis::new(2, 1, sections)
}
