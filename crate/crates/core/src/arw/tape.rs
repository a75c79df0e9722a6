//! Instruction fields for the site-wise construction.
//!
//! An [`InstructionTape`] assigns every site an infinite i.i.d. stack of
//! instructions; entry `k` of site `i` is a pure function of
//! `(seed, i, k, p, q)`, so the stacks can be extended lazily in any order
//! and a replay under a different toppling order reads the same stacks.
//!
//! Binary layout (little-endian), version 1:
//!
//! ```text
//! "ARWT" | u32 version | u64 seed | u32 n
//! then for each site 0..n: LEB128 run length, followed by that many
//! LEB128 instruction codes: 0 = sleep, 1 = jump to sink, 2 + j = jump to site j
//! ```

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::Params;
use crate::replicate::mix64;

pub const TAPE_MAGIC: &[u8; 4] = b"ARWT";
pub const TAPE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Target {
    Site(u32),
    Sink,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Instruction {
    Sleep,
    Jump(Target),
}

impl Instruction {
    fn code(self) -> u64 {
        match self {
            Instruction::Sleep => 0,
            Instruction::Jump(Target::Sink) => 1,
            Instruction::Jump(Target::Site(j)) => 2 + j as u64,
        }
    }

    fn from_code(code: u64, n: usize) -> Result<Self> {
        match code {
            0 => Ok(Instruction::Sleep),
            1 => Ok(Instruction::Jump(Target::Sink)),
            c if c - 2 < n as u64 => Ok(Instruction::Jump(Target::Site((c - 2) as u32))),
            c => Err(Error::Tape(format!("jump target {} outside [0, {n})", c - 2))),
        }
    }
}

/// Where a stabilizer reads instructions from.
pub trait InstructionSource {
    /// Next instruction for a site holding a single active particle.
    fn next(&mut self, site: usize, params: &Params) -> Instruction;

    /// Next instruction for a site holding two or more particles, where a
    /// sleep instruction is a consumed no-op.
    fn next_crowded(&mut self, site: usize, params: &Params) -> Instruction {
        self.next(site, params)
    }
}

/// Jump destination: sink with probability `q`, else a uniform site
/// (self-loops included).
#[inline]
pub(crate) fn sample_target<R: Rng + ?Sized>(rng: &mut R, n: usize, q: f64) -> Target {
    if q > 0.0 && rng.random::<f64>() < q {
        Target::Sink
    } else {
        Target::Site(rng.random_range(0..n as u32))
    }
}

/// Instructions drawn on demand from an RNG.
///
/// Since a site's instructions are i.i.d., drawing them in execution order
/// gives the same law as a pre-sampled field. At crowded sites the run of
/// no-op sleeps before the next jump is skipped.
pub struct FreshInstructions<'a, R: Rng + ?Sized> {
    rng: &'a mut R,
}

impl<'a, R: Rng + ?Sized> FreshInstructions<'a, R> {
    pub fn new(rng: &'a mut R) -> Self {
        FreshInstructions { rng }
    }
}

impl<R: Rng + ?Sized> InstructionSource for FreshInstructions<'_, R> {
    #[inline]
    fn next(&mut self, _site: usize, params: &Params) -> Instruction {
        if self.rng.random::<f64>() < params.p {
            Instruction::Sleep
        } else {
            Instruction::Jump(sample_target(self.rng, params.n, params.q))
        }
    }

    #[inline]
    fn next_crowded(&mut self, _site: usize, params: &Params) -> Instruction {
        if params.p >= 1.0 {
            // every instruction is a sleep; nothing to skip to
            return Instruction::Sleep;
        }
        Instruction::Jump(sample_target(self.rng, params.n, params.q))
    }
}

/// A recorded, replayable instruction field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstructionTape {
    n: usize,
    seed: u64,
    runs: Vec<Vec<Instruction>>,
    cursors: Vec<usize>,
}

impl InstructionTape {
    pub fn new(n: usize, seed: u64) -> Self {
        InstructionTape {
            n,
            seed,
            runs: vec![Vec::new(); n],
            cursors: vec![0; n],
        }
    }

    /// A tape whose leading instructions are given explicitly; later entries
    /// are generated from `seed`.
    pub fn from_runs(seed: u64, runs: Vec<Vec<Instruction>>) -> Result<Self> {
        let n = runs.len();
        for inst in runs.iter().flatten() {
            if let Instruction::Jump(Target::Site(j)) = inst {
                if *j as usize >= n {
                    return Err(Error::Tape(format!("jump target {j} outside [0, {n})")));
                }
            }
        }
        Ok(InstructionTape {
            n,
            seed,
            cursors: vec![0; n],
            runs,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Instructions materialized so far at `site`.
    pub fn run(&self, site: usize) -> &[Instruction] {
        &self.runs[site]
    }

    /// Instructions consumed at `site` since the last rewind.
    pub fn consumed(&self, site: usize) -> usize {
        self.cursors[site]
    }

    /// Resets every cursor so the tape can be replayed.
    pub fn rewind(&mut self) {
        self.cursors.iter_mut().for_each(|c| *c = 0);
    }

    pub fn rewound(&self) -> Self {
        let mut t = self.clone();
        t.rewind();
        t
    }

    /// Drops entry `index` of `site` (materializing up to it first), shifting
    /// the rest of that stack forward.
    pub fn remove_instruction(&mut self, site: usize, index: usize, params: &Params) {
        while self.runs[site].len() <= index {
            let k = self.runs[site].len();
            let inst = generate(self.seed, site, k, params);
            self.runs[site].push(inst);
        }
        self.runs[site].remove(index);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(TAPE_MAGIC);
        out.extend_from_slice(&TAPE_VERSION.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&(self.n as u32).to_le_bytes());
        for run in &self.runs {
            leb128::write::unsigned(&mut out, run.len() as u64).expect("write to Vec");
            for inst in run {
                leb128::write::unsigned(&mut out, inst.code()).expect("write to Vec");
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut rd = bytes;
        let mut take = |len: usize| -> Result<&[u8]> {
            if rd.len() < len {
                return Err(Error::Tape("truncated header".into()));
            }
            let (head, rest) = rd.split_at(len);
            rd = rest;
            Ok(head)
        };
        if take(4)? != TAPE_MAGIC {
            return Err(Error::Tape("bad magic".into()));
        }
        let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
        if version != TAPE_VERSION {
            return Err(Error::Tape(format!("unsupported version {version}")));
        }
        let seed = u64::from_le_bytes(take(8)?.try_into().unwrap());
        let n = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let mut rest = &bytes[20..];
        let mut read = || -> Result<u64> {
            leb128::read::unsigned(&mut rest).map_err(|e| Error::Tape(format!("bad varint: {e}")))
        };
        let mut runs = Vec::with_capacity(n);
        for _ in 0..n {
            let len = read()? as usize;
            let mut run = Vec::with_capacity(len.min(1 << 20));
            for _ in 0..len {
                run.push(Instruction::from_code(read()?, n)?);
            }
            runs.push(run);
        }
        if !rest.is_empty() {
            return Err(Error::Tape(format!("{} trailing bytes", rest.len())));
        }
        Ok(InstructionTape {
            n,
            seed,
            cursors: vec![0; n],
            runs,
        })
    }
}

impl InstructionSource for InstructionTape {
    fn next(&mut self, site: usize, params: &Params) -> Instruction {
        let k = self.cursors[site];
        let run = &mut self.runs[site];
        if k == run.len() {
            run.push(generate(self.seed, site, k, params));
        }
        self.cursors[site] = k + 1;
        run[k]
    }
}

#[inline]
fn unit(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Entry `k` of site `site`'s stack.
fn generate(seed: u64, site: usize, k: usize, params: &Params) -> Instruction {
    let h0 = mix64(mix64(seed ^ mix64(site as u64 ^ 0xA076_1D64_78BD_642F)) ^ k as u64);
    if unit(h0) < params.p {
        return Instruction::Sleep;
    }
    let h1 = mix64(h0 ^ 0xE703_7ED1_A0B4_28DB);
    if unit(h1) < params.q {
        return Instruction::Jump(Target::Sink);
    }
    let h2 = mix64(h1 ^ 0x8EBC_6AF0_9C88_C6E3);
    let j = ((h2 as u128 * params.n as u128) >> 64) as u32;
    Instruction::Jump(Target::Site(j))
}
