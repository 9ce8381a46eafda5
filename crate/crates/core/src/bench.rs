//! Call-overhead measurement.
//!
//! Each path is timed with three loops of `n` iterations: empty, one call
//! and two calls per iteration. Per-call cost is the average of the two
//! differences, so loop overhead cancels out.

use std::hint::black_box;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::ast::Chunk;
use crate::error::ScriptError;
use crate::host::{HostContext, HostValue};
use crate::inbound;
use crate::interp::Interpreter;
use crate::parser::parse_source;
use crate::value::Value;

pub const MIN_ITERATIONS: u64 = 1000;
pub const DEFAULT_ITERATIONS: u64 = 1_000_000;
pub const WARMUPS: usize = 3;
pub const REPETITIONS: usize = 5;

/// Historical figures for the same comparison: 49 µs per host call from a
/// script against 3 µs for an in-script call, on a 200 MHz Pentium.
pub const REFERENCE_OUTBOUND_US: f64 = 49.0;
pub const REFERENCE_NATIVE_US: f64 = 3.0;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("at least {MIN_ITERATIONS} iterations are needed, got {0}")]
    IterationsTooSmall(u64),
    #[error(transparent)]
    Script(#[from] ScriptError),
    #[error("order violated: outbound {outbound_ns:.1} ns, native {native_ns:.1} ns per call")]
    OrderViolated { outbound_ns: f64, native_ns: f64 },
}

/// Median loop times in nanoseconds.
#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct LoopTimings {
    pub empty_ns: f64,
    pub one_ns: f64,
    pub two_ns: f64,
}

impl LoopTimings {
    pub fn per_call(&self, n: u64) -> f64 {
        per_call(self.empty_ns, self.one_ns, self.two_ns, n)
    }
}

/// `((two - one) + (one - empty)) / 2n`.
pub fn per_call(empty: f64, one: f64, two: f64, n: u64) -> f64 {
    ((two - one) + (one - empty)) / (2.0 * n as f64)
}

pub fn median(samples: &mut [f64]) -> f64 {
    assert!(!samples.is_empty(), "median of no samples");
    samples.sort_by(f64::total_cmp);
    let mid = samples.len() / 2;
    if samples.len() % 2 == 1 {
        samples[mid]
    } else {
        (samples[mid - 1] + samples[mid]) / 2.0
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub iterations: u64,
    pub outbound: LoopTimings,
    pub native: LoopTimings,
    pub inbound: LoopTimings,
    pub per_call_outbound_ns: f64,
    pub per_call_native_ns: f64,
    pub per_call_inbound_ns: f64,
    pub ratio: f64,
}

impl BenchReport {
    /// Host calls from a script must cost more than script-to-script calls,
    /// and both must be measurably positive.
    pub fn check_order(&self) -> Result<(), BenchError> {
        if self.per_call_outbound_ns > self.per_call_native_ns && self.per_call_native_ns > 0.0 {
            Ok(())
        } else {
            Err(BenchError::OrderViolated {
                outbound_ns: self.per_call_outbound_ns,
                native_ns: self.per_call_native_ns,
            })
        }
    }

    /// Flat record with every figure, times in nanoseconds.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "iterations": self.iterations,
            "outbound_empty_ns": self.outbound.empty_ns,
            "outbound_one_ns": self.outbound.one_ns,
            "outbound_two_ns": self.outbound.two_ns,
            "native_empty_ns": self.native.empty_ns,
            "native_one_ns": self.native.one_ns,
            "native_two_ns": self.native.two_ns,
            "inbound_empty_ns": self.inbound.empty_ns,
            "inbound_one_ns": self.inbound.one_ns,
            "inbound_two_ns": self.inbound.two_ns,
            "per_call_outbound_ns": self.per_call_outbound_ns,
            "per_call_native_ns": self.per_call_native_ns,
            "per_call_inbound_ns": self.per_call_inbound_ns,
            "ratio": self.ratio,
            "reference_outbound_ns": REFERENCE_OUTBOUND_US * 1000.0,
            "reference_native_ns": REFERENCE_NATIVE_US * 1000.0,
            "reference_ratio": REFERENCE_OUTBOUND_US / REFERENCE_NATIVE_US,
        })
    }
}

fn timed_eval(it: &mut Interpreter, chunk: &Chunk) -> Result<f64, ScriptError> {
    let start = Instant::now();
    it.eval(chunk)?;
    Ok(start.elapsed().as_nanos() as f64)
}

fn time_ns(f: impl FnOnce()) -> f64 {
    let start = Instant::now();
    f();
    start.elapsed().as_nanos() as f64
}

/// Runs `f` for the warm-ups, then returns the median of the timed runs.
fn measure(mut f: impl FnMut() -> Result<f64, BenchError>) -> Result<f64, BenchError> {
    for _ in 0..WARMUPS {
        f()?;
    }
    let mut samples = Vec::with_capacity(REPETITIONS);
    for _ in 0..REPETITIONS {
        samples.push(f()?);
    }
    Ok(median(&mut samples))
}

fn script_loops(it: &mut Interpreter, call: &str) -> Result<LoopTimings, BenchError> {
    let chunks: Vec<Chunk> = ["", call, &format!("{call} {call}")]
        .iter()
        .map(|body| parse_source(&format!("for i = 1, N do {body} end")))
        .collect::<Result<_, _>>()?;
    let mut run = |c: &Chunk| {
        measure(|| Ok(timed_eval(it, c)?))
    };
    Ok(LoopTimings {
        empty_ns: run(&chunks[0])?,
        one_ns: run(&chunks[1])?,
        two_ns: run(&chunks[2])?,
    })
}

fn inbound_loops(it: &mut Interpreter, n: u64) -> Result<LoopTimings, BenchError> {
    it.exec("callback = {} function callback:empty() end")?;
    let t = it.global("callback").as_table().cloned().expect("table");
    let target = HostValue::Wrapper(inbound::host_export(it, &t, "bench.Callback")?);
    let mut run = |calls: usize| {
        measure(|| {
            let mut res = Ok(());
            let t = time_ns(|| {
                for i in 0..n {
                    black_box(i);
                    for _ in 0..calls {
                        if let Err(e) = it.call_method(&target, "empty", Vec::new()) {
                            res = Err(e);
                            return;
                        }
                    }
                }
            });
            res.map_err(ScriptError::from)?;
            Ok(t)
        })
    };
    Ok(LoopTimings {
        empty_ns: run(0)?,
        one_ns: run(1)?,
        two_ns: run(2)?,
    })
}

fn bench_interpreter(n: u64) -> Result<Interpreter, BenchError> {
    let mut it = Interpreter::with_demo_classes();
    it.set_global("N", Value::Number(n as f64));
    it.exec(
        "counter = hostNewInstance('bench.Counter')
         local_obj = {}
         function local_obj:empty() end",
    )?;
    Ok(it)
}

/// Measures outbound, in-script, and inbound per-call overhead.
pub fn run_bench(iterations: u64) -> Result<BenchReport, BenchError> {
    if iterations < MIN_ITERATIONS {
        return Err(BenchError::IterationsTooSmall(iterations));
    }
    let mut it = bench_interpreter(iterations)?;
    let outbound = script_loops(&mut it, "counter:empty()")?;
    let native = script_loops(&mut it, "local_obj:empty()")?;
    let inbound = inbound_loops(&mut it, iterations)?;
    let per_call_outbound_ns = outbound.per_call(iterations);
    let per_call_native_ns = native.per_call(iterations);
    Ok(BenchReport {
        iterations,
        outbound,
        native,
        inbound,
        per_call_outbound_ns,
        per_call_native_ns,
        per_call_inbound_ns: inbound.per_call(iterations),
        ratio: per_call_outbound_ns / per_call_native_ns,
    })
}

/// First call of a method on a fresh proxy against later calls of it.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CacheEffect {
    pub first_call_ns: f64,
    pub cached_call_ns: f64,
}

/// Times the first `c:empty()` on a fresh proxy individually, then the
/// mean of `calls - 1` individually timed repeats; median over the runs.
pub fn measure_cache_effect(calls: usize, runs: usize) -> Result<CacheEffect, BenchError> {
    assert!(calls >= 2 && runs >= 1);
    let mut it = Interpreter::with_demo_classes();
    let call = parse_source("c:empty()")?;
    let fresh = parse_source("c = hostNewInstance('bench.Counter')")?;
    // Warm the code paths on a throwaway proxy.
    it.eval(&fresh)?;
    for _ in 0..calls {
        it.eval(&call)?;
    }
    let mut firsts = Vec::with_capacity(runs);
    let mut cached = Vec::with_capacity(runs);
    for _ in 0..runs {
        it.eval(&fresh)?;
        firsts.push(timed_eval(&mut it, &call)?);
        let mut total = 0.0;
        for _ in 1..calls {
            total += timed_eval(&mut it, &call)?;
        }
        cached.push(total / (calls - 1) as f64);
    }
    Ok(CacheEffect {
        first_call_ns: median(&mut firsts),
        cached_call_ns: median(&mut cached),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn per_call_formula() {
        assert_eq!(per_call(100.0, 300.0, 500.0, 100), 2.0);
        assert_eq!(per_call(0.0, 10.0, 30.0, 5), 3.0);
    }

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(&mut [5.0, 1.0, 3.0]), 3.0);
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn too_few_iterations() {
        assert!(matches!(run_bench(999), Err(BenchError::IterationsTooSmall(999))));
    }

    #[test]
    fn small_run_produces_positive_figures() {
        let r = run_bench(MIN_ITERATIONS).unwrap();
        assert!(r.outbound.two_ns > 0.0 && r.native.two_ns > 0.0);
        let json = r.to_json();
        assert_eq!(json["iterations"], 1000);
        assert!(json["per_call_outbound_ns"].is_f64());
    }

    #[test]
    fn order_check() {
        let t = LoopTimings { empty_ns: 0.0, one_ns: 0.0, two_ns: 0.0 };
        let mut r = BenchReport {
            iterations: 1000,
            outbound: t,
            native: t,
            inbound: t,
            per_call_outbound_ns: 5.0,
            per_call_native_ns: 1.0,
            per_call_inbound_ns: 1.0,
            ratio: 5.0,
        };
        assert!(r.check_order().is_ok());
        r.per_call_native_ns = 6.0;
        assert!(r.check_order().is_err());
    }
}
