//! Runner, console, and benchmark front end for the `bs` binary.

use std::io::{BufRead, Write};
use std::path::Path;

use bscript::bench::{self, BenchError, BenchReport};
use bscript::lexer::{tokenize, TokenKind};
use bscript::{ErrorKind, Interpreter, ScriptError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SCRIPT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Script loaded into every session. `demo()` builds the console: a frame
/// holding a text area and a button whose listener runs the text area's
/// contents as code.
pub const PRELUDE: &str = r#"
function demo()
  window = javaNewInstance("demo.Frame", "Console")
  text = javaNewInstance("demo.TextArea")
  button = javaNewInstance("demo.Button", "Execute")
  events = javaNewInstance("demo.EventSource")
  local layout = javaBindClass("demo.BorderLayout")
  window:add(text, layout.CENTER)
  window:add(button, layout.SOUTH)
  listener = {}
  function listener:actionPerformed(e)
    dostring(text:getText())
  end
  button:addActionListener(listener)
  events:addActionListener(listener)
  window:pack()
  window:show()
  return window:describe()
end
"#;

/// Interpreter with the demo classes registered and the prelude loaded.
pub fn session() -> Interpreter {
    let mut it = Interpreter::with_demo_classes();
    it.exec(PRELUDE).expect("prelude is valid");
    it
}

/// Runs a script file; errors go to `err`. Returns the exit code.
pub fn run_file(it: &mut Interpreter, path: &Path, err: &mut dyn Write) -> i32 {
    let source = match std::fs::read_to_string(path) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "bs: cannot read {}: {e}", path.display());
            return EXIT_USAGE;
        }
    };
    run_source(it, &source, err)
}

pub fn run_source(it: &mut Interpreter, source: &str, err: &mut dyn Write) -> i32 {
    match it.exec(source) {
        Ok(_) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_SCRIPT
        }
    }
}

/// Evaluates an expression and prints its values.
pub fn eval_expr(it: &mut Interpreter, expr: &str, err: &mut dyn Write) -> i32 {
    match it.exec(&format!("return {expr}")).and_then(|vals| it.print_values(&vals)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_SCRIPT
        }
    }
}

/// Whether the chunk ended inside an unclosed block, so that reading more
/// lines could complete it.
fn is_incomplete(src: &str, e: &ScriptError) -> bool {
    if e.kind != ErrorKind::Parse || !e.message.ends_with("found <eof>") {
        return false;
    }
    let Ok(tokens) = tokenize(src) else {
        return false;
    };
    let count = |kw: &str| tokens.iter().filter(|t| t.is(TokenKind::Keyword, kw)).count();
    count("function") + count("if") + count("do") > count("end")
}

enum Step {
    Done,
    NeedMore,
}

fn eval_line(it: &mut Interpreter, src: &str, err: &mut dyn Write) -> Step {
    // An expression prints its values; anything else runs as a statement.
    let result = match it.exec(&format!("return {src}")) {
        Ok(vals) => {
            if vals.is_empty() {
                Ok(())
            } else {
                it.print_values(&vals)
            }
        }
        Err(e) if e.kind == ErrorKind::Parse || e.kind == ErrorKind::Lex => it.exec(src).map(drop),
        Err(e) => Err(e),
    };
    match result {
        Err(e) if is_incomplete(src, &e) => Step::NeedMore,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            Step::Done
        }
        Ok(()) => Step::Done,
    }
}

/// Reads lines until end of input or `exit`. Script errors are reported
/// and the loop continues; globals persist between inputs.
pub fn repl(it: &mut Interpreter, input: &mut dyn BufRead, prompt: Option<&mut dyn Write>, err: &mut dyn Write) {
    let mut prompt = prompt;
    let mut pending = String::new();
    let mut line = String::new();
    loop {
        if let Some(p) = prompt.as_deref_mut() {
            let _ = write!(p, "{}", if pending.is_empty() { "> " } else { ">> " });
            let _ = p.flush();
        }
        line.clear();
        match input.read_line(&mut line) {
            Ok(0) | Err(_) => break,
            Ok(_) => {}
        }
        let trimmed = line.trim();
        if pending.is_empty() {
            if trimmed == "exit" {
                break;
            }
            if trimmed.is_empty() {
                continue;
            }
        }
        pending.push_str(&line);
        if let Step::Done = eval_line(it, &pending, err) {
            pending.clear();
        }
    }
    if !pending.trim().is_empty() {
        // Input ended mid-chunk; report what is wrong with it.
        if let Err(e) = it.exec(&pending) {
            let _ = writeln!(err, "error: {e}");
        }
    }
}

/// Human-readable benchmark summary.
pub fn format_report(r: &BenchReport) -> String {
    let us = |ns: f64| ns / 1000.0;
    let ms = |ns: f64| ns / 1e6;
    let mut s = String::new();
    s.push_str(&format!("iterations: {}\n", r.iterations));
    s.push_str("loop times (median of 5, ms):   empty      one call   two calls\n");
    for (name, t) in [("outbound", &r.outbound), ("native", &r.native), ("inbound", &r.inbound)] {
        s.push_str(&format!(
            "  {name:<9}                  {:>9.3}  {:>9.3}  {:>9.3}\n",
            ms(t.empty_ns),
            ms(t.one_ns),
            ms(t.two_ns)
        ));
    }
    s.push_str(&format!(
        "per call: outbound {:.3} us, native {:.3} us, inbound {:.3} us\n",
        us(r.per_call_outbound_ns),
        us(r.per_call_native_ns),
        us(r.per_call_inbound_ns)
    ));
    s.push_str(&format!("ratio outbound/native: {:.2}x\n", r.ratio));
    s.push_str(&format!(
        "historical reference: {} us outbound vs {} us in-script (~{:.0}x, Pentium 200 MHz)\n",
        bench::REFERENCE_OUTBOUND_US,
        bench::REFERENCE_NATIVE_US,
        bench::REFERENCE_OUTBOUND_US / bench::REFERENCE_NATIVE_US
    ));
    s
}

/// Runs the benchmark and prints it. Exit 1 if the order property fails.
pub fn bench_command(iterations: u64, json: bool, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let report = match bench::run_bench(iterations) {
        Ok(r) => r,
        Err(e @ BenchError::IterationsTooSmall(_)) => {
            let _ = writeln!(err, "bs bench: {e}");
            return EXIT_USAGE;
        }
        Err(e) => {
            let _ = writeln!(err, "bs bench: {e}");
            return EXIT_SCRIPT;
        }
    };
    if json {
        let _ = writeln!(out, "{}", report.to_json());
    } else {
        let _ = write!(out, "{}", format_report(&report));
    }
    match report.check_order() {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "bs bench: {e}");
            EXIT_SCRIPT
        }
    }
}
