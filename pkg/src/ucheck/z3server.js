#!/usr/bin/env node
// SMT-LIB2 pipe server backed by the z3-solver WebAssembly build.
//
// Protocol: plain SMT-LIB2 commands on stdin.  Input accumulates until an
// (echo "...") line arrives; the buffered script is then evaluated in the
// current context and the solver output (which ends with the echoed string)
// is written back.  "(reset)" recreates the context, "(exit)" quits.  This
// matches how a native solver binary with -in behaves over a pipe.

"use strict";

function resolveZ3() {
  try {
    return require("z3-solver");
  } catch (err) {
    const { execSync } = require("child_process");
    const root = execSync("npm root -g").toString().trim();
    return require(require("path").join(root, "z3-solver"));
  }
}

(async () => {
  const { init } = resolveZ3();
  const { Z3 } = await init();
  const cfg = Z3.mk_config();
  let ctx = Z3.mk_context(cfg);
  let pending = [];

  const readline = require("readline");
  const rl = readline.createInterface({ input: process.stdin, terminal: false });

  for await (const line of rl) {
    const trimmed = line.trim();
    if (trimmed === "(exit)") {
      break;
    }
    if (trimmed === "(reset)") {
      Z3.del_context(ctx);
      ctx = Z3.mk_context(cfg);
      pending = [];
      continue;
    }
    pending.push(line);
    if (trimmed.startsWith("(echo ")) {
      const script = pending.join("\n");
      pending = [];
      let out;
      try {
        out = await Z3.eval_smtlib2_string(ctx, script);
      } catch (err) {
        // keep the reader unblocked: report the failure, then echo the marker
        const marker = trimmed.slice(trimmed.indexOf('"') + 1, trimmed.lastIndexOf('"'));
        out = '(error "' + String(err).replace(/"/g, "'") + '")\n' + marker;
      }
      if (!out.endsWith("\n")) out += "\n";
      process.stdout.write(out);
    }
  }
  process.exit(0);
})().catch((err) => {
  process.stderr.write(String(err) + "\n");
  process.exit(3);
});
