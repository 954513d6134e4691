#!/usr/bin/env node
/**
 * embed-export --manifest m.jsonl --out dir [--force] [--device cpu]
 *              [--encoder real|stub] [--speech-model id] [--speaker-model id]
 *              [--keep-padding]
 *
 * Exit codes: 0 on success (even with per-file failures; see report.json),
 * 2 on usage errors, 1 on fatal errors such as missing checkpoints.
 */

import { makeEncoders, MissingCheckpointError } from "./encoders.js";
import { runExport } from "./export.js";

interface CliArgs {
  manifest: string;
  out: string;
  force: boolean;
  device: string;
  encoder: string;
  speechModel: string;
  speakerModel: string;
  keepPadding: boolean;
}

const USAGE =
  "usage: embed-export --manifest <jsonl> --out <dir> [--force] [--device cpu] " +
  "[--encoder real|stub] [--speech-model id] [--speaker-model id] [--keep-padding]";

function parseArgs(argv: string[]): CliArgs {
  const args: CliArgs = {
    manifest: "",
    out: "",
    force: false,
    device: "cpu",
    encoder: "real",
    speechModel: "Xenova/whisper-base",
    speakerModel: "",
    keepPadding: false,
  };
  for (let i = 0; i < argv.length; i++) {
    const flag = argv[i];
    const next = () => {
      i += 1;
      if (i >= argv.length) throw new UsageError(`${flag} needs a value`);
      return argv[i];
    };
    switch (flag) {
      case "--manifest":
        args.manifest = next();
        break;
      case "--out":
        args.out = next();
        break;
      case "--force":
        args.force = true;
        break;
      case "--device":
        args.device = next();
        break;
      case "--encoder":
        args.encoder = next();
        break;
      case "--speech-model":
        args.speechModel = next();
        break;
      case "--speaker-model":
        args.speakerModel = next();
        break;
      case "--keep-padding":
        args.keepPadding = true;
        break;
      case "--help":
      case "-h":
        console.log(USAGE);
        process.exit(0);
        break;
      default:
        throw new UsageError(`unknown flag ${flag}`);
    }
  }
  if (!args.manifest || !args.out) {
    throw new UsageError("--manifest and --out are required");
  }
  if (args.encoder !== "real" && args.encoder !== "stub") {
    throw new UsageError(`--encoder must be "real" or "stub", got ${args.encoder}`);
  }
  return args;
}

class UsageError extends Error {}

async function main(): Promise<number> {
  let args: CliArgs;
  try {
    args = parseArgs(process.argv.slice(2));
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    console.error(USAGE);
    return 2;
  }
  try {
    const encoders = await makeEncoders(args.encoder, {
      speechModel: args.speechModel,
      speakerModel: args.speakerModel,
      device: args.device,
      keepPadding: args.keepPadding,
    });
    const report = await runExport({
      manifestPath: args.manifest,
      outDir: args.out,
      force: args.force,
      encoders,
    });
    for (const line of report.errors) {
      console.error(`failed: ${line}`);
    }
    console.log(
      `exported ${report.exported}, skipped ${report.skipped}, ` +
        `failures ${report.failures} (report in ${args.out}/report.json)`,
    );
    return 0;
  } catch (err) {
    if (err instanceof MissingCheckpointError) {
      console.error(`fatal: ${err.message}`);
    } else {
      console.error(`error: ${err instanceof Error ? err.message : err}`);
    }
    return 1;
  }
}

main().then((code) => {
  process.exitCode = code;
});
