/**
 * The export job: run the encoders over every WAV-backed manifest record
 * and write one EMB1 pair per utterance plus a JSON report.
 *
 * Idempotent by default: outputs that already exist and validate are
 * skipped unless `force` is set. Per-file failures are logged and counted
 * in the report; only encoder/checkpoint initialization is fatal.
 */

import { promises as fs } from "node:fs";
import path from "node:path";

import { readEmb, writeEmb } from "./emb1.js";
import { Encoders, SPEAKER_DIM, SPEECH_DIM } from "./encoders.js";
import { readManifest } from "./manifest.js";
import { readWav, resampleTo, TARGET_RATE } from "./wav.js";

export interface ExportJob {
  manifestPath: string;
  outDir: string;
  force: boolean;
  encoders: Encoders;
}

export interface ExportReport {
  count: number;
  exported: number;
  skipped: number;
  failures: number;
  dims: { speech: number; speaker: number };
  encoder: string;
  errors: string[];
}

async function outputsValid(speechPath: string, speakerPath: string): Promise<boolean> {
  try {
    const speech = await readEmb(speechPath);
    const speaker = await readEmb(speakerPath);
    return speech.cols === SPEECH_DIM && speaker.rows === 1 && speaker.cols === SPEAKER_DIM;
  } catch {
    return false;
  }
}

function assertFinite(data: Float32Array, label: string): void {
  for (const v of data) {
    if (!Number.isFinite(v)) throw new Error(`non-finite value in ${label}`);
  }
}

export async function runExport(job: ExportJob): Promise<ExportReport> {
  const records = await readManifest(job.manifestPath);
  await fs.mkdir(job.outDir, { recursive: true });
  const report: ExportReport = {
    count: 0,
    exported: 0,
    skipped: 0,
    failures: 0,
    dims: { speech: SPEECH_DIM, speaker: SPEAKER_DIM },
    encoder: job.encoders.name,
    errors: [],
  };

  for (const record of records) {
    const speechPath = path.join(job.outDir, `${record.utteranceId}.speech.emb1`);
    const speakerPath = path.join(job.outDir, `${record.utteranceId}.speaker.emb1`);
    try {
      if (!job.force && (await outputsValid(speechPath, speakerPath))) {
        report.skipped += 1;
        report.count += 1;
        continue;
      }
      const audio = resampleTo(await readWav(record.audioPath), TARGET_RATE);
      const speech = await job.encoders.speechEncode(audio.samples, audio.sampleRate);
      const speaker = await job.encoders.speakerEncode(audio.samples, audio.sampleRate);
      if (speech.cols !== SPEECH_DIM) {
        throw new Error(`speech encoder produced ${speech.cols} dims, expected ${SPEECH_DIM}`);
      }
      if (speaker.rows !== 1 || speaker.cols !== SPEAKER_DIM) {
        throw new Error(
          `speaker encoder produced ${speaker.rows}x${speaker.cols}, expected 1x${SPEAKER_DIM}`,
        );
      }
      assertFinite(speech.data, `${record.utteranceId} speech embedding`);
      assertFinite(speaker.data, `${record.utteranceId} speaker embedding`);
      await writeEmb(speechPath, speech.rows, speech.cols, speech.data);
      await writeEmb(speakerPath, speaker.rows, speaker.cols, speaker.data);
      report.exported += 1;
      report.count += 1;
    } catch (err) {
      report.failures += 1;
      report.errors.push(`${record.utteranceId}: ${err instanceof Error ? err.message : err}`);
    }
  }

  await fs.writeFile(
    path.join(job.outDir, "report.json"),
    JSON.stringify(report, null, 2) + "\n",
  );
  return report;
}
