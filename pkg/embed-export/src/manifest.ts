/**
 * Reader for the jointasr manifest format (JSON Lines): each record has
 * an `audio` field (a WAV path, or an object of precomputed EMB1 paths),
 * a transcript, and a speaker_id. The exporter only consumes WAV-backed
 * records; it derives the utterance id from the audio file stem.
 */

import { promises as fs } from "node:fs";
import path from "node:path";

export interface ManifestRecord {
  utteranceId: string;
  audioPath: string;
  speakerId: string;
}

export class ManifestError extends Error {}

export async function readManifest(manifestPath: string): Promise<ManifestRecord[]> {
  let text: string;
  try {
    text = await fs.readFile(manifestPath, "utf8");
  } catch (err) {
    throw new ManifestError(`cannot read manifest ${manifestPath}: ${err}`);
  }
  const records: ManifestRecord[] = [];
  const lines = text.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (!line) continue;
    let row: any;
    try {
      row = JSON.parse(line);
    } catch (err) {
      throw new ManifestError(`${manifestPath}:${i + 1}: invalid JSON (${err})`);
    }
    if (typeof row.audio !== "string") {
      continue; // already EMB1-backed; nothing to export
    }
    if (typeof row.speaker_id !== "string" && typeof row.speaker_id !== "number") {
      throw new ManifestError(`${manifestPath}:${i + 1}: missing speaker_id`);
    }
    records.push({
      utteranceId: path.basename(row.audio).replace(/\.[^.]+$/, ""),
      audioPath: row.audio,
      speakerId: String(row.speaker_id),
    });
  }
  if (records.length === 0) {
    throw new ManifestError(`${manifestPath}: no WAV-backed records to export`);
  }
  return records;
}
