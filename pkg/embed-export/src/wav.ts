/**
 * Minimal RIFF/WAVE reading for the exporter: PCM16 and float32, mono or
 * stereo (averaged), resampled to the 16 kHz the encoders expect.
 */

import { promises as fs } from "node:fs";

export const TARGET_RATE = 16000;

export class WavError extends Error {}

export interface Audio {
  samples: Float32Array;
  sampleRate: number;
}

export async function readWav(path: string): Promise<Audio> {
  const raw = await fs.readFile(path);
  if (raw.length < 12 || raw.toString("ascii", 0, 4) !== "RIFF" ||
      raw.toString("ascii", 8, 12) !== "WAVE") {
    throw new WavError(`${path}: not a RIFF/WAVE file`);
  }
  let fmt: { format: number; channels: number; rate: number; bits: number } | null = null;
  let payload: Buffer | null = null;
  let pos = 12;
  while (pos + 8 <= raw.length) {
    const id = raw.toString("ascii", pos, pos + 4);
    const size = raw.readUInt32LE(pos + 4);
    const body = raw.subarray(pos + 8, pos + 8 + size);
    if (id === "fmt ") {
      if (body.length < 16) throw new WavError(`${path}: truncated fmt chunk`);
      fmt = {
        format: body.readUInt16LE(0),
        channels: body.readUInt16LE(2),
        rate: body.readUInt32LE(4),
        bits: body.readUInt16LE(14),
      };
    } else if (id === "data") {
      if (body.length < size) throw new WavError(`${path}: truncated data chunk`);
      payload = body;
    }
    pos += 8 + size + (size % 2);
  }
  if (!fmt || !payload) throw new WavError(`${path}: missing fmt or data chunk`);

  let interleaved: Float32Array;
  if (fmt.format === 1 && fmt.bits === 16) {
    const n = Math.floor(payload.length / 2);
    interleaved = new Float32Array(n);
    for (let i = 0; i < n; i++) {
      interleaved[i] = payload.readInt16LE(2 * i) / 32768;
    }
  } else if (fmt.format === 3 && fmt.bits === 32) {
    const n = Math.floor(payload.length / 4);
    interleaved = new Float32Array(n);
    for (let i = 0; i < n; i++) {
      interleaved[i] = payload.readFloatLE(4 * i);
    }
  } else {
    throw new WavError(`${path}: unsupported codec (format ${fmt.format}, ${fmt.bits}-bit)`);
  }

  let samples = interleaved;
  if (fmt.channels > 1) {
    const frames = Math.floor(interleaved.length / fmt.channels);
    samples = new Float32Array(frames);
    for (let i = 0; i < frames; i++) {
      let acc = 0;
      for (let c = 0; c < fmt.channels; c++) acc += interleaved[i * fmt.channels + c];
      samples[i] = acc / fmt.channels;
    }
  }
  return { samples, sampleRate: fmt.rate };
}

/** Linear-interpolation resampling; adequate for embedding extraction. */
export function resampleTo(audio: Audio, targetRate: number = TARGET_RATE): Audio {
  if (audio.sampleRate === targetRate) return audio;
  const ratio = audio.sampleRate / targetRate;
  const outLen = Math.round(audio.samples.length / ratio);
  const out = new Float32Array(outLen);
  for (let i = 0; i < outLen; i++) {
    const src = i * ratio;
    const lo = Math.floor(src);
    const hi = Math.min(lo + 1, audio.samples.length - 1);
    const frac = src - lo;
    out[i] = audio.samples[lo] * (1 - frac) + audio.samples[hi] * frac;
  }
  return { samples: out, sampleRate: targetRate };
}
