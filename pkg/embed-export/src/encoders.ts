/**
 * Encoder backends. The real backend runs pretrained models through
 * @huggingface/transformers (lazy-imported); the penultimate-layer speech
 * embeddings are the encoder's final hidden states, trimmed to the actual
 * audio length unless keepPadding is set. The stub backend is a
 * deterministic offline stand-in with the contractual output shapes
 * (N x 512 speech, 1 x 192 speaker), so the export pipeline and the EMB1
 * interchange can be exercised without downloaded checkpoints.
 */

export const SPEECH_DIM = 512;
export const SPEAKER_DIM = 192;

const FRAME = 400; // 25 ms at 16 kHz
const HOP = 160; // 10 ms

export interface Matrix {
  rows: number;
  cols: number;
  data: Float32Array;
}

export interface Encoders {
  name: string;
  speechEncode(samples: Float32Array, sampleRate: number): Promise<Matrix>;
  speakerEncode(samples: Float32Array, sampleRate: number): Promise<Matrix>;
}

export class MissingCheckpointError extends Error {}

/** Stacked-pair frame count of the 20 ms embedding grid. */
export function speechFrameCount(nSamples: number): number {
  const melFrames = Math.floor((nSamples - FRAME) / HOP) + 1;
  return Math.max(1, Math.floor(melFrames / 2));
}

function frameRms(samples: Float32Array, frame: number): number {
  const start = frame * 2 * HOP;
  const end = Math.min(start + FRAME, samples.length);
  let acc = 0;
  for (let i = start; i < end; i++) acc += samples[i] * samples[i];
  return Math.sqrt(acc / Math.max(1, end - start));
}

export class StubEncoders implements Encoders {
  name = "stub";

  async speechEncode(samples: Float32Array, _sampleRate: number): Promise<Matrix> {
    const rows = speechFrameCount(samples.length);
    const data = new Float32Array(rows * SPEECH_DIM);
    for (let i = 0; i < rows; i++) {
      const level = frameRms(samples, i);
      for (let j = 0; j < SPEECH_DIM; j++) {
        data[i * SPEECH_DIM + j] = Math.sin(0.013 * j + 0.71 * i) * (0.5 + level);
      }
    }
    return { rows, cols: SPEECH_DIM, data };
  }

  async speakerEncode(samples: Float32Array, _sampleRate: number): Promise<Matrix> {
    let acc = 0;
    for (const s of samples) acc += s * s;
    const rms = Math.sqrt(acc / Math.max(1, samples.length));
    const data = new Float32Array(SPEAKER_DIM);
    let norm = 0;
    for (let j = 0; j < SPEAKER_DIM; j++) {
      data[j] = Math.sin(0.05 * j + 10 * rms) + 0.01;
      norm += data[j] * data[j];
    }
    norm = Math.sqrt(norm);
    for (let j = 0; j < SPEAKER_DIM; j++) data[j] /= norm;
    return { rows: 1, cols: SPEAKER_DIM, data };
  }
}

export interface RealEncoderOptions {
  speechModel: string;
  speakerModel: string;
  device: string;
  keepPadding: boolean;
}

export class TransformersEncoders implements Encoders {
  name = "transformers";
  private opts: RealEncoderOptions;
  private speech: any = null;
  private speechProcessor: any = null;
  private speaker: any = null;

  constructor(opts: RealEncoderOptions) {
    this.opts = opts;
  }

  async init(): Promise<void> {
    let hub: any;
    try {
      // optional dependency; resolved only when the real path is requested
      const moduleName = "@huggingface/transformers";
      hub = await import(moduleName);
    } catch {
      throw new MissingCheckpointError(
        "the real-encoder path needs @huggingface/transformers " +
          "(npm install @huggingface/transformers) and downloaded checkpoints; " +
          "use --encoder stub for an offline run",
      );
    }
    try {
      this.speechProcessor = await hub.AutoProcessor.from_pretrained(this.opts.speechModel);
      this.speech = await hub.AutoModel.from_pretrained(this.opts.speechModel, {
        device: this.opts.device,
      });
      this.speaker = await hub.AutoModel.from_pretrained(this.opts.speakerModel, {
        device: this.opts.device,
      });
    } catch (err) {
      throw new MissingCheckpointError(
        `cannot load pretrained checkpoints (${err}); they must be available locally or downloadable`,
      );
    }
  }

  async speechEncode(samples: Float32Array, sampleRate: number): Promise<Matrix> {
    const inputs = await this.speechProcessor(samples, { sampling_rate: sampleRate });
    const out = await this.speech.encoder(inputs);
    const hidden = out.last_hidden_state; // [1, frames, width]
    const [, frames, width] = hidden.dims;
    let keep = frames;
    if (!this.opts.keepPadding) {
      // the speech encoder pads to a fixed window; trim to real audio length
      keep = Math.min(frames, Math.max(1, Math.floor((samples.length / sampleRate) * 50)));
    }
    const data = new Float32Array(keep * width);
    data.set(hidden.data.subarray(0, keep * width));
    return { rows: keep, cols: width, data };
  }

  async speakerEncode(samples: Float32Array, sampleRate: number): Promise<Matrix> {
    const out = await this.speaker({
      input_values: samples,
      sampling_rate: sampleRate,
    });
    const emb = out.embeddings ?? out.last_hidden_state;
    const data = Float32Array.from(emb.data.subarray(0, emb.data.length));
    return { rows: 1, cols: data.length, data };
  }
}

export async function makeEncoders(
  kind: string,
  opts: RealEncoderOptions,
): Promise<Encoders> {
  if (kind === "stub") {
    return new StubEncoders();
  }
  if (kind === "real") {
    const enc = new TransformersEncoders(opts);
    await enc.init();
    return enc;
  }
  throw new Error(`unknown encoder kind ${kind} (use "real" or "stub")`);
}
